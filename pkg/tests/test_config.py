"""Tests for configuration loading."""

import pytest

from spx.config import Config, parse_bool, parse_int_list, parse_key_values
from spx.exceptions import ConfigError


class TestConfig:
    def test_defaults(self):
        config = Config()
        assert config.seed == 0
        assert config.runs == 20
        assert config.noise_pattern == "XX"
        assert config.tls_block_size == 1024
        assert config.cert_size == 3072

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("SPX_SEED", "42")
        monkeypatch.setenv("SPX_RUNS", "5")
        monkeypatch.setenv("SPX_VERBOSE", "yes")
        config = Config.from_env()
        assert config.seed == 42
        assert config.runs == 5
        assert config.verbose

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv("SPX_SEED", "abc")
        with pytest.raises(ConfigError, match="SPX_SEED"):
            Config()

    @pytest.mark.parametrize("kwargs", [
        {"runs": 1},
        {"jitter_us": -1.0},
        {"tls_block_size": 0},
        {"noise_max_message": 16},
        {"transfer_sizes": ()},
        {"concurrency_levels": (0,)},
        {"memory_cap_sessions": -1},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            Config(**kwargs)

    def test_from_file(self, tmp_path):
        path = tmp_path / "spx.conf"
        path.write_text(
            "seed = 7\n"
            "runs = 3  # small\n"
            "transfer_sizes = 1024, 4096\n"
            "memory_cap_sessions = none\n"
            "handshake_timeout_us = 5000\n"
            "noise_pattern = IK\n"
        )
        config = Config.from_file(path)
        assert config.seed == 7
        assert config.runs == 3
        assert config.transfer_sizes == (1024, 4096)
        assert config.memory_cap_sessions is None
        assert config.handshake_timeout_us == 5000.0
        assert config.noise_pattern == "IK"

    def test_env_wins_over_file(self, tmp_path, monkeypatch):
        path = tmp_path / "spx.conf"
        path.write_text("seed = 7\n")
        monkeypatch.setenv("SPX_SEED", "9")
        assert Config.from_file(path).seed == 9

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            Config.from_mapping({"colour": "blue"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            Config.from_file(tmp_path / "absent.conf")

    def test_to_dict(self):
        data = Config(seed=3).to_dict()
        assert data["seed"] == 3
        assert "_ENV" not in data


class TestParsers:
    def test_key_values(self):
        assert parse_key_values("a = 1\n\n# note\nb=two # tail\n") == {"a": "1", "b": "two"}

    @pytest.mark.parametrize("text", ["no equals sign", "a = 1\na = 2", " = 3"])
    def test_key_values_errors(self, text):
        with pytest.raises(ConfigError):
            parse_key_values(text)

    def test_int_list(self):
        assert parse_int_list("1, 2,3") == (1, 2, 3)
        with pytest.raises(ConfigError):
            parse_int_list("1, x")

    @pytest.mark.parametrize("raw,expected", [("1", True), ("on", True), ("False", False), ("no", False)])
    def test_bool(self, raw, expected):
        assert parse_bool(raw) is expected

    def test_bad_bool(self):
        with pytest.raises(ConfigError):
            parse_bool("maybe")

"""Shared fixtures and hypothesis profiles."""

import os

import pytest
from hypothesis import HealthCheck, settings

from spx.config import Config
from spx.crypto_core import Entropy

settings.register_profile("default", deadline=None, max_examples=50)
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=10)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

ENV_VARS = ("SPX_SEED", "SPX_RUNS", "SPX_OUT_DIR", "SPX_SPILL_DIR", "SPX_VERBOSE")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep SPX_* variables from the caller's shell out of every test."""
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def entropy():
    return Entropy(1234)


@pytest.fixture
def config(tmp_path):
    """Small, fast benchmark configuration."""
    return Config(runs=2, out_dir=str(tmp_path / "experiments"))

"""Configuration management for spx."""

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .exceptions import ConfigError

# Half of the measured round trips of the reference deployment, in microseconds.
DEFAULT_CLIENT_EDGE_US = 482.0
DEFAULT_EDGE_SERVER_US = 451.0
DEFAULT_CLIENT_SERVER_US = 481.0

DEFAULT_TRANSFER_SIZES = (1024, 16 * 1024, 64 * 1024, 256 * 1024, 1024 * 1024, 1600 * 1024)


def parse_key_values(text: str, source: str = "<string>") -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

    Raises:
        ConfigError: a line has no ``=`` or repeats a key
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def parse_int_list(value: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.replace(" ", "").split(",") if part)
    except ValueError as exc:
        raise ConfigError(f"expected a comma separated list of integers, got {value!r}") from exc


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


@dataclass
class Config:
    """Configuration for spx simulations and benchmarks."""

    # Reproducibility
    seed: int = 0
    runs: int = 20

    # Paths
    out_dir: str = "./experiments"
    spill_dir: Optional[str] = None

    # Topology (one-way latencies, microseconds)
    client_edge_us: float = DEFAULT_CLIENT_EDGE_US
    edge_server_us: float = DEFAULT_EDGE_SERVER_US
    client_server_us: float = DEFAULT_CLIENT_SERVER_US
    jitter_us: float = 0.0
    compute_cost_us: float = 0.0

    # Protocols
    cert_size: int = 3072
    tls_block_size: int = 1024
    noise_max_message: int = 65535
    noise_pattern: str = "XX"
    handshake_timeout_us: Optional[float] = None

    # Edge enclave
    memory_cap_sessions: Optional[int] = None

    # Workloads
    transfer_sizes: Tuple[int, ...] = DEFAULT_TRANSFER_SIZES
    page_objects: int = 50
    page_object_size: int = 20 * 1024
    page_connections: int = 6
    concurrency_levels: Tuple[int, ...] = (1, 8, 64)

    verbose: bool = False

    _ENV = {
        "SPX_SEED": ("seed", int),
        "SPX_RUNS": ("runs", int),
        "SPX_OUT_DIR": ("out_dir", str),
        "SPX_SPILL_DIR": ("spill_dir", str),
        "SPX_VERBOSE": ("verbose", parse_bool),
    }

    def __post_init__(self):
        """Apply environment overrides and validate."""
        for variable, (name, convert) in self._ENV.items():
            value = os.getenv(variable)
            if value:
                try:
                    setattr(self, name, convert(value))
                except ValueError as exc:
                    raise ConfigError(f"{variable}={value!r}: {exc}") from exc
        self.validate()

    def validate(self) -> None:
        if self.runs < 2:
            raise ConfigError(f"runs must be at least 2, got {self.runs}")
        for name in ("client_edge_us", "edge_server_us", "client_server_us", "jitter_us", "compute_cost_us"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 1 <= self.tls_block_size <= 16384:
            raise ConfigError(f"tls_block_size must be in 1..16384, got {self.tls_block_size}")
        if not 17 <= self.noise_max_message <= 65535:
            raise ConfigError(f"noise_max_message must be in 17..65535, got {self.noise_max_message}")
        if not self.transfer_sizes or any(size < 0 for size in self.transfer_sizes):
            raise ConfigError("transfer_sizes must be a non-empty list of non-negative sizes")
        if not self.concurrency_levels or any(n < 1 for n in self.concurrency_levels):
            raise ConfigError("concurrency_levels must be positive")
        if self.memory_cap_sessions is not None and self.memory_cap_sessions < 0:
            raise ConfigError("memory_cap_sessions must be non-negative")

    @classmethod
    def from_env(cls) -> "Config":
        """Create config from defaults plus environment variables."""
        return cls()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Config":
        """Load a ``key = value`` config file; environment variables still win.

        Raises:
            ConfigError: unreadable file, unknown key or bad value
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_mapping(parse_key_values(text, str(path)))

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> "Config":
        known = {f.name: f for f in fields(cls) if not f.name.startswith("_")}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _convert(key, known[key].type, raw)
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}


_CONVERTERS = {
    "seed": int,
    "runs": int,
    "cert_size": int,
    "tls_block_size": int,
    "noise_max_message": int,
    "page_objects": int,
    "page_object_size": int,
    "page_connections": int,
    "memory_cap_sessions": int,
    "handshake_timeout_us": float,
    "client_edge_us": float,
    "edge_server_us": float,
    "client_server_us": float,
    "jitter_us": float,
    "compute_cost_us": float,
    "transfer_sizes": parse_int_list,
    "concurrency_levels": parse_int_list,
    "verbose": parse_bool,
}


def _convert(key: str, annotation, raw: str):
    if raw.lower() in ("", "none") and "Optional" in str(annotation):
        return None
    convert = _CONVERTERS.get(key, str)
    try:
        return convert(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} = {raw!r}: {exc}") from exc

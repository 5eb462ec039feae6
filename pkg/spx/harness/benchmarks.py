"""Benchmarks: handshake time, file transfer, page loads, concurrency and CPU.

Every benchmark returns a pandas table with one row per configuration.
Repeated runs use seeds ``config.seed + run``, so a simulator run with a
fixed seed always produces the same table.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import Config
from ..exceptions import ConfigError, HandshakeFailure
from ..netsim import (
    EDGE,
    Mode,
    Protocol,
    ScenarioResult,
    ScenarioSpec,
    build_world,
    measure_overhead,
    run_loopback,
    run_world,
)
from .stats import relative_spread, summarize

logger = logging.getLogger(__name__)

ALL_MODES = (Mode.E2E, Mode.SPLIT, Mode.SPX)
CPU_ECHO_SIZE = 64 * 1024
# Largest accepted spread of per-handshake means across concurrency levels.
FLAT_TOLERANCE = 0.25
# SPX handshakes may cost at most this many Split handshakes.
SPLIT_BOUND = 3.0


class Runner(str, Enum):
    """SIM runs in virtual time; LOOPBACK runs over TCP on 127.0.0.1."""

    SIM = "sim"
    LOOPBACK = "loopback"


@dataclass
class Execution:
    result: ScenarioResult
    cpu_seconds: Dict[str, float] = field(default_factory=dict)
    wall_seconds: Optional[float] = None


def execute(
    spec: ScenarioSpec,
    runner: Runner = Runner.SIM,
    workload_for: Optional[Callable[[int], Tuple[int, ...]]] = None,
) -> Execution:
    """Build the scenario for ``spec`` and run it on ``runner``."""
    world = build_world(spec, workload_for=workload_for)
    if Runner(runner) is Runner.SIM:
        result = run_world(world)
        return Execution(result, dict(world.network.cpu_seconds))
    loop = run_loopback(list(world.network.endpoints.values()))
    loop.trace.meta.update(scenario=spec.label, seed=spec.seed, clients=spec.clients, runner=Runner.LOOPBACK.value)
    return Execution(ScenarioResult(world, loop.trace), loop.cpu_seconds, loop.wall_seconds)


def require_success(execution: Execution) -> ScenarioResult:
    """Raises HandshakeFailure naming the first failed client."""
    result = execution.result
    for outcome in result.client_outcomes:
        if not outcome.succeeded:
            raise HandshakeFailure(f"{result.spec.label} seed {result.spec.seed}: {outcome.endpoint} {outcome.status.value} ({outcome.reason})")
    return result


def _seeds(config: Config) -> List[int]:
    return [config.seed + run for run in range(config.runs)]


def _spec(config: Config, protocol: Protocol, mode: Mode, **overrides) -> ScenarioSpec:
    return ScenarioSpec.from_config(config, protocol=Protocol(protocol), mode=Mode(mode), **overrides)


def _label(protocol: Protocol, config: Config) -> str:
    protocol = Protocol(protocol)
    return protocol.value if protocol is Protocol.TLX else f"noixe-{config.noise_pattern.upper()}"


def bench_handshake(
    config: Config,
    protocol: Protocol = Protocol.TLX,
    modes: Sequence[Mode] = ALL_MODES,
    runner: Runner = Runner.SIM,
) -> pd.DataFrame:
    """Handshake time per mode over ``config.runs`` seeds.

    SPX rows carry the extra round trips and bytes on the edge-server link;
    E2E rows report zero for both; Split rows leave them empty.
    """
    rows = []
    for mode in modes:
        mode = Mode(mode)
        samples = []
        for seed in _seeds(config):
            result = require_success(execute(_spec(config, protocol, mode, seed=seed), runner))
            samples.extend(result.handshake_times_us)
        row = {"protocol": _label(protocol, config), "mode": mode.value, "runner": Runner(runner).value, "runs": config.runs}
        row.update(summarize(samples).to_dict("handshake_us_"))
        if mode is Mode.SPX:
            overhead = measure_overhead(_spec(config, protocol, mode))
            row.update(extra_rtts=overhead.extra_rtts, extra_bytes=overhead.extra_bytes)
        elif mode is Mode.E2E:
            row.update(extra_rtts=0, extra_bytes=0)
        else:
            row.update(extra_rtts=np.nan, extra_bytes=np.nan)
        logger.info(f"handshake {row['protocol']}/{mode.value}: {row['handshake_us_mean']:.1f} us")
        rows.append(row)
    return _against_split(pd.DataFrame(rows))


def _against_split(table: pd.DataFrame) -> pd.DataFrame:
    """Add each mode's mean handshake time relative to Split, and whether SPX stays in ``[1, SPLIT_BOUND]``."""
    split = table.loc[table["mode"] == Mode.SPLIT.value, "handshake_us_mean"]
    base = float(split.iloc[0]) if len(split) and split.iloc[0] > 0 else np.nan
    table["ratio_vs_split"] = table["handshake_us_mean"] / base
    table["within_bound"] = [
        bool(1.0 <= ratio <= SPLIT_BOUND) if mode == Mode.SPX.value and not np.isnan(ratio) else None
        for mode, ratio in zip(table["mode"], table["ratio_vs_split"])
    ]
    return table


def bench_transfer(
    config: Config,
    protocol: Protocol = Protocol.TLX,
    modes: Sequence[Mode] = ALL_MODES,
    sizes: Optional[Sequence[int]] = None,
    runner: Runner = Runner.SIM,
) -> pd.DataFrame:
    """
    Echo one file of each size through a fresh session and time the transfer.

    Args:
        config: benchmark configuration
        protocol: protocol family
        modes: deployment modes to compare
        sizes: file sizes in bytes (defaults to ``config.transfer_sizes``)
        runner: simulator or loopback

    Returns:
        One row per (mode, size) with transfer time statistics, an ``ok``
        column that is true when every echo came back bit-exact, and the SPX
        overhead relative to Split for the same size.

    Raises:
        ConfigError: no sizes given
    """
    sizes = tuple(config.transfer_sizes if sizes is None else sizes)
    if not sizes:
        raise ConfigError("bench_transfer needs at least one size")
    rows = []
    for mode in modes:
        mode = Mode(mode)
        for size in sizes:
            samples = []
            ok = True
            for seed in _seeds(config):
                result = require_success(execute(_spec(config, protocol, mode, seed=seed, workload=(size,)), runner))
                outcome = result.client_outcomes[0]
                ok = ok and bool(outcome.echo_ok) and outcome.bytes_transferred == size
                samples.append(outcome.completed_us - outcome.handshake_us)
            row = {"protocol": _label(protocol, config), "mode": mode.value, "size": size, "ok": ok}
            row.update(summarize(samples).to_dict("transfer_us_"))
            rows.append(row)
        logger.info(f"transfer {_label(protocol, config)}/{mode.value}: {len(sizes)} sizes done")
    table = pd.DataFrame(rows)
    split = table[table["mode"] == Mode.SPLIT.value].set_index("size")["transfer_us_mean"]
    table["overhead_vs_split"] = [
        row.transfer_us_mean / split[row.size] - 1.0 if row.mode == Mode.SPX.value and row.size in split.index else np.nan
        for row in table.itertuples()
    ]
    return table


def page_assignment(objects: int, object_size: int, connections: int) -> Callable[[int], Tuple[int, ...]]:
    """Spread ``objects`` over ``connections`` clients round-robin; client ``i`` is 1-based."""

    def sizes(i: int) -> Tuple[int, ...]:
        return tuple(object_size for j in range(objects) if j % connections == i - 1)

    return sizes


def bench_pageload(
    config: Config,
    protocol: Protocol = Protocol.TLX,
    modes: Sequence[Mode] = ALL_MODES,
    runner: Runner = Runner.SIM,
) -> pd.DataFrame:
    """Synthetic page: ``page_objects`` objects fetched over ``page_connections``
    parallel connections. Page time is the slowest connection's completion."""
    connections = min(config.page_connections, config.page_objects)
    assign = page_assignment(config.page_objects, config.page_object_size, connections)
    rows = []
    for mode in modes:
        mode = Mode(mode)
        samples = []
        for seed in _seeds(config):
            spec = _spec(config, protocol, mode, seed=seed, clients=connections)
            result = require_success(execute(spec, runner, workload_for=assign))
            if not all(o.echo_ok for o in result.client_outcomes):
                raise HandshakeFailure(f"{spec.label} seed {seed}: page object corrupted")
            samples.append(max(result.completion_times_us))
        row = {
            "protocol": _label(protocol, config),
            "mode": mode.value,
            "objects": config.page_objects,
            "object_size": config.page_object_size,
            "connections": connections,
        }
        row.update(summarize(samples).to_dict("page_us_"))
        rows.append(row)
    return pd.DataFrame(rows)


def bench_concurrency(
    config: Config,
    protocol: Protocol = Protocol.TLX,
    mode: Mode = Mode.SPX,
    levels: Optional[Sequence[int]] = None,
    runner: Runner = Runner.SIM,
) -> pd.DataFrame:
    """Per-handshake time with N simultaneous connections through one edge.

    ``handshake_us_*`` is each client's own latency; ``amortized_us_*`` is the
    time from the first client start to the last finished handshake divided
    by N. The loopback runner executes every handler on one event loop, so
    concurrent handshakes queue behind each other and the amortized time is
    the per-handshake cost. The simulator gives every endpoint unlimited
    parallelism, so there client latency is. ``flat_on`` names the column
    checked; ``flat`` holds whether its means stay within ``FLAT_TOLERANCE``
    of the smallest.
    """
    levels = tuple(config.concurrency_levels if levels is None else levels)
    if not levels or min(levels) < 1:
        raise ConfigError(f"concurrency levels must be positive, got {levels}")
    runner = Runner(runner)
    rows = []
    for n in levels:
        latencies, amortized = [], []
        for seed in _seeds(config):
            result = require_success(execute(_spec(config, protocol, mode, seed=seed, clients=n, stagger_us=0.0), runner))
            latencies.extend(result.handshake_times_us)
            amortized.append(result.batch_handshake_us / n)
        row = {"protocol": _label(protocol, config), "mode": Mode(mode).value, "runner": runner.value, "connections": n}
        row.update(summarize(latencies).to_dict("handshake_us_"))
        row.update(summarize(amortized).to_dict("amortized_us_"))
        rows.append(row)
    table = pd.DataFrame(rows)
    checked = "amortized_us_mean" if runner is Runner.LOOPBACK else "handshake_us_mean"
    spread = relative_spread(table[checked])
    table["flat_on"] = checked
    table["spread"] = spread
    table["flat"] = spread < FLAT_TOLERANCE
    if spread >= FLAT_TOLERANCE:
        logger.warning(f"{checked} varies {spread:.0%} across {levels} connections")
    return table


def bench_cpu(
    config: Config,
    protocol: Protocol = Protocol.TLX,
    modes: Sequence[Mode] = (Mode.SPLIT, Mode.SPX),
    runner: Runner = Runner.SIM,
) -> pd.DataFrame:
    """Process CPU time spent inside the edge's handlers for a handshake plus a 64 KiB echo."""
    rows = []
    for mode in modes:
        mode = Mode(mode)
        if mode is Mode.E2E:
            continue
        samples = []
        for seed in _seeds(config):
            execution = execute(_spec(config, protocol, mode, seed=seed, workload=(CPU_ECHO_SIZE,)), runner)
            require_success(execution)
            samples.append(execution.cpu_seconds.get(EDGE, 0.0) * 1e3)
        row = {"protocol": _label(protocol, config), "mode": mode.value}
        row.update(summarize(samples).to_dict("edge_cpu_ms_"))
        rows.append(row)
    table = pd.DataFrame(rows)
    split = table.loc[table["mode"] == Mode.SPLIT.value, "edge_cpu_ms_mean"]
    base = float(split.iloc[0]) if len(split) else np.nan
    table["ratio_vs_split"] = table["edge_cpu_ms_mean"] / base if base else np.nan
    return table


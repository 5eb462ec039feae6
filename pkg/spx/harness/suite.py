"""Run a named benchmark and record its table and chart."""

import logging
from typing import Callable, Dict, Optional

import pandas as pd

from ..config import Config
from ..exceptions import ConfigError
from ..experiment_tracker import ExperimentTracker
from ..netsim import Protocol
from . import plots
from .benchmarks import Runner, bench_concurrency, bench_cpu, bench_handshake, bench_pageload, bench_transfer
from .report import bench_overhead, overhead_markdown, to_markdown

logger = logging.getLogger(__name__)


def _handshake(config, protocol, runner):
    return bench_handshake(config, protocol, runner=runner)


def _transfer(config, protocol, runner):
    return bench_transfer(config, protocol, runner=runner)


def _pageload(config, protocol, runner):
    return bench_pageload(config, protocol, runner=runner)


def _concurrency(config, protocol, runner):
    return bench_concurrency(config, protocol, runner=runner)


def _cpu(config, protocol, runner):
    return bench_cpu(config, protocol, runner=runner)


def _overhead(config, protocol, runner):
    return bench_overhead(config)


BENCHMARKS: Dict[str, Callable[[Config, Protocol, Runner], pd.DataFrame]] = {
    "handshake": _handshake,
    "transfer": _transfer,
    "pageload": _pageload,
    "concurrency": _concurrency,
    "cpu": _cpu,
    "overhead": _overhead,
}


def chart(kind: str, table: pd.DataFrame) -> Optional[bytes]:
    """PNG chart for a benchmark table, or None for the overhead table."""
    if kind == "handshake":
        return plots.bar_chart(table, "mode", "handshake_us_mean", error="handshake_us_std",
                               title="Handshake time", ylabel="microseconds")
    if kind == "transfer":
        return plots.line_chart(table, "size", "transfer_us_mean", group="mode", error="transfer_us_std",
                                title="File transfer", xlabel="bytes", ylabel="microseconds", logx=True)
    if kind == "pageload":
        return plots.bar_chart(table, "mode", "page_us_mean", error="page_us_std",
                               title="Page load", ylabel="microseconds")
    if kind == "concurrency":
        checked = table["flat_on"].iloc[0]
        return plots.line_chart(table, "connections", checked, group="mode",
                                error=checked.replace("_mean", "_std"), title="Concurrent handshakes",
                                xlabel="connections", ylabel="microseconds per handshake", logx=True)
    if kind == "cpu":
        return plots.bar_chart(table, "mode", "edge_cpu_ms_mean", error="edge_cpu_ms_std",
                               title="Edge CPU time", ylabel="milliseconds")
    return None


def render_markdown(kind: str, table: pd.DataFrame) -> str:
    return overhead_markdown(table) if kind == "overhead" else to_markdown(table)


def run_benchmark(
    kind: str,
    config: Config,
    protocol: Protocol = Protocol.TLX,
    runner: Runner = Runner.SIM,
    tracker: Optional[ExperimentTracker] = None,
) -> pd.DataFrame:
    """
    Run one benchmark and, when a tracker is given, save its outputs.

    Args:
        kind: one of ``BENCHMARKS``
        config: benchmark configuration
        protocol: protocol family (ignored by ``overhead``, which covers all)
        runner: simulator or loopback
        tracker: records ``<kind>.csv``, ``<kind>.md`` and ``<kind>.png``

    Returns:
        The result table

    Raises:
        ConfigError: unknown benchmark name
    """
    try:
        bench = BENCHMARKS[kind]
    except KeyError:
        raise ConfigError(f"unknown benchmark {kind!r}; choose from {sorted(BENCHMARKS)}") from None

    protocol = Protocol(protocol)
    runner = Runner(runner)
    if tracker is not None:
        tracker.start_experiment(
            f"{kind}_{protocol.value}_{runner.value}",
            metadata={"benchmark": kind, "protocol": protocol.value, "runner": runner.value, "config": config.to_dict()},
        )

    logger.info(f"running {kind} benchmark ({protocol.value}, {runner.value}, {config.runs} runs)")
    table = bench(config, protocol, runner)

    if tracker is not None:
        tracker.save_table(table, kind)
        tracker.save_output(render_markdown(kind, table), f"{kind}.md")
        image = chart(kind, table)
        if image is not None:
            tracker.save_plot(image, f"{kind}.png")
        tracker.finish_experiment()
    return table

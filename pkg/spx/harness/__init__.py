"""Benchmark harness: timing, transfer, page loads, concurrency, CPU and overhead tables."""

from .benchmarks import (
    ALL_MODES,
    CPU_ECHO_SIZE,
    FLAT_TOLERANCE,
    Execution,
    Runner,
    bench_concurrency,
    bench_cpu,
    bench_handshake,
    bench_pageload,
    bench_transfer,
    execute,
    page_assignment,
    require_success,
)
from .report import REPORTED, TLX_EXTRA_RTTS, bench_overhead, overhead_markdown, to_markdown
from .stats import Summary, relative_spread, summarize
from .suite import BENCHMARKS, chart, render_markdown, run_benchmark

__all__ = [
    "ALL_MODES",
    "CPU_ECHO_SIZE",
    "FLAT_TOLERANCE",
    "Execution",
    "Runner",
    "bench_concurrency",
    "bench_cpu",
    "bench_handshake",
    "bench_pageload",
    "bench_transfer",
    "execute",
    "page_assignment",
    "require_success",
    "REPORTED",
    "TLX_EXTRA_RTTS",
    "bench_overhead",
    "overhead_markdown",
    "to_markdown",
    "Summary",
    "relative_spread",
    "summarize",
    "BENCHMARKS",
    "chart",
    "render_markdown",
    "run_benchmark",
]

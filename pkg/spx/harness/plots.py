"""PNG charts for benchmark tables."""

import io
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", bbox_inches="tight", dpi=150)
    plt.close(fig)
    return buf.getvalue()


def bar_chart(
    table: pd.DataFrame,
    category: str,
    value: str,
    error: Optional[str] = None,
    group: Optional[str] = None,
    title: str = "",
    ylabel: str = "",
) -> bytes:
    """Grouped bar chart of ``value`` per ``category`` (one bar colour per ``group``)."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    categories = list(dict.fromkeys(table[category]))
    groups = list(dict.fromkeys(table[group])) if group else [None]
    width = 0.8 / len(groups)
    x = np.arange(len(categories))
    for i, name in enumerate(groups):
        rows = table if name is None else table[table[group] == name]
        rows = rows.set_index(category).reindex(categories)
        errors = rows[error].to_numpy() if error else None
        ax.bar(x + i * width, rows[value].to_numpy(), width, yerr=errors, capsize=3, label=name)
    ax.set_xticks(x + width * (len(groups) - 1) / 2)
    ax.set_xticklabels([str(c) for c in categories])
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3, axis="y")
    if group:
        ax.legend()
    return _png(fig)


def line_chart(
    table: pd.DataFrame,
    x: str,
    y: str,
    group: str,
    error: Optional[str] = None,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
) -> bytes:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, rows in table.groupby(group, sort=False):
        rows = rows.sort_values(x)
        ax.errorbar(
            rows[x],
            rows[y],
            yerr=rows[error] if error else None,
            marker="o",
            linewidth=2,
            capsize=3,
            label=str(name),
        )
    if logx:
        ax.set_xscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend()
    return _png(fig)

"""Summary statistics for repeated benchmark runs."""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy import stats

CONFIDENCE = 0.95


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    std: float
    ci_low: float
    ci_high: float

    def to_dict(self, prefix: str = "") -> Dict[str, float]:
        return {
            f"{prefix}mean": self.mean,
            f"{prefix}std": self.std,
            f"{prefix}ci95_low": self.ci_low,
            f"{prefix}ci95_high": self.ci_high,
        }


def summarize(samples: Sequence[float], confidence: float = CONFIDENCE) -> Summary:
    """Mean, sample standard deviation and a Student-t confidence interval.

    Raises:
        ValueError: no samples
    """
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValueError("cannot summarize an empty sample")
    mean = float(values.mean())
    if values.size < 2:
        return Summary(1, mean, 0.0, mean, mean)
    std = float(values.std(ddof=1))
    sem = float(stats.sem(values))
    if sem == 0.0:
        low = high = mean
    else:
        low, high = stats.t.interval(confidence, values.size - 1, loc=mean, scale=sem)
    return Summary(int(values.size), mean, std, float(low), float(high))


def relative_spread(means: Sequence[float]) -> float:
    """(max - min) / min over the given means; 0 for a single value."""
    values = np.asarray(means, dtype=float)
    if values.size < 2 or values.min() <= 0:
        return 0.0
    return float((values.max() - values.min()) / values.min())

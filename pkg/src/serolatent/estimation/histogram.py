"""Equal-width histograms of antibody measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def sturges_bins(n):
    """Sturges' bin count, ceil(log2(n) + 1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return int(math.ceil(math.log2(n) + 1.0))


@dataclass(frozen=True)
class HistogramSummary:
    breaks: np.ndarray
    counts: np.ndarray
    n: int

    @property
    def mids(self):
        return 0.5 * (self.breaks[:-1] + self.breaks[1:])

    @property
    def widths(self):
        return np.diff(self.breaks)

    @property
    def density(self):
        return self.counts / (self.n * self.widths)

    @property
    def n_bins(self):
        return self.counts.shape[0]


def build_histogram(data, n_bins=None):
    """Histogram with ``n_bins`` equal-width bins spanning [min, max].

    Bins are half-open except the last, which also holds the maximum.
    ``n_bins`` defaults to Sturges' rule.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("data must be nonempty")
    if n_bins is None:
        n_bins = sturges_bins(data.size)
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    lo, hi = float(data.min()), float(data.max())
    if not lo < hi:
        raise ValueError("degenerate data: all values equal, histogram undefined")
    breaks = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(data, bins=breaks)
    return HistogramSummary(breaks, counts.astype(np.int64), int(data.size))


def histogram_on(breaks, data, clamp=True):
    """Counts of ``data`` on fixed ``breaks``.

    With ``clamp`` values below the first or above the last break land in the
    extreme bins.
    """
    data = np.asarray(data, dtype=float)
    if clamp:
        data = np.clip(data, breaks[0], breaks[-1])
    counts, _ = np.histogram(data, bins=breaks)
    return counts

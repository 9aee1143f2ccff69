"""Descriptive statistics: window-size distribution, Zipf and Heaps curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .model import EmptyStream, Lexicon, flat_tags, window_sizes
from .tables import write_tsv


class InsufficientPoints(ValueError):
    pass


@dataclass
class Histogram:
    """Counts over contiguous bins ``[edges[i], edges[i+1])``.

    ``binning`` is ``"integer"`` (one bin per integer value), ``"linear"`` or
    ``"log"`` (geometric edges with the given ``base``).
    """

    binning: str
    edges: np.ndarray
    counts: np.ndarray
    total: int
    base: float | None = None

    @property
    def fractions(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.total

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def rows(self):
        for lo, hi, c, f in zip(self.edges[:-1], self.edges[1:], self.counts, self.fractions):
            yield float(lo), float(hi), int(c), float(f)


@dataclass
class WDistribution:
    histogram: Histogram
    median: float
    mean: float

    def pmf(self) -> dict[int, float]:
        return {int(lo): f for lo, _, c, f in self.histogram.rows() if c}

    def summary_line(self) -> str:
        return f"w: median={self.median:g} mean={self.mean:.2f}"


def w_distribution(stream) -> WDistribution:
    """Exact per-integer PMF of window sizes plus their median and mean."""
    w = window_sizes(stream)
    if len(w) == 0:
        raise EmptyStream()
    counts = np.bincount(w)[1:]
    edges = np.arange(1, len(counts) + 2, dtype=float)
    hist = Histogram("integer", edges, counts, int(len(w)))
    return WDistribution(hist, float(np.median(w)), float(w.mean()))


def log_binned(dist: WDistribution, base: float = 2.0) -> tuple[Histogram, np.ndarray]:
    """Geometric-bin version of the window PMF for plotting; returns it with per-unit-width densities."""
    w_max = dist.histogram.edges[-2]
    n_bins = max(1, math.ceil(math.log(w_max + 1, base) - 1e-12))
    edges = base ** np.arange(n_bins + 1, dtype=float)
    values = dist.histogram.edges[:-1]
    idx = np.minimum(np.floor(np.log(values) / math.log(base) + 1e-12).astype(int), n_bins - 1)
    counts = np.bincount(idx, weights=dist.histogram.counts, minlength=n_bins).astype(np.int64)
    hist = Histogram("log", edges, counts, dist.histogram.total, base=base)
    # integers per bin [b^k, b^(k+1)) is the proper width for a discrete variable
    n_ints = np.ceil(edges[1:]) - np.ceil(edges[:-1])
    density = np.divide(hist.fractions, n_ints, out=np.zeros(n_bins), where=n_ints > 0)
    return hist, density


def rank_frequency(lexicon: Lexicon) -> list[tuple[int, int]]:
    """Counts in descending order with 1-based ranks; ties go to the lower tag id."""
    counts = np.asarray(lexicon.counts, dtype=np.int64)
    if len(counts) == 0:
        raise EmptyStream("empty vocabulary")
    order = np.lexsort((np.arange(len(counts)), -counts))
    return [(r, int(c)) for r, c in enumerate(counts[order].tolist(), start=1)]


@dataclass
class GrowthCurve:
    n: np.ndarray
    v: np.ndarray

    def points(self) -> list[tuple[int, int]]:
        return list(zip(self.n.tolist(), self.v.tolist()))


def heaps_curve(stream) -> GrowthCurve:
    """Vocabulary size V(N) over the flattened annotation sequence at N = 1, 2, 4, ... and the final N."""
    tags = flat_tags(stream)
    if len(tags) == 0:
        raise EmptyStream()
    first = np.zeros(len(tags), dtype=bool)
    first[np.unique(tags, return_index=True)[1]] = True
    vocab = np.cumsum(first)
    total = len(tags)
    checkpoints = [1 << k for k in range(total.bit_length()) if (1 << k) <= total]
    if checkpoints[-1] != total:
        checkpoints.append(total)
    n = np.asarray(checkpoints, dtype=np.int64)
    return GrowthCurve(n, vocab[n - 1])


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


def loglog_slope(points: Iterable[Sequence[float]], x_range: tuple[float, float] | None = None) -> LogLogFit:
    """Ordinary least squares of log10(y) on log10(x).

    Points outside ``x_range`` (inclusive) or with a non-positive coordinate
    are ignored; fewer than three remaining points raise InsufficientPoints.
    """
    arr = np.asarray(list(points), dtype=float).reshape(-1, 2)
    x, y = arr[:, 0], arr[:, 1]
    keep = (x > 0) & (y > 0)
    if x_range is not None:
        keep &= (x >= x_range[0]) & (x <= x_range[1])
    x, y = np.log10(x[keep]), np.log10(y[keep])
    if len(x) < 3:
        raise InsufficientPoints(f"need >= 3 usable points, got {len(x)}")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise InsufficientPoints("all x values coincide")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return LogLogFit(slope, intercept, r2, int(len(x)))


# -- TSV emitters ------------------------------------------------------------


def write_w_distribution(dist: WDistribution, fp: IO[str]) -> None:
    write_tsv(fp, ("w", "count", "probability"),
              ((int(lo), c, f) for lo, _, c, f in dist.histogram.rows()))


def write_log_binned(hist: Histogram, density: np.ndarray, fp: IO[str]) -> None:
    write_tsv(fp, ("lo", "hi", "count", "fraction", "density"),
              ((lo, hi, c, f, float(d)) for (lo, hi, c, f), d in zip(hist.rows(), density)))


def write_rank_frequency(rows: Sequence[tuple[int, int]], fp: IO[str]) -> None:
    write_tsv(fp, ("rank", "count"), rows)


def write_heaps(curve: GrowthCurve, fp: IO[str]) -> None:
    write_tsv(fp, ("n", "vocabulary"), curve.points())

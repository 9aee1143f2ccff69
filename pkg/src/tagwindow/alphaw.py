"""Per-entry vocabulary innovation and its dependence on window size.

Every entry gets ``alpha_i = novel_i / w_i``, where ``novel_i`` counts the
tags making their first appearance anywhere in the stream. Entries are split
into fixed-length periods; inside each period window sizes are mapped onto 20
log-scale bins relative to the period's largest window, alpha is averaged per
bin, and the trend of the bin means is summarised by a Spearman rank
correlation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy import stats as sps

from .model import Entry, TagWindowError, entries_of, flat_tags, timestamps, window_sizes
from .tables import write_tsv

N_BINS = 20
SECONDS_PER_DAY = 86_400

POSITIVE, NEGATIVE, NONE, INSUFFICIENT = "positive", "negative", "none", "insufficient"


class DegenerateRange(ValueError):
    """All windows have the same size, so log binning is undefined."""


class NoRetainedBins(TagWindowError):
    pass


def bin_index(w: int, w_max: int, n_bins: int = N_BINS) -> int:
    """floor(n_bins * ln(w) / ln(w_max)), with the top value n_bins folded into the last bin.

    Evaluated exactly: the result is the largest b with ``w_max**b <= w**n_bins``.
    """
    if w_max <= 1:
        raise DegenerateRange(f"w_max={w_max}: cannot log-bin a single window size")
    if not 1 <= w <= w_max:
        raise ValueError(f"window size {w} outside [1, {w_max}]")
    b = int(math.floor(n_bins * math.log(w) / math.log(w_max)))
    target = w ** n_bins
    while b > 0 and w_max ** b > target:
        b -= 1
    while w_max ** (b + 1) <= target:
        b += 1
    return min(b, n_bins - 1)


def bin_indices(w: np.ndarray, w_max: int, n_bins: int = N_BINS) -> np.ndarray:
    values, inverse = np.unique(w, return_inverse=True)
    lookup = np.array([bin_index(int(v), w_max, n_bins) for v in values], dtype=np.int64)
    return lookup[inverse]


@dataclass(frozen=True)
class PeriodSpec:
    length_days: float = 91
    origin: int | None = None  # defaults to the first entry's timestamp

    def assign(self, ts: np.ndarray) -> np.ndarray:
        if len(ts) == 0:
            return np.zeros(0, dtype=np.int64)
        origin = int(ts[0]) if self.origin is None else self.origin
        if int(ts.min()) < origin:
            raise ValueError("period origin lies after the first entry")
        length = self.length_days * SECONDS_PER_DAY
        return ((ts - origin) // length).astype(np.int64)


@dataclass(frozen=True)
class NoveltyAnnotatedEntry:
    entry: Entry
    novel_count: int
    alpha: float


@dataclass
class Novelty:
    """Column-wise novelty annotation of a stream (one row per entry)."""

    w: np.ndarray
    novel_count: np.ndarray
    alpha: np.ndarray
    timestamp: np.ndarray
    entries: Sequence[Entry] | None = None

    def __len__(self) -> int:
        return len(self.w)

    def __getitem__(self, i: int) -> NoveltyAnnotatedEntry:
        entry = self.entries[i] if self.entries is not None else None
        return NoveltyAnnotatedEntry(entry, int(self.novel_count[i]), float(self.alpha[i]))

    def select(self, mask: np.ndarray) -> "Novelty":
        return Novelty(self.w[mask], self.novel_count[mask], self.alpha[mask], self.timestamp[mask])


def annotate_novelty(stream, binary: bool = False) -> Novelty:
    """Count, per entry, the tags never seen earlier in the stream.

    With ``binary=True`` alpha_i is 1 for entries holding any new tag and 0
    otherwise, instead of the novel fraction.
    """
    entries = entries_of(stream)
    w = window_sizes(entries)
    ts = timestamps(entries)
    if len(w) == 0:
        z = np.zeros(0)
        return Novelty(w, z.astype(np.int64), z, ts, entries)
    tags = flat_tags(entries, w)
    first = np.zeros(len(tags), dtype=np.int64)
    first[np.unique(tags, return_index=True)[1]] = 1
    offsets = np.concatenate(([0], np.cumsum(w)[:-1]))
    novel = np.add.reduceat(first, offsets)
    alpha = (novel > 0).astype(float) if binary else novel / w
    return Novelty(w, novel, alpha, ts, entries)


@dataclass(frozen=True)
class AlphaWConfig:
    min_bin_entries: int = 100
    w_cap: int | None = None
    n_bins: int = N_BINS
    rho_threshold: float = 0.2
    min_bins: int = 5
    significance: float = 0.05  # 1.0 disables the p-value gate
    binary: bool = False


@dataclass(frozen=True)
class BinStat:
    bin: int
    mean_w: float
    mean_alpha: float
    count: int


@dataclass
class BinnedAlphaReport:
    period_index: int
    bins: list[BinStat]
    all_bins: list[BinStat] = field(default_factory=list)
    spearman_rho: float = math.nan
    p_value: float = math.nan
    classification: str = INSUFFICIENT
    w_max: int = 0
    entry_count: int = 0
    mean_alpha: float = math.nan
    degenerate: bool = False

    def summary(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else x

        return {
            "period": self.period_index,
            "entries": self.entry_count,
            "w_max": self.w_max,
            "mean_alpha": num(self.mean_alpha),
            "retained_bins": len(self.bins),
            "spearman_rho": num(self.spearman_rho),
            "p_value": num(self.p_value),
            "classification": self.classification,
            "degenerate": self.degenerate,
        }


def classify(rho: float, p_value: float, n_points: int, config: AlphaWConfig = AlphaWConfig()) -> str:
    if n_points < config.min_bins:
        return INSUFFICIENT
    if not math.isfinite(rho):
        return NONE
    significant = config.significance >= 1.0 or (math.isfinite(p_value) and p_value <= config.significance)
    if rho >= config.rho_threshold and significant:
        return POSITIVE
    if rho <= -config.rho_threshold and significant:
        return NEGATIVE
    return NONE


def _bin_stats(bins: np.ndarray, w: np.ndarray, alpha: np.ndarray, n_bins: int) -> list[BinStat]:
    count = np.bincount(bins, minlength=n_bins)
    sum_w = np.bincount(bins, weights=w, minlength=n_bins)
    sum_a = np.bincount(bins, weights=alpha, minlength=n_bins)
    return [
        BinStat(b, float(sum_w[b] / count[b]), float(sum_a[b] / count[b]), int(count[b]))
        for b in range(n_bins) if count[b]
    ]


def binned_alpha(novelty: Novelty, config: AlphaWConfig = AlphaWConfig(), period_index: int = 0,
                 *, allow_empty: bool = False) -> BinnedAlphaReport:
    """Bin one period's entries by window size and average alpha per bin.

    Bins with no more than ``config.min_bin_entries`` entries are dropped
    before the correlation. Raises NoRetainedBins when nothing survives,
    unless ``allow_empty`` is set.
    """
    if config.w_cap is not None:
        novelty = novelty.select(novelty.w <= config.w_cap)
    w, alpha = novelty.w, novelty.alpha
    report = BinnedAlphaReport(period_index, [], entry_count=int(len(w)))
    if len(w) == 0:
        if allow_empty:
            return report
        raise NoRetainedBins(f"period {period_index}: no entries")
    w_max = int(w.max())
    report.w_max = w_max
    report.mean_alpha = float(alpha.mean())
    if int(w.min()) == w_max:
        # a single window size leaves nothing to correlate; keep it as one bin
        bins = np.zeros(len(w), dtype=np.int64)
        report.degenerate = True
    else:
        bins = bin_indices(w, w_max, config.n_bins)
    report.all_bins = _bin_stats(bins, w.astype(float), alpha, config.n_bins)
    report.bins = [b for b in report.all_bins if b.count > config.min_bin_entries]
    if not report.bins and not allow_empty:
        raise NoRetainedBins(f"period {period_index}: no bin has more than {config.min_bin_entries} entries")
    if not report.degenerate and len(report.bins) >= 2:
        xs = [b.mean_w for b in report.bins]
        ys = [b.mean_alpha for b in report.bins]
        if np.ptp(ys) > 0:
            res = sps.spearmanr(xs, ys)
            report.spearman_rho = float(res.statistic)
            report.p_value = float(res.pvalue)
    n_points = 0 if report.degenerate else len(report.bins)
    report.classification = classify(report.spearman_rho, report.p_value, n_points, config)
    return report


def alpha_w_analysis(stream, period: PeriodSpec = PeriodSpec(),
                     config: AlphaWConfig = AlphaWConfig()) -> list[BinnedAlphaReport]:
    """One report per non-empty period, in chronological order.

    Novelty is judged against everything seen earlier, including previous
    periods. Periods with entries but no retained bin yield a report with an
    empty ``bins`` list and classification ``insufficient``.
    """
    novelty = stream if isinstance(stream, Novelty) else annotate_novelty(stream, binary=config.binary)
    if len(novelty) == 0:
        return []
    pid = period.assign(novelty.timestamp)
    reports = []
    for p in np.unique(pid).tolist():
        reports.append(binned_alpha(novelty.select(pid == p), config, p, allow_empty=True))
    return reports


def summarize(reports: Sequence[BinnedAlphaReport], config: AlphaWConfig = AlphaWConfig(),
              period: PeriodSpec = PeriodSpec(), burn_in: bool = False) -> dict:
    """Classification summary across periods; ``burn_in`` leaves the first period out of the tally."""
    counted = list(reports[1:] if burn_in else reports)
    tally = {k: 0 for k in (POSITIVE, NEGATIVE, NONE, INSUFFICIENT)}
    for r in counted:
        tally[r.classification] += 1
    decided = {k: v for k, v in tally.items() if k != INSUFFICIENT and v}
    overall = max(decided, key=lambda k: (decided[k], k)) if decided else INSUFFICIENT
    return {
        "periods": [r.summary() for r in reports],
        "tally": tally,
        "overall": overall,
        "burn_in": burn_in,
        "settings": {
            **asdict(config),
            "period_days": period.length_days,
            "w_max_scope": "per-period, after w_cap",
            "alpha_definition": "binary" if config.binary else "novel_fraction",
        },
    }


def write_alpha_w_tsv(reports: Sequence[BinnedAlphaReport], fp: IO[str]) -> None:
    write_tsv(fp, ("period", "bin", "mean_w", "mean_alpha", "count"),
              ((r.period_index, b.bin, b.mean_w, b.mean_alpha, b.count) for r in reports for b in r.bins))


def write_alpha_w_summary(summary: dict, fp: IO[str]) -> None:
    json.dump(summary, fp, sort_keys=True, indent=2)
    fp.write("\n")

import io
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tagwindow.alphaw import (
    INSUFFICIENT,
    NEGATIVE,
    NONE,
    POSITIVE,
    AlphaWConfig,
    DegenerateRange,
    NoRetainedBins,
    Novelty,
    PeriodSpec,
    alpha_w_analysis,
    annotate_novelty,
    bin_index,
    binned_alpha,
    classify,
    summarize,
    write_alpha_w_tsv,
)
from tagwindow.generator import (
    ConstantAlpha,
    GeneratorConfig,
    PowerLawWindow,
    TimeDecay,
    generate_stream,
)
from tagwindow.tables import read_tsv

from conftest import build_stream, random_windows

DAY = 86_400


def brute_force_alpha(windows):
    seen, out = set(), []
    for window in windows:
        novel = sum(1 for t in window if t not in seen)
        seen.update(window)
        out.append(novel / len(window))
    return out


def novelty_from(w, alpha, ts=None):
    w = np.asarray(w, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=float)
    ts = np.zeros(len(w), dtype=np.int64) if ts is None else np.asarray(ts, dtype=np.int64)
    return Novelty(w, np.rint(alpha * w).astype(np.int64), alpha, ts)


def test_annotate_hand_trace():
    nov = annotate_novelty(build_stream([["A", "B"], ["A", "C"]]))
    assert nov.alpha.tolist() == [1.0, 0.5]
    assert nov.novel_count.tolist() == [2, 1]
    assert nov[1].novel_count == 1 and nov[1].entry.w == 2


def test_annotate_repeat_only_seen():
    nov = annotate_novelty(build_stream([["A", "B"], ["B", "A"], ["A"]]))
    assert nov.alpha.tolist() == [1.0, 0.0, 0.0]


def test_annotate_binary_variant():
    nov = annotate_novelty(build_stream([["A", "B"], ["A", "C"], ["C"]]), binary=True)
    assert nov.alpha.tolist() == [1.0, 1.0, 0.0]


@given(st.integers(0, 10_000))
def test_annotate_matches_set_oracle(seed):
    windows = random_windows(random.Random(seed), 60, 25, 5)
    nov = annotate_novelty(build_stream(windows))
    assert nov.alpha.tolist() == brute_force_alpha(windows)
    assert int(nov.novel_count.sum()) == len({t for w in windows for t in w})
    assert np.all((0 <= nov.novel_count) & (nov.novel_count <= nov.w))


def exact_bin(w, w_max, n_bins=20):
    # exact rational search: largest b with w_max**b <= w**n_bins, without floating point
    b = 0
    while b + 1 <= n_bins and Fraction(w_max) ** (b + 1) <= Fraction(w) ** n_bins:
        b += 1
    return min(b, n_bins - 1)


def test_bin_index_examples():
    assert bin_index(1, 2) == 0
    assert bin_index(1, 500) == 0
    assert bin_index(64, 64) == 19
    assert bin_index(8, 64) == 10
    assert bin_index(2, 4) == 10
    with pytest.raises(DegenerateRange):
        bin_index(1, 1)


@given(st.integers(2, 3000), st.data())
def test_bin_index_exact_and_monotone(w_max, data):
    w = data.draw(st.integers(1, w_max))
    assert bin_index(w, w_max) == exact_bin(w, w_max)
    if w < w_max:
        assert bin_index(w, w_max) <= bin_index(w + 1, w_max)
    assert 0 <= bin_index(w, w_max) <= 19


def test_bin_index_matches_float_formula_off_boundaries():
    for w_max in (30, 64, 1000):
        for w in range(1, w_max):
            raw = 20 * math.log(w) / math.log(w_max)
            if abs(raw - round(raw)) > 1e-9:
                assert bin_index(w, w_max) == math.floor(raw)


@given(st.integers(0, 10_000))
def test_bin_means_reproduce_period_mean(seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 40, size=500)
    alpha = rng.random(500)
    report = binned_alpha(novelty_from(w, alpha), AlphaWConfig(min_bin_entries=100_000), allow_empty=True)
    total = sum(b.mean_alpha * b.count for b in report.all_bins)
    assert total / sum(b.count for b in report.all_bins) == pytest.approx(alpha.mean(), abs=1e-12)
    assert report.bins == []


def test_single_bin_is_insufficient():
    report = binned_alpha(novelty_from([2] * 150 + [3] * 3, [0.5] * 153))
    assert len(report.bins) == 1
    assert report.classification == INSUFFICIENT


def test_degenerate_all_same_w():
    report = binned_alpha(novelty_from([4] * 300, [0.25] * 300))
    assert report.degenerate
    assert len(report.bins) == 1 and report.bins[0].count == 300
    assert report.classification == INSUFFICIENT
    assert math.isnan(report.spearman_rho)


def test_no_retained_bins_raises():
    with pytest.raises(NoRetainedBins):
        binned_alpha(novelty_from([1, 2, 3], [1, 1, 1]))


def test_w_cap_applied_before_binning():
    w = [1] * 200 + [5] * 200 + [45] * 200
    report = binned_alpha(novelty_from(w, [0.5] * 600), AlphaWConfig(w_cap=30))
    assert report.w_max == 5
    assert report.entry_count == 400
    assert [b.bin for b in report.bins] == [0, 19]


def test_classify_rule():
    cfg = AlphaWConfig()
    assert classify(0.9, 0.001, 10, cfg) == POSITIVE
    assert classify(-0.9, 0.001, 10, cfg) == NEGATIVE
    assert classify(0.1, 0.001, 10, cfg) == NONE
    assert classify(0.4, 0.2, 10, cfg) == NONE
    assert classify(0.4, 0.2, 10, AlphaWConfig(significance=1.0)) == POSITIVE
    assert classify(-0.9, 0.001, 4, cfg) == INSUFFICIENT
    assert classify(math.nan, math.nan, 10, cfg) == NONE


def test_planted_monotone_trend_is_detected():
    rng = np.random.default_rng(0)
    w = rng.integers(1, 65, size=40_000)
    alpha_dec = np.clip(0.5 - 0.1 * np.log(w) + 0.05 * rng.standard_normal(len(w)), 0, 1)
    assert binned_alpha(novelty_from(w, alpha_dec)).classification == NEGATIVE
    alpha_inc = np.clip(0.1 + 0.1 * np.log(w) + 0.05 * rng.standard_normal(len(w)), 0, 1)
    assert binned_alpha(novelty_from(w, alpha_inc)).classification == POSITIVE


def test_periods_and_gaps():
    windows = [["a"], ["b"], ["a", "c"], ["d"]]
    ts = [0, 10 * DAY, 200 * DAY, 400 * DAY]
    stream = build_stream(windows, timestamps=ts)
    reports = alpha_w_analysis(stream, PeriodSpec(91), AlphaWConfig(min_bin_entries=0))
    assert [r.period_index for r in reports] == [0, 2, 4]
    assert [r.entry_count for r in reports] == [2, 1, 1]
    # novelty carries across periods: "a" in period 2 is not new
    assert reports[1].mean_alpha == 0.5


def test_period_assignment():
    ts = np.array([100, 100 + 91 * DAY - 1, 100 + 91 * DAY])
    assert PeriodSpec().assign(ts).tolist() == [0, 0, 1]


def test_single_period_one_report():
    sim = generate_stream(GeneratorConfig(seed=3, num_entries=2000, window_sampler=PowerLawWindow(2.0, 16)))
    assert len(alpha_w_analysis(sim.stream)) == 1


def zipf_replay(seed, n_entries=100_000, vocab=1000, n_periods=4, exponent=2.0):
    # a steep rank weighting keeps rare tags surfacing in every period
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, vocab + 1) ** exponent
    weights /= weights.sum()
    windows = []
    for _ in range(n_entries):
        w = int(rng.integers(1, 6))
        windows.append([f"t{x}" for x in rng.choice(vocab, size=w, replace=False, p=weights)])
    span = n_periods * 91 * DAY
    ts = [i * span // n_entries for i in range(n_entries)]
    return windows, ts


def test_finite_vocabulary_replay_mean_alpha_decreases():
    windows, ts = zipf_replay(42)
    stream = build_stream(windows, timestamps=ts)
    reports = alpha_w_analysis(stream, PeriodSpec(91))
    assert len(reports) == 4
    means = [r.mean_alpha for r in reports]
    assert all(a > b for a, b in zip(means, means[1:]))
    oracle = np.array(brute_force_alpha(windows))
    pid = np.asarray(ts) // (91 * DAY)
    assert means == pytest.approx([oracle[pid == p].mean() for p in range(4)], abs=1e-12)


@pytest.mark.parametrize("schedule", [ConstantAlpha(0.15), TimeDecay(0.9, 0.2)])
def test_estimator_consistency(schedule):
    cfg = GeneratorConfig(seed=5, num_entries=100_000, alpha_schedule=schedule,
                          window_sampler=PowerLawWindow(2.0, 20))
    sim = generate_stream(cfg)
    measured = annotate_novelty(sim.stream).alpha.mean()
    assert abs(measured - np.mean(sim.true_alpha)) <= 0.01


def test_summary_and_tsv():
    w = [1] * 200 + [8] * 200 + [64] * 200
    report = binned_alpha(novelty_from(w, [0.5] * 600))
    summary = summarize([report, report], burn_in=True)
    assert summary["tally"][INSUFFICIENT] == 1
    assert summary["overall"] == INSUFFICIENT
    assert summary["periods"][0]["spearman_rho"] is None
    buf = io.StringIO()
    write_alpha_w_tsv([report], buf)
    rows = read_tsv(io.StringIO(buf.getvalue()))
    assert [r["bin"] for r in rows] == ["0", "10", "19"]
    assert list(rows[0]) == ["period", "bin", "mean_w", "mean_alpha", "count"]

import io

import numpy as np
import pytest

from tagwindow.generator import ConstantAlpha, GeneratorConfig, derive_seed, generate_stream
from tagwindow.model import EmptyStream, Lexicon
from tagwindow.stats import (
    InsufficientPoints,
    heaps_curve,
    log_binned,
    loglog_slope,
    rank_frequency,
    w_distribution,
    write_w_distribution,
)
from tagwindow.tables import read_tsv

from conftest import build_stream


def test_w_distribution_constant():
    dist = w_distribution(build_stream([["a", "b", "c"]] * 5))
    assert dist.pmf() == {3: 1.0}
    assert dist.median == 3 and dist.mean == 3.0


def test_w_distribution_hand_example():
    dist = w_distribution(build_stream([["a"], ["a", "b"], ["b", "c"], ["a", "b", "c"]]))
    assert dist.mean == 2.0 and dist.median == 2
    assert dist.pmf() == {1: 0.25, 2: 0.5, 3: 0.25}
    assert dist.histogram.counts.sum() == dist.histogram.total
    assert np.all(np.diff(dist.histogram.edges) > 0)
    assert dist.summary_line() == "w: median=2 mean=2.00"


def test_w_distribution_tsv():
    buf = io.StringIO()
    write_w_distribution(w_distribution(build_stream([["a"], ["a", "b", "c"]])), buf)
    rows = read_tsv(io.StringIO(buf.getvalue()))
    assert [(r["w"], r["count"]) for r in rows] == [("1", "1"), ("2", "0"), ("3", "1")]


def test_log_binning_conserves_mass():
    windows = [[f"t{j}" for j in range(w)] for w in (1, 1, 2, 3, 4, 7, 8, 20)]
    hist, density = log_binned(w_distribution(build_stream(windows)))
    assert hist.counts.sum() == hist.total == 8
    assert list(hist.counts[:4]) == [2, 2, 2, 1]
    assert density[1] == pytest.approx(2 / 8 / 2)


def test_rank_frequency_fig1(fig1_sequence):
    stream = build_stream([[t] for t in fig1_sequence])
    assert rank_frequency(stream.tags) == [(1, 4), (2, 3), (3, 1)]


def test_rank_frequency_single_and_ties():
    lex = Lexicon()
    lex.add("only")
    assert rank_frequency(lex) == [(1, 1)]
    lex = Lexicon()
    for name, n in [("x", 2), ("y", 5), ("z", 2)]:
        lex.add(name, n)
    assert rank_frequency(lex) == [(1, 5), (2, 2), (3, 2)]
    with pytest.raises(EmptyStream):
        rank_frequency(Lexicon())


def test_heaps_all_new_and_single_tag():
    all_new = heaps_curve(build_stream([[f"t{i}"] for i in range(100)]))
    assert all_new.points()[:3] == [(1, 1), (2, 2), (4, 4)]
    assert all(n == v for n, v in all_new.points())
    assert all_new.points()[-1] == (100, 100)
    one = heaps_curve(build_stream([["a"]] * 50))
    assert all(v == 1 for _, v in one.points())


def test_heaps_constant_alpha_ratio():
    sim = generate_stream(GeneratorConfig(seed=31, num_entries=300_000, alpha_schedule=ConstantAlpha(0.2)))
    curve = heaps_curve(sim.stream)
    for n, v in curve.points():
        assert v <= n
        if n >= 100_000:
            assert 0.19 <= v / n <= 0.21
    assert np.all(np.diff(curve.v) >= 0)


def test_loglog_exact_power_law():
    x = np.arange(1, 101, dtype=float)
    fit = loglog_slope(zip(x, x ** -2.0))
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 100


def test_loglog_constant():
    fit = loglog_slope([(x, 5.0) for x in range(1, 20)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_loglog_noisy():
    rng = np.random.default_rng(8)
    x = np.arange(1, 1001, dtype=float)
    y = x ** -1.5 * (1 + 0.01 * rng.standard_normal(len(x)))
    assert loglog_slope(zip(x, y)).slope == pytest.approx(-1.5, abs=0.05)


def test_loglog_range_and_insufficient():
    pts = [(1, 1), (2, 0.25), (3, 1 / 9), (4, 0), (100, 5)]
    assert loglog_slope(pts, (1, 3)).slope == pytest.approx(-2.0)
    with pytest.raises(InsufficientPoints):
        loglog_slope(pts, (3, 100))


@pytest.mark.slow
def test_zipf_slope_stable_across_seeds():
    slopes = []
    for i in range(10):
        cfg = GeneratorConfig(seed=derive_seed(77, i), num_entries=1_000_000, alpha_schedule=ConstantAlpha(0.05))
        slopes.append(loglog_slope(rank_frequency(generate_stream(cfg).stream.tags), (10, 1000)).slope)
    slopes = np.array(slopes)
    assert np.all(slopes < 0)
    assert np.all(np.abs(slopes - slopes.mean()) <= 0.1)

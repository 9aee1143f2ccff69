import random

import pytest

from tagwindow.model import Lexicon, Stream, make_entry

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def build_stream(windows, *, users=None, timestamps=None, resources=None) -> Stream:
    """Stream from lists of tag names; users/resources default to one per entry."""
    tags, user_lex, res_lex = Lexicon(), Lexicon(), Lexicon()
    entries = []
    for i, window in enumerate(windows):
        ids = [tags.add(t) for t in window]
        user = user_lex.add(users[i] if users else "u0")
        res = res_lex.add(resources[i] if resources else f"r{i}")
        ts = timestamps[i] if timestamps else i
        entries.append(make_entry(i, user, res, ts, ids))
    return Stream(entries, tags, user_lex, res_lex)


def random_windows(rng: random.Random, n_entries: int, vocab: int, max_w: int):
    out = []
    for _ in range(n_entries):
        w = rng.randint(1, min(max_w, vocab))
        out.append([f"t{x}" for x in rng.sample(range(vocab), w)])
    return out


@pytest.fixture
def fig1_sequence():
    return ["A", "B", "A", "A", "B", "C", "B", "A"]


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")

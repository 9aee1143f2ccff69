"""Describer / categorizer indices per user.

``M0`` is the share of a user's tags applied to at most ``n`` resources, with
``n = ceil(|R(t_max)| / 100)`` taken from the user's most used tag. ``M1``
compares the conditional entropy H(R|T) of the user's resources given the tag
against the value for an ideal categorizer, and ``M`` averages the two.
Entropies are in bits.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Hashable, Iterable, Sequence

import numpy as np

from .model import TagWindowError, entries_of, flat_tags, window_sizes
from .stats import Histogram
from .tables import write_tsv

MIN_ENTRIES = 200
N_BINS = 20


class EmptyProfile(TagWindowError):
    pass


class ZeroHOpt(TagWindowError):
    pass


class NoEffectiveUsers(TagWindowError):
    pass


class NotEffectiveUser(TagWindowError):
    def __init__(self, user, reason: str):
        super().__init__(f"user {user!r}: {reason}")
        self.user = user
        self.reason = reason


@dataclass
class UserProfile:
    """One user's tag/resource usage.

    Per-tag arrays are aligned with ``tags``. ``pair_tag``/``pair_count``
    list every distinct (tag, resource) pair the user produced, as an index
    into ``tags`` and the number of annotations on that pair.
    """

    user: Hashable
    tags: np.ndarray
    resources_per_tag: np.ndarray
    annotations_per_tag: np.ndarray
    resource_count: int
    entry_count: int
    pair_tag: np.ndarray
    pair_count: np.ndarray

    @property
    def vocabulary_size(self) -> int:
        return len(self.tags)

    @classmethod
    def from_assignments(cls, user, assignments: Iterable[tuple[Hashable, Hashable]],
                         entry_count: int | None = None) -> "UserProfile":
        """Build a profile from (tag, resource) pairs, one per annotation."""
        pairs = Counter(assignments)
        tag_ids: dict = {}
        for tag, _ in pairs:
            tag_ids.setdefault(tag, len(tag_ids))
        pair_tag = np.fromiter((tag_ids[t] for t, _ in pairs), dtype=np.int64, count=len(pairs))
        pair_count = np.fromiter(pairs.values(), dtype=np.int64, count=len(pairs))
        n_tags = len(tag_ids)
        resources = {r for _, r in pairs}
        return cls(
            user=user,
            tags=np.arange(n_tags),
            resources_per_tag=np.bincount(pair_tag, minlength=n_tags),
            annotations_per_tag=np.bincount(pair_tag, weights=pair_count, minlength=n_tags).astype(np.int64),
            resource_count=len(resources),
            entry_count=len(resources) if entry_count is None else entry_count,
            pair_tag=pair_tag,
            pair_count=pair_count,
        )


def build_profiles(stream, min_entries: int = 0) -> dict[int, UserProfile]:
    """Profiles for every user with at least ``min_entries`` entries, keyed by user id."""
    entries = entries_of(stream)
    if not entries:
        return {}
    w = window_sizes(entries)
    e_user = np.fromiter((e.user for e in entries), dtype=np.int64, count=len(entries))
    e_res = np.fromiter((e.resource for e in entries), dtype=np.int64, count=len(entries))
    entry_count = np.bincount(e_user)
    keep_user = entry_count >= min_entries
    u = np.repeat(e_user, w)
    t = flat_tags(entries, w)
    r = np.repeat(e_res, w)
    mask = keep_user[u]
    u, t, r = u[mask], t[mask], r[mask]
    if len(u) == 0:
        return {}

    order = np.lexsort((r, t, u))
    u, t, r = u[order], t[order], r[order]
    new_pair = np.ones(len(u), dtype=bool)
    new_pair[1:] = (u[1:] != u[:-1]) | (t[1:] != t[:-1]) | (r[1:] != r[:-1])
    starts = np.flatnonzero(new_pair)
    pair_count = np.diff(np.append(starts, len(u)))
    pu, pt, pr = u[starts], t[starts], r[starts]

    new_ut = np.ones(len(pu), dtype=bool)
    new_ut[1:] = (pu[1:] != pu[:-1]) | (pt[1:] != pt[:-1])
    ut_id = np.cumsum(new_ut) - 1
    ut_starts = np.flatnonzero(new_ut)
    res_per_tag = np.bincount(ut_id)
    ann_per_tag = np.bincount(ut_id, weights=pair_count).astype(np.int64)
    ut_user, ut_tag = pu[ut_starts], pt[ut_starts]

    ur = np.unique(np.stack([pu, pr]), axis=1)
    resources_per_user = np.bincount(ur[0], minlength=len(entry_count))

    profiles = {}
    user_bounds = np.flatnonzero(np.diff(ut_user)) + 1
    tag_lo = np.concatenate(([0], user_bounds))
    tag_hi = np.concatenate((user_bounds, [len(ut_user)]))
    pair_bounds = np.searchsorted(ut_id, np.concatenate((tag_lo, [len(ut_user)])))
    for k, (lo, hi) in enumerate(zip(tag_lo.tolist(), tag_hi.tolist())):
        user = int(ut_user[lo])
        plo, phi = pair_bounds[k], pair_bounds[k + 1]
        profiles[user] = UserProfile(
            user=user,
            tags=ut_tag[lo:hi],
            resources_per_tag=res_per_tag[lo:hi],
            annotations_per_tag=ann_per_tag[lo:hi],
            resource_count=int(resources_per_user[user]),
            entry_count=int(entry_count[user]),
            pair_tag=ut_id[plo:phi] - lo,
            pair_count=pair_count[plo:phi],
        )
    return profiles


def _most_used_tag(profile: UserProfile) -> int:
    ann = profile.annotations_per_tag
    top = np.flatnonzero(ann == ann.max())
    return int(top[np.argmax(profile.resources_per_tag[top])])


def m0(profile: UserProfile) -> float:
    if profile.vocabulary_size == 0:
        raise EmptyProfile(f"user {profile.user!r} has no tags")
    r_max = int(profile.resources_per_tag[_most_used_tag(profile)])
    n = -(-r_max // 100)
    return int((profile.resources_per_tag <= n).sum()) / profile.vocabulary_size


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def conditional_entropy(profile: UserProfile, weighting: str = "annotations", within: str = "uniform") -> float:
    """H(R|T) = sum_t p(t) H(R|t).

    ``weighting`` sets p(t): ``"annotations"`` (share of the user's
    annotations) or ``"uniform"`` (1/|T|). ``within`` sets H(R|t):
    ``"uniform"`` gives log2 |R(t)|, ``"frequency"`` the entropy of the
    tag's annotation counts over its resources.
    """
    if profile.vocabulary_size == 0:
        raise EmptyProfile(f"user {profile.user!r} has no tags")
    if weighting == "annotations":
        weights = profile.annotations_per_tag.astype(np.int64)
    elif weighting == "uniform":
        weights = np.ones(profile.vocabulary_size, dtype=np.int64)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    total = int(weights.sum())

    if within == "uniform":
        # group equal |R(t)| so that a single group gets weight exactly 1.0
        sizes, inverse = np.unique(profile.resources_per_tag, return_inverse=True)
        group_w = np.bincount(inverse, weights=weights)
        return math.fsum(int(gw) / total * math.log2(int(c)) for c, gw in zip(sizes, group_w) if c > 1)
    if within == "frequency":
        h_tag = np.zeros(profile.vocabulary_size)
        order = np.argsort(profile.pair_tag, kind="stable")
        pt, pc = profile.pair_tag[order], profile.pair_count[order]
        bounds = np.flatnonzero(np.diff(pt)) + 1
        for group_t, group_c in zip(np.split(pt, bounds), np.split(pc, bounds)):
            h_tag[group_t[0]] = _entropy_bits(group_c)
        return math.fsum((weights / total * h_tag).tolist())
    raise ValueError(f"unknown within-tag model {within!r}")


def h_opt(profile: UserProfile, method: str = "balanced") -> float:
    """Conditional entropy of an ideal categorizer with the same |R| and |T|.

    ``"balanced"`` spreads resources evenly and fractionally:
    log2(|R| / |T|) when |R| > |T|, else 0. ``"integer"`` uses the most even
    split into whole resources (q or q+1 per tag).
    """
    n_r, n_t = profile.resource_count, profile.vocabulary_size
    if n_t == 0:
        raise EmptyProfile(f"user {profile.user!r} has no tags")
    if n_r <= n_t:
        return 0.0
    if method == "balanced":
        return math.log2(n_r / n_t)
    if method == "integer":
        q, rem = divmod(n_r, n_t)
        h = (n_t - rem) * q * math.log2(q) if q > 1 else 0.0
        h += rem * (q + 1) * math.log2(q + 1)
        return h / n_r
    raise ValueError(f"unknown H_opt method {method!r}")


def m1(profile: UserProfile, *, weighting: str = "annotations", within: str = "uniform",
       h_opt_method: str = "balanced") -> float:
    opt = h_opt(profile, h_opt_method)
    if opt <= 0:
        raise ZeroHOpt(f"user {profile.user!r}: optimal conditional entropy is 0")
    h = conditional_entropy(profile, weighting, within)
    return max(0.0, (h - opt) / opt)


@dataclass(frozen=True)
class MotivationScore:
    user: Hashable
    m0: float
    m1: float
    m: float
    h_cond: float
    h_opt: float
    entry_count: int
    vocabulary_size: int
    resource_count: int


def m_score(profile: UserProfile, min_entries: int = MIN_ENTRIES, *, weighting: str = "annotations",
            within: str = "uniform", h_opt_method: str = "balanced") -> MotivationScore:
    """Score an effective user: more than ``min_entries`` entries and a nonzero H_opt."""
    if profile.entry_count <= min_entries:
        raise NotEffectiveUser(profile.user, f"{profile.entry_count} entries, need more than {min_entries}")
    opt = h_opt(profile, h_opt_method)
    if opt <= 0:
        raise NotEffectiveUser(profile.user, "optimal conditional entropy is 0")
    h = conditional_entropy(profile, weighting, within)
    a = m0(profile)
    b = max(0.0, (h - opt) / opt)
    return MotivationScore(profile.user, a, b, (a + b) / 2, h, opt, profile.entry_count,
                           profile.vocabulary_size, profile.resource_count)


def score_users(profiles: dict | Iterable[UserProfile], min_entries: int = MIN_ENTRIES,
                **options) -> tuple[list[MotivationScore], Counter]:
    """Scores for all effective users sorted by user id, plus a tally of exclusion reasons."""
    items = profiles.values() if isinstance(profiles, dict) else profiles
    scores, excluded = [], Counter()
    for profile in items:
        try:
            scores.append(m_score(profile, min_entries, **options))
        except NotEffectiveUser as exc:
            excluded["few_entries" if "entries" in exc.reason else "zero_h_opt"] += 1
    scores.sort(key=lambda s: s.user)
    return scores, excluded


@dataclass
class MHistogram:
    histogram: Histogram
    mean: float


def m_histogram(scores: Sequence[MotivationScore] | Sequence[float], n_bins: int = N_BINS) -> MHistogram:
    """Fraction of users per equal-width bin on [0, 1]; M above 1 is counted in the last bin."""
    values = np.asarray([s.m if isinstance(s, MotivationScore) else s for s in scores], dtype=float)
    if len(values) == 0:
        raise NoEffectiveUsers("no effective users")
    idx = np.clip(np.floor(values * n_bins).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    return MHistogram(Histogram("linear", edges, counts, len(values)), float(values.mean()))


def dominant_motivation(mean_m: float) -> str:
    return "describer-dominated" if mean_m >= 0.5 else "categorizer-dominated"


# -- TSV emitters ------------------------------------------------------------

SCORE_COLUMNS = ("user", "entries", "vocabulary", "resources", "m0", "m1", "m", "h_cond", "h_opt")


def write_scores(scores: Sequence[MotivationScore], users, fp: IO[str]) -> None:
    """``users`` is the lexicon naming user ids, or None to write raw ids."""
    def name(u):
        return users.name_of(u) if users is not None else u

    write_tsv(fp, SCORE_COLUMNS, (
        (name(s.user), s.entry_count, s.vocabulary_size, s.resource_count, s.m0, s.m1, s.m, s.h_cond, s.h_opt)
        for s in scores
    ))


def write_histogram(hist: MHistogram | None, fp: IO[str]) -> None:
    rows = [] if hist is None else hist.histogram.rows()
    write_tsv(fp, ("lo", "hi", "count", "fraction"), rows)

"""Core domain types: entries, interning lexicons and the in-memory stream."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class TagWindowError(Exception):
    """Base class for data errors raised by the toolkit."""


class EmptyStream(TagWindowError):
    def __init__(self, message: str = "no valid entries"):
        super().__init__(message)


class Entry(NamedTuple):
    """One posting event: a user attaches a window of distinct tags to a resource.

    ``user``, ``resource`` and the members of ``tags`` are dense integer ids
    issued by the lexicons of the owning :class:`Stream`. Build entries from
    untrusted data with :func:`make_entry`, which checks the window.
    """

    index: int
    user: int
    resource: int
    timestamp: int
    tags: tuple[int, ...]

    @property
    def w(self) -> int:
        return len(self.tags)


def make_entry(index: int, user: int, resource: int, timestamp: int, tags: Iterable[int]) -> Entry:
    tags = tuple(tags)
    if not tags:
        raise ValueError("an entry needs at least one tag")
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate tags in window of entry {index}")
    return Entry(index, user, resource, int(timestamp), tags)


def window_size(entry: Entry) -> int:
    return len(entry.tags)


class Lexicon:
    """Bidirectional string <-> dense id map with per-id use counts.

    Ids are issued in order of first interning and never change. ``total``
    is the sum of all use counts (the annotation count N for a tag lexicon).
    """

    __slots__ = ("_ids", "_names", "_counts", "total")

    def __init__(self, names: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        self._counts: list[int] = []
        self.total = 0
        for name in names:
            self.add(name)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self._names == other._names and self._counts == other._counts

    def __repr__(self) -> str:
        return f"Lexicon(size={len(self)}, total={self.total})"

    def intern(self, name: str) -> int:
        """Return the id for ``name``, assigning a new one if needed. Counts are untouched."""
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
            self._counts.append(0)
        return idx

    def add(self, name: str, n: int = 1) -> int:
        idx = self.intern(name)
        self._counts[idx] += n
        self.total += n
        return idx

    def use(self, idx: int, n: int = 1) -> None:
        self._counts[idx] += n
        self.total += n

    def id_of(self, name: str) -> int:
        return self._ids[name]

    def get(self, name: str, default=None):
        return self._ids.get(name, default)

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def count(self, idx: int) -> int:
        return self._counts[idx]

    @property
    def names(self) -> Sequence[str]:
        return self._names

    @property
    def counts(self) -> Sequence[int]:
        return self._counts

    def copy(self) -> "Lexicon":
        other = Lexicon()
        other._ids = dict(self._ids)
        other._names = list(self._names)
        other._counts = list(self._counts)
        other.total = self.total
        return other


@dataclass
class Stream:
    """A time-ordered entry list together with the lexicons that name its ids."""

    entries: list[Entry]
    tags: Lexicon
    users: Lexicon = field(default_factory=Lexicon)
    resources: Lexicon = field(default_factory=Lexicon)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def annotations(self) -> int:
        return sum(len(e.tags) for e in self.entries)

    def tag_names(self, entry: Entry) -> list[str]:
        return [self.tags.name_of(t) for t in entry.tags]


def entries_of(stream) -> Sequence[Entry]:
    return stream.entries if isinstance(stream, Stream) else stream


def window_sizes(stream) -> np.ndarray:
    entries = entries_of(stream)
    return np.fromiter((len(e.tags) for e in entries), dtype=np.int64, count=len(entries))


def flat_tags(stream, sizes: np.ndarray | None = None) -> np.ndarray:
    """Concatenate all windows into the annotation sequence, in stream order."""
    entries = entries_of(stream)
    if sizes is None:
        sizes = window_sizes(entries)
    total = int(sizes.sum())
    return np.fromiter(chain.from_iterable(e.tags for e in entries), dtype=np.int64, count=total)


def timestamps(stream) -> np.ndarray:
    entries = entries_of(stream)
    return np.fromiter((e.timestamp for e in entries), dtype=np.int64, count=len(entries))

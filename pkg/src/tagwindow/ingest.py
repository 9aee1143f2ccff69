"""Reading and writing entry logs.

Two line-oriented formats are supported, optionally gzip-compressed (detected
from the magic bytes, not the file name):

``jsonl``
    one object per line: ``{"timestamp": 1136073600, "user": "u1",
    "resource": "r9", "tags": ["python", "web"]}``.
``csv``
    header ``timestamp,user,resource,tags``; the tags column joins tags with
    ``|``; a literal ``|`` or ``\\`` inside a tag is escaped with a backslash.

Timestamps are integer seconds since the epoch. Floats are truncated to whole
seconds and ISO-8601 strings are accepted (naive values are taken as UTC).
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
import os
import unicodedata
from contextlib import ExitStack
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator

from .model import EmptyStream, Entry, Lexicon, Stream, TagWindowError

CSV_FIELDS = ("timestamp", "user", "resource", "tags")


class FormatError(TagWindowError):
    """The input's overall structure is unusable (bad header, undecodable bytes)."""


class _BadLine(ValueError):
    pass


@dataclass(frozen=True)
class IngestConfig:
    fmt: str = "auto"
    excluded_tags: tuple[str, ...] = ()
    min_window_after_filter: int = 1
    w_cap: int | None = None  # consumed by the alpha-w analysis only
    strip: bool = True
    unicode_form: str | None = "NFC"
    casefold: bool = False

    def normalization(self) -> dict:
        return {"strip": self.strip, "unicode_form": self.unicode_form, "casefold": self.casefold}


@dataclass
class IngestStats:
    users: int = 0
    vocabulary: int = 0
    annotations: int = 0
    entries: int = 0
    lines_read: int = 0
    skipped_lines: int = 0
    duplicate_tags_dropped: int = 0
    empty_tags_dropped: int = 0
    excluded_annotations: int = 0
    dropped_entries: int = 0
    format: str = ""
    normalization: dict = field(default_factory=dict)

    @classmethod
    def from_stream(cls, stream: Stream, **extra) -> "IngestStats":
        return cls(
            users=len({e.user for e in stream.entries}),
            vocabulary=len({t for e in stream.entries for t in e.tags}),
            annotations=sum(len(e.tags) for e in stream.entries),
            entries=len(stream.entries),
            **extra,
        )

    def table_row(self) -> dict:
        return {"users": self.users, "vocabulary": self.vocabulary,
                "annotations": self.annotations, "entries": self.entries}

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


@dataclass
class ParsedStream:
    stream: Stream
    stats: IngestStats


class TagNormalizer:
    def __init__(self, config: IngestConfig):
        self.config = config
        self._cache: dict[str, str] = {}

    def __call__(self, raw: str) -> str:
        out = self._cache.get(raw)
        if out is None:
            out = raw
            if self.config.strip:
                out = out.strip()
            form = self.config.unicode_form
            if form and not unicodedata.is_normalized(form, out):
                out = unicodedata.normalize(form, out)
            if self.config.casefold:
                out = out.casefold()
            if len(self._cache) < 1_000_000:
                self._cache[raw] = out
        return out


def parse_timestamp(value) -> int:
    if isinstance(value, bool):
        raise _BadLine("boolean timestamp")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise _BadLine("non-finite timestamp")
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text)
        except ValueError:
            pass
        try:
            return int(float(text))
        except ValueError:
            pass
        try:
            dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
        except ValueError:
            raise _BadLine(f"unparseable timestamp {value!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return math.floor(dt.timestamp())
    raise _BadLine(f"bad timestamp type {type(value).__name__}")


def split_tags(field: str) -> list[str]:
    """Split a CSV tags column on unescaped ``|``."""
    if not field:
        return []
    if "\\" not in field:
        return field.split("|")
    out, cur, i = [], [], 0
    while i < len(field):
        ch = field[i]
        if ch == "\\" and i + 1 < len(field):
            cur.append(field[i + 1])
            i += 2
            continue
        if ch == "|":
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    out.append("".join(cur))
    return out


def join_tags(tags: Iterable[str]) -> str:
    return "|".join(t.replace("\\", "\\\\").replace("|", "\\|") for t in tags)


# -- input plumbing ------------------------------------------------------------


def _open_binary(source, stack: ExitStack) -> IO[bytes]:
    if isinstance(source, (bytes, bytearray)):
        raw: IO[bytes] = io.BytesIO(source)
    elif isinstance(source, (str, os.PathLike)):
        raw = stack.enter_context(open(source, "rb"))
    else:
        raw = source
    if not hasattr(raw, "peek"):
        raw = io.BufferedReader(raw)
    if raw.peek(2)[:2] == b"\x1f\x8b":
        return stack.enter_context(gzip.GzipFile(fileobj=raw))
    return raw


def _lines(binary: IO[bytes]) -> Iterator[str]:
    text = io.TextIOWrapper(binary, encoding="utf-8", newline="")
    try:
        yield from text
    except UnicodeDecodeError as exc:
        raise FormatError(f"input is not valid UTF-8: {exc}") from None
    finally:
        if not text.closed:
            text.detach()  # leave closing the byte stream to its owner


def _sniff_format(first_line: str, source) -> str:
    if isinstance(source, (str, os.PathLike)):
        name = os.fspath(source).lower().removesuffix(".gz")
        if name.endswith(".csv"):
            return "csv"
        if name.endswith((".jsonl", ".ndjson", ".json")):
            return "jsonl"
    return "jsonl" if first_line.lstrip().startswith("{") else "csv"


def _jsonl_records(lines: Iterable[str]):
    decode = json.JSONDecoder().decode
    for line in lines:
        if not line.strip():
            yield None
            continue
        try:
            obj = decode(line)
        except json.JSONDecodeError:
            yield _BadLine("invalid JSON")
            continue
        if not isinstance(obj, dict):
            yield _BadLine("record is not an object")
            continue
        try:
            tags = obj["tags"]
            user, resource = obj["user"], obj["resource"]
            ts = obj["timestamp"]
        except KeyError as exc:
            yield _BadLine(f"missing field {exc}")
            continue
        if not isinstance(tags, list):
            yield _BadLine("tags must be a list of strings")
            continue
        if isinstance(user, (dict, list)) or isinstance(resource, (dict, list)) or user is None or resource is None:
            yield _BadLine("user/resource must be scalars")
            continue
        yield ts, str(user), str(resource), tags


def _csv_records(lines: Iterable[str]):
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return
    header = [h.strip().lower() for h in header]
    missing = [f for f in CSV_FIELDS if f not in header]
    if missing:
        raise FormatError(f"CSV header lacks column(s): {', '.join(missing)}")
    pos = [header.index(f) for f in CSV_FIELDS]
    width = len(header)
    yield None  # header line
    for row in reader:
        if not row:
            yield None
            continue
        if len(row) != width:
            yield _BadLine(f"expected {width} fields, got {len(row)}")
            continue
        ts, user, resource, tags = (row[p] for p in pos)
        yield ts, user, resource, split_tags(tags)


def parse_stream(source, config: IngestConfig = IngestConfig()) -> ParsedStream:
    """Parse, normalise, filter and time-order an entry log.

    ``source`` is a path, raw bytes or a binary file object. Malformed lines
    are skipped and counted; structural problems raise :class:`FormatError`
    and a result with no usable entry raises :class:`EmptyStream`.
    """
    with ExitStack() as stack:
        binary = _open_binary(source, stack)
        lines = _lines(binary)
        stack.callback(lines.close)  # release the text wrapper before the file closes
        return _parse(lines, source, config)


def _parse(lines: Iterator[str], source, config: IngestConfig) -> ParsedStream:
    stats = IngestStats(normalization=config.normalization())
    try:
        first = next(lines)
    except StopIteration:
        raise EmptyStream("no valid entries (input is empty)") from None
    fmt = config.fmt if config.fmt != "auto" else _sniff_format(first, source)
    if fmt not in ("jsonl", "csv"):
        raise FormatError(f"unknown input format {fmt!r}")
    stats.format = fmt

    def all_lines():
        yield first
        yield from lines

    records = _jsonl_records(all_lines()) if fmt == "jsonl" else _csv_records(all_lines())
    normalize = TagNormalizer(config)
    norm_cache = normalize._cache
    excluded = {normalize(t) for t in config.excluded_tags}
    min_w = max(1, config.min_window_after_filter)

    # ids are issued in input order of first use; counts accumulate as we go
    tags, users, resources = Lexicon(), Lexicon(), Lexicon()
    tag_ids, tag_names, tag_counts = tags._ids, tags._names, tags._counts
    user_ids, res_ids = users._ids, resources._ids
    kept: list[tuple[int, int, int, tuple[int, ...]]] = []
    for rec in records:
        stats.lines_read += 1
        if rec is None:
            continue
        if isinstance(rec, _BadLine):
            stats.skipped_lines += 1
            continue
        raw_ts, user, resource, raw_tags = rec
        if type(raw_ts) is int:
            ts = raw_ts
        else:
            try:
                ts = parse_timestamp(raw_ts)
            except _BadLine:
                stats.skipped_lines += 1
                continue
        window: list[str] = []
        bad = False
        for raw in raw_tags:
            tag = norm_cache.get(raw)
            if tag is None:
                if not isinstance(raw, str):
                    bad = True
                    break
                tag = normalize(raw)
            if not tag:
                stats.empty_tags_dropped += 1
            elif tag in window:
                stats.duplicate_tags_dropped += 1
            elif tag in excluded:
                window.append(tag)
                stats.excluded_annotations += 1
            else:
                window.append(tag)
        if bad:
            stats.skipped_lines += 1
            continue
        if excluded:
            window = [t for t in window if t not in excluded]
        if len(window) < min_w:
            stats.dropped_entries += 1
            continue
        ids = []
        for tag in window:
            i = tag_ids.get(tag)
            if i is None:
                i = tag_ids[tag] = len(tag_names)
                tag_names.append(tag)
                tag_counts.append(1)
            else:
                tag_counts[i] += 1
            ids.append(i)
        tags.total += len(ids)
        u = user_ids.get(user)
        if u is None:
            u = users.intern(user)
        r = res_ids.get(resource)
        if r is None:
            r = resources.intern(resource)
        kept.append((ts, u, r, tuple(ids)))

    if not kept:
        raise EmptyStream("no valid entries")
    if any(kept[i][0] > kept[i + 1][0] for i in range(len(kept) - 1)):
        kept.sort(key=lambda rec: rec[0])  # stable: ties keep input order
    entries = [Entry(i, u, r, ts, window) for i, (ts, u, r, window) in enumerate(kept)]
    for e in entries:
        users._counts[e.user] += 1
        resources._counts[e.resource] += 1
    users.total = resources.total = len(entries)
    stats.users = len(users)
    stats.vocabulary = len(tags)
    stats.annotations = tags.total
    stats.entries = len(entries)
    return ParsedStream(Stream(entries, tags, users, resources), stats)


def write_stream(stream: Stream, fp: IO[str], fmt: str = "jsonl") -> None:
    """Serialise ``stream`` in entry-log format (inverse of :func:`parse_stream`)."""
    tag_names, user_names, res_names = stream.tags.names, stream.users.names, stream.resources.names
    if fmt == "jsonl":
        dumps = json.JSONEncoder(ensure_ascii=False, separators=(",", ":")).encode
        for e in stream.entries:
            fp.write(dumps({
                "timestamp": e.timestamp,
                "user": user_names[e.user],
                "resource": res_names[e.resource],
                "tags": [tag_names[t] for t in e.tags],
            }))
            fp.write("\n")
    elif fmt == "csv":
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for e in stream.entries:
            writer.writerow((e.timestamp, user_names[e.user], res_names[e.resource],
                             join_tags(tag_names[t] for t in e.tags)))
    else:
        raise ValueError(f"unknown output format {fmt!r}")


def read_tag_list(path) -> list[str]:
    """One tag per line; blank lines and ``#`` comments ignored."""
    with open(path, encoding="utf-8") as fp:
        return [ln.rstrip("\n") for ln in fp if ln.strip() and not ln.lstrip().startswith("#")]

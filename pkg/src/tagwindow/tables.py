"""TSV read/write helpers shared by the report writers."""

from __future__ import annotations

import csv
from typing import IO, Iterable, Sequence


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_tsv(fp: IO[str], columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    fp.write("\t".join(columns) + "\n")
    for row in rows:
        fp.write("\t".join(fmt(v) for v in row) + "\n")


def read_tsv(fp: IO[str]) -> list[dict[str, str]]:
    return list(csv.DictReader(fp, delimiter="\t"))

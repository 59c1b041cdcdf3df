"""Embedded datasets and CSV ingestion.

Three datasets ship with the package:

* ``seeds_plants`` -- 958 plots cross-tabulated by seeds (rows) and plants
  (columns), counts 0..5 where 5 means "5 or more";
* ``twenty_pairs`` -- twenty simulated Bin(100, p) pairs;
* ``auditc`` -- ten diagnostic-accuracy studies (correct positives out of
  the diseased group, correct negatives out of the non-diseased group).

CSV schemas: ``pairs`` has header ``x,y`` and integer rows; ``table`` is a
headerless 6x6 integer grid; ``studies`` has header ``x,n1,y,n2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "PairSample",
    "CountTable",
    "StudyRow",
    "Studies",
    "builtin",
    "summary",
    "load_csv",
    "dumps_csv",
    "BUILTIN_NAMES",
]

SEEDS_PLANTS = (
    (7, 41, 54, 40, 21, 9),
    (36, 79, 73, 58, 30, 13),
    (39, 70, 69, 47, 25, 10),
    (24, 41, 39, 26, 14, 6),
    (10, 18, 18, 11, 6, 2),
    (3, 6, 6, 4, 2, 1),
)

TWENTY_PAIRS = (
    (67, 65), (69, 61), (64, 71), (54, 71), (73, 66),
    (68, 64), (61, 66), (77, 66), (76, 62), (59, 66),
    (71, 63), (69, 65), (66, 65), (70, 57), (64, 62),
    (73, 71), (72, 61), (69, 63), (64, 68), (67, 56),
)

AUDITC = (
    (47, 56, 738, 839),
    (126, 177, 1543, 1815),
    (36, 39, 276, 354),
    (130, 149, 959, 1170),
    (59, 64, 136, 191),
    (142, 192, 2788, 3359),
    (137, 161, 358, 465),
    (57, 60, 437, 540),
    (34, 35, 56, 77),
    (152, 203, 264, 352),
)

BUILTIN_NAMES = ("seeds_plants", "twenty_pairs", "auditc")


@dataclass(frozen=True)
class PairSample:
    x: np.ndarray
    y: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 1 or x.shape != y.shape:
            raise DataError("x and y must be 1-d and of equal length")
        if x.size == 0:
            raise DataError("a pair sample must be nonempty")
        if np.any(x < 0) or np.any(y < 0):
            raise DataError("counts must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs, provenance=""):
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], provenance)

    def __len__(self):
        return int(self.x.size)

    def pairs(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def tabulate(self, cap=5):
        """Cross-tabulate with values >= ``cap`` pooled into the last cell."""
        counts = np.zeros((cap + 1, cap + 1), dtype=np.int64)
        np.add.at(counts, (np.minimum(self.x, cap), np.minimum(self.y, cap)), 1)
        return CountTable(counts, self.provenance)

    def unique_counts(self):
        """Distinct pairs and their multiplicities, for weighted likelihoods."""
        stacked = np.column_stack([self.x, self.y])
        uniq, counts = np.unique(stacked, axis=0, return_counts=True)
        return uniq[:, 0].astype(float), uniq[:, 1].astype(float), counts.astype(float)


@dataclass(frozen=True)
class CountTable:
    """Contingency counts; the last row and column hold "K or more"."""

    counts: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2:
            raise DataError("count table must be 2-d")
        if np.any(c < 0):
            raise DataError("counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def shape(self):
        return self.counts.shape

    def to_pairs(self):
        """Expand to one pair per counted item; pooled cells become the cap value."""
        rows, cols = np.indices(self.counts.shape)
        reps = self.counts.ravel()
        return PairSample(np.repeat(rows.ravel(), reps), np.repeat(cols.ravel(), reps), self.provenance)

    def transpose(self):
        return CountTable(self.counts.T.copy(), self.provenance)


@dataclass(frozen=True)
class StudyRow:
    x: int
    n1: int
    y: int
    n2: int

    def __post_init__(self):
        if not (0 <= self.x <= self.n1 and 0 <= self.y <= self.n2 and self.n1 >= 1 and self.n2 >= 1):
            raise DataError(f"study row {self} violates 0 <= x <= n1, 0 <= y <= n2")


@dataclass(frozen=True)
class Studies:
    rows: tuple
    provenance: str = ""

    def __post_init__(self):
        if not self.rows:
            raise DataError("at least one study is required")
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self):
        return len(self.rows)

    def arrays(self):
        """``(x, n1, y, n2)`` as float arrays."""
        a = np.array([(r.x, r.n1, r.y, r.n2) for r in self.rows], dtype=float)
        return a[:, 0], a[:, 1], a[:, 2], a[:, 3]

    def raw_proportions(self):
        x, n1, y, n2 = self.arrays()
        return x / n1, y / n2


def builtin(name):
    """Return an embedded dataset by name."""
    if name == "seeds_plants":
        return CountTable(np.array(SEEDS_PLANTS), "seeds_plants")
    if name == "twenty_pairs":
        return PairSample.from_pairs(TWENTY_PAIRS, "twenty_pairs")
    if name == "auditc":
        return Studies(tuple(StudyRow(*r) for r in AUDITC), "auditc")
    raise DataError(f"unknown builtin dataset {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def summary(sample):
    """Sample means and Pearson correlation of a pair sample.

    A :class:`CountTable` is expanded first, so pooled cells count at the
    cap value.
    """
    if isinstance(sample, CountTable):
        sample = sample.to_pairs()
    if len(sample) < 2:
        raise DataError("need at least two pairs")
    x = sample.x.astype(float)
    y = sample.y.astype(float)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DataError("correlation undefined for a constant coordinate")
    return float(x.mean()), float(y.mean()), float(dx @ dy / math.sqrt(sxx * syy))


# CSV ----------------------------------------------------------------------

def _parse_int(text, lineno):
    try:
        return int(text.strip())
    except ValueError:
        raise DataError(f"line {lineno}: {text.strip()!r} is not an integer") from None


def _read_rows(text):
    reader = csv.reader(io.StringIO(text))
    return [(i, row) for i, row in enumerate(reader, start=1) if row and any(c.strip() for c in row)]


def load_csv(path, schema):
    """Load a dataset from ``path`` using ``schema`` (pairs, table or studies)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return loads_csv(text, schema, provenance=str(path))


def loads_csv(text, schema, provenance=""):
    rows = _read_rows(text)
    if schema == "pairs":
        return _parse_with_header(rows, ("x", "y"), lambda vals, ln: tuple(vals), provenance, _pairs)
    if schema == "studies":
        return _parse_with_header(rows, ("x", "n1", "y", "n2"), _study_row, provenance, _studies)
    if schema == "table":
        grid = []
        for lineno, row in rows:
            if len(row) != 6:
                raise DataError(f"line {lineno}: expected 6 columns, got {len(row)}")
            grid.append([_parse_int(c, lineno) for c in row])
        if len(grid) != 6:
            raise DataError(f"table must have 6 rows, got {len(grid)}")
        try:
            return CountTable(np.array(grid), provenance)
        except DataError as exc:
            raise DataError(f"{provenance or 'table'}: {exc}") from None
    raise DataError(f"unknown CSV schema {schema!r}")


def _study_row(vals, lineno):
    try:
        return StudyRow(*vals)
    except DataError:
        raise DataError(f"line {lineno}: study row {tuple(vals)} violates 0 <= x <= n1, 0 <= y <= n2") from None


def _pairs(items, provenance):
    for lineno, (x, y) in items:
        if x < 0 or y < 0:
            raise DataError(f"line {lineno}: negative count")
    return PairSample.from_pairs([v for _, v in items], provenance)


def _studies(items, provenance):
    return Studies(tuple(v for _, v in items), provenance)


def _parse_with_header(rows, header, make_row, provenance, build):
    if not rows:
        raise DataError("empty file")
    lineno, first = rows[0]
    if tuple(c.strip().lower() for c in first) != header:
        raise DataError(f"line {lineno}: expected header {','.join(header)}")
    items = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        vals = [_parse_int(c, lineno) for c in row]
        items.append((lineno, make_row(vals, lineno)))
    if not items:
        raise DataError("no data rows")
    return build(items, provenance)


def dumps_csv(data):
    """Serialise a dataset in the matching schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(data, PairSample):
        w.writerow(("x", "y"))
        w.writerows(data.pairs())
    elif isinstance(data, Studies):
        w.writerow(("x", "n1", "y", "n2"))
        w.writerows((r.x, r.n1, r.y, r.n2) for r in data.rows)
    elif isinstance(data, CountTable):
        w.writerows(data.counts.tolist())
    else:
        raise DataError(f"cannot serialise {type(data).__name__}")
    return buf.getvalue()


"""Categorical CSV ingestion and JSON persistence of priors and protocols.

An empirical prior is the normalised table of co-occurrence counts of the
secret column and the data columns. Rows containing the missing-value token
in any used column are dropped and counted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (DimensionMismatch, EmptyAfterFiltering, InvalidDistribution,
                     SchemaMismatch)
from .prob import TAU_MASS, JointDistribution


@dataclass(frozen=True)
class DatasetSchema:
    """Which CSV columns hold the secret and the data attributes."""

    path: str | Path
    secret: str
    data: tuple[str, ...]
    delimiter: str = ","
    missing: str = "?"

    def __post_init__(self):
        data = (self.data,) if isinstance(self.data, str) else tuple(self.data)
        object.__setattr__(self, "data", data)
        if len(data) < 1:
            raise ValueError("at least one data column is required")
        if self.secret in data:
            raise ValueError(f"column {self.secret!r} cannot be both secret and data")
        if len(set(data)) != len(data):
            raise ValueError("data columns must be distinct")


@dataclass
class CategoryCodebook:
    """Per-column bijection between category labels and integer codes.

    Codes follow the order in which labels first appear in the file.
    """

    columns: dict[str, list[str]] = field(default_factory=dict)

    def code(self, column: str, label: str) -> int:
        return self.columns[column].index(label)

    def label(self, column: str, code: int) -> str:
        return self.columns[column][code]

    def size(self, column: str) -> int:
        return len(self.columns[column])

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.columns.items()}


@dataclass(frozen=True)
class RowCounts:
    total: int
    used: int
    dropped_missing: int


@dataclass
class IngestResult:
    joint: JointDistribution
    codebook: CategoryCodebook
    rows: RowCounts
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "joint": self.joint.to_dict(),
            "codebook": self.codebook.to_dict(),
            "rows": {"total": self.rows.total, "used": self.rows.used,
                     "dropped_missing": self.rows.dropped_missing},
        }


def _strip(v: str) -> str:
    # Adult-style files pad fields with a space after the delimiter
    return v.strip()


def ingest(schema: DatasetSchema, smoothing: float = 0.0) -> IngestResult:
    """Build the empirical joint of ``(S, X^1..X^m)`` from a CSV file.

    Parameters
    ----------
    schema : DatasetSchema
        Column assignment, delimiter and missing-value token.
    smoothing : float
        Add-lambda pseudo-count applied to every cell before normalising.
        Off by default.

    Returns
    -------
    IngestResult
        The joint (with attribute shape when m > 1), the codebook, row
        counts and the raw count table.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    cols = (schema.secret,) + schema.data
    labels: dict[str, dict[str, int]] = {c: {} for c in cols}
    records: list[tuple[int, ...]] = []
    total = dropped = 0
    with open(schema.path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [_strip(h) for h in next(reader)]
        except StopIteration:
            raise SchemaMismatch(f"{schema.path}: file is empty") from None
        missing_cols = [c for c in cols if c not in header]
        if missing_cols:
            raise SchemaMismatch(f"{schema.path}: missing column(s) {missing_cols}")
        idx = [header.index(c) for c in cols]
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue  # blank line, not a record
            total += 1
            if len(row) < len(header):
                dropped += 1
                continue
            vals = [_strip(row[i]) for i in idx]
            if any(v == schema.missing or v == "" for v in vals):
                dropped += 1
                continue
            rec = []
            for c, v in zip(cols, vals):
                book = labels[c]
                if v not in book:
                    book[v] = len(book)
                rec.append(book[v])
            records.append(tuple(rec))
    used = len(records)
    if used == 0:
        raise EmptyAfterFiltering(f"{schema.path}: no complete rows out of {total}")

    sizes = tuple(len(labels[c]) for c in cols)
    counts = np.zeros(sizes, dtype=np.int64)
    np.add.at(counts, tuple(np.array(records).T), 1)

    # Every label in the codebook was observed, so each single-column
    # marginal is positive. For several data columns an unobserved
    # combination still gives a zero X-marginal cell.
    shape = sizes[1:]
    table = counts.astype(float) + smoothing
    c, a = sizes[0], math.prod(shape)
    p = table.reshape(c, a)
    if np.any(p.sum(axis=0) <= 0):
        empty = int(np.sum(p.sum(axis=0) <= 0))
        raise EmptyAfterFiltering(
            f"{empty} of {a} data-value combinations never occur; "
            "enable smoothing or use fewer data columns")
    p = p / p.sum()
    joint = JointDistribution(p, shape if len(shape) > 1 else None)
    book = CategoryCodebook({col: list(labels[col]) for col in cols})
    return IngestResult(joint, book, RowCounts(total, used, dropped), counts)


# persistence

def _dump(obj: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def save_instance(obj, path: str | Path) -> None:
    """Write a joint distribution or protocol bundle as JSON.

    Floats are written with ``repr`` precision, so a load/save cycle
    reproduces the file byte for byte.
    """
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if not isinstance(obj, dict):
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    _dump(obj, path)


def _validate_joint_record(d: dict) -> JointDistribution:
    try:
        p = np.asarray(d["p"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDistribution(f"malformed joint record: {exc}") from exc
    if p.ndim != 2:
        raise DimensionMismatch("joint matrix must be two-dimensional")
    if np.any(p < 0):
        raise InvalidDistribution("joint has a negative entry")
    if abs(p.sum() - 1.0) > TAU_MASS:
        raise InvalidDistribution(f"joint sums to {p.sum()!r}, not 1")
    return JointDistribution.from_dict(d)


def load_instance(path: str | Path):
    """Read a JSON file written by :func:`save_instance`.

    A joint distribution record (keys ``c``, ``a``, ``p``) is returned as a
    :class:`JointDistribution`; any other record is returned as a dict.
    """
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidDistribution(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(d, dict) and {"c", "a", "p"} <= d.keys():
        return _validate_joint_record(d)
    if isinstance(d, dict) and "joint" in d:  # output of ingest
        return _validate_joint_record(d["joint"])
    return d


def load_joint(path: str | Path) -> JointDistribution:
    obj = load_instance(path)
    if not isinstance(obj, JointDistribution):
        raise InvalidDistribution(f"{path}: not a joint distribution record")
    return obj


def write_rows(rows: Sequence[dict], path: str | Path, fieldnames: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fieldnames), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)

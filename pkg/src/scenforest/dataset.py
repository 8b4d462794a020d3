"""Tabular data model and file formats shared by the whole pipeline.

CSV is the interchange format for feature data (RFC-4180 subset: comma
delimiter, ``.`` decimal, LF line endings, mandatory ``id`` first column).
Proximity matrices additionally round-trip through a raw binary format
(row-major little-endian float64 plus a JSON sidecar) where bit-exactness
matters. Floats written to CSV use 17 significant digits, which round-trips
IEEE-754 doubles exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ParseError",
    "Dataset",
    "LabeledDataset",
    "ProximityMatrix",
    "load_dataset",
    "save_dataset",
    "load_labeled_dataset",
    "save_labeled_dataset",
    "save_matrix",
    "load_matrix",
]

LABEL_COLUMN = "label"


class ParseError(ValueError):
    """An input file does not conform to the expected format."""


def _fmt(v: float) -> str:
    return format(v, ".17g")


@dataclass
class Dataset:
    """M rows of Q real-valued features with stable string ids."""

    feature_names: list[str]
    ids: list[str]
    values: np.ndarray  # (M, Q) float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        m, q = self.values.shape
        if len(self.feature_names) != q:
            raise ValueError(f"{len(self.feature_names)} feature names for {q} columns")
        if len(self.ids) != m:
            raise ValueError(f"{len(self.ids)} ids for {m} rows")
        if len(set(self.ids)) != m:
            seen = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))
            raise ValueError(f"duplicate id {dup!r}")
        if self.values.size and not np.all(np.isfinite(self.values)):
            i, j = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at row {i}, column {self.feature_names[j]!r}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]

    def subset(self, rows: list[int]) -> "Dataset":
        return Dataset(
            feature_names=list(self.feature_names),
            ids=[self.ids[i] for i in rows],
            values=self.values[rows].copy(),
        )


@dataclass
class LabeledDataset:
    """A Dataset whose rows carry class labels (the classification substrate)."""

    base: Dataset
    labels: list[str]

    def __post_init__(self):
        if len(self.labels) != self.base.n_rows:
            raise ValueError(f"{len(self.labels)} labels for {self.base.n_rows} rows")

    @property
    def label_set(self) -> list[str]:
        return sorted(set(self.labels))


@dataclass
class ProximityMatrix:
    """Symmetric M x M similarity matrix, diagonal 1, entries in (0, 1]."""

    values: np.ndarray
    ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        m = len(self.ids)
        if self.values.shape != (m, m):
            raise ValueError(f"matrix shape {self.values.shape} does not match {m} ids")
        bad = np.argwhere(self.values != self.values.T)
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"asymmetric at ({i}, {j}): {self.values[i, j]} != {self.values[j, i]}")
        diag = np.diagonal(self.values)
        if m and not np.all(diag == 1.0):
            i = int(np.argwhere(diag != 1.0)[0][0])
            raise ValueError(f"diagonal not 1 at ({i}, {i}): {diag[i]}")
        off = (self.values <= 0.0) | (self.values > 1.0)
        if np.any(off):
            i, j = np.argwhere(off)[0]
            raise ValueError(f"value out of (0, 1] at ({i}, {j}): {self.values[i, j]}")

    @property
    def size(self) -> int:
        return len(self.ids)


def load_dataset(path) -> Dataset:
    """Read a feature CSV (header row, first column ``id``).

    Raises ParseError naming the offending row/column for ragged rows,
    non-numeric or non-finite cells, and duplicate ids.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: no header") from None
        if not header or header[0] != "id":
            raise ParseError(f"{path}: first header column must be 'id', got {header[:1]!r}")
        names = header[1:]
        ids: list[str] = []
        seen: set[str] = set()
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            rid = rec[0]
            if rid in seen:
                raise ParseError(f"{path}:{lineno}: duplicate id {rid!r}")
            seen.add(rid)
            parsed = []
            for col, cell in zip(names, rec[1:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {col!r}") from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: non-finite cell {cell!r} in column {col!r}")
                parsed.append(v)
            ids.append(rid)
            rows.append(parsed)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return Dataset(feature_names=names, ids=ids, values=values)


def save_dataset(d: Dataset, path) -> None:
    """Write a Dataset as CSV; load(save(d)) reproduces d exactly."""
    if d.n_features == 0:
        raise ValueError("empty schema: dataset has no feature columns")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(["id"] + list(d.feature_names)) + "\n")
        for rid, row in zip(d.ids, d.values):
            fh.write(rid + "," + ",".join(_fmt(v) for v in row) + "\n")


def load_labeled_dataset(path) -> LabeledDataset:
    """Read a labeled CSV: feature columns plus a final ``label`` column."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: no header") from None
        if len(header) < 2 or header[0] != "id" or header[-1] != LABEL_COLUMN:
            raise ParseError(f"{path}: expected header id,...,{LABEL_COLUMN}")
        names = header[1:-1]
        ids, labels, rows = [], [], []
        seen: set[str] = set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            if rec[0] in seen:
                raise ParseError(f"{path}:{lineno}: duplicate id {rec[0]!r}")
            seen.add(rec[0])
            try:
                row = [float(c) for c in rec[1:-1]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric feature cell") from None
            ids.append(rec[0])
            labels.append(rec[-1])
            rows.append(row)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return LabeledDataset(Dataset(names, ids, values), labels)


def save_labeled_dataset(d: LabeledDataset, path) -> None:
    if d.base.n_features == 0:
        raise ValueError("empty schema: dataset has no feature columns")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(["id"] + list(d.base.feature_names) + [LABEL_COLUMN]) + "\n")
        for rid, row, label in zip(d.base.ids, d.base.values, d.labels):
            fh.write(rid + "," + ",".join(_fmt(v) for v in row) + "," + label + "\n")


def save_matrix(p: ProximityMatrix, path, fmt: str = "csv") -> None:
    """Write a proximity matrix.

    ``csv``: one header row with the M ids, then M rows of M values.
    ``raw``: row-major little-endian float64 plus a ``<path>.json`` sidecar
    holding {"M": M, "ids": [...]}; round-trips bit-identically.
    """
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(p.ids) + "\n")
            for row in p.values:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    elif fmt == "raw":
        path.write_bytes(p.values.astype("<f8").tobytes(order="C"))
        sidecar = {"M": p.size, "ids": list(p.ids)}
        Path(str(path) + ".json").write_text(json.dumps(sidecar) + "\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, fmt: str = "csv") -> ProximityMatrix:
    path = Path(path)
    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                ids = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: no header") from None
            rows = [[float(c) for c in rec] for rec in reader if rec]
        values = np.array(rows, dtype=np.float64)
    elif fmt == "raw":
        sidecar = json.loads(Path(str(path) + ".json").read_text())
        ids = sidecar["ids"]
        m = int(sidecar["M"])
        values = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(m, m).copy()
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    return ProximityMatrix(values=values, ids=ids)

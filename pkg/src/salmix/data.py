"""The observation container and its CSV reader/writer."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .exceptions import CsvFormatError

LABEL_COLUMN = "label"
KNOWN_COLUMN = "known"


@dataclass(frozen=True, eq=False)
class DataSet:
    """``n x p`` observations with optional per-row class labels and a known-label mask.

    Labels are kept as given (strings or ints); ``known_mask`` marks rows whose
    label may be used for semi-supervised fitting.
    """

    rows: np.ndarray
    column_names: List[str] = field(default_factory=list)
    labels: Optional[np.ndarray] = None
    known_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1)
        if rows.ndim != 2 or rows.shape[1] < 1 or rows.shape[0] < 1:
            raise ValueError("rows must be an n x p matrix with p >= 1")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows contain non-finite values")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        names = list(self.column_names) or [f"x{j + 1}" for j in range(rows.shape[1])]
        if len(names) != rows.shape[1]:
            raise ValueError("one column name per column required")
        object.__setattr__(self, "column_names", names)
        for name in ("labels", "known_mask"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value)
                if value.shape != (rows.shape[0],):
                    raise ValueError(f"{name} must have one entry per row")
                if name == "known_mask":
                    value = value.astype(bool)
                object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvFormatError(f"non-numeric value {cell!r} in column {column!r}", line) from None
    if not np.isfinite(value):
        raise CsvFormatError(f"non-finite value {cell!r} in column {column!r}", line)
    return value


def read_csv(path, label_column: str = LABEL_COLUMN, known_column: str = KNOWN_COLUMN) -> DataSet:
    """
    Read a header-first, comma-separated numeric file.

    An optional ``label`` column holds class identifiers and an optional
    ``known`` 0/1 column flags rows whose label is treated as known.
    Every other column must be numeric.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError("empty file", 1) from None
        label_idx = header.index(label_column) if label_column in header else None
        known_idx = header.index(known_column) if known_column in header else None
        feature_idx = [j for j in range(len(header)) if j not in (label_idx, known_idx)]
        if not feature_idx:
            raise CsvFormatError("no numeric columns", 1)
        rows, labels, known = [], [], []
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise CsvFormatError(f"expected {len(header)} fields, found {len(rec)}", line)
            rows.append([_parse_float(rec[j].strip(), line, header[j]) for j in feature_idx])
            if label_idx is not None:
                labels.append(rec[label_idx].strip())
            if known_idx is not None:
                flag = rec[known_idx].strip()
                if flag not in ("0", "1"):
                    raise CsvFormatError(f"known flag must be 0 or 1, got {flag!r}", line)
                known.append(flag == "1")
    if not rows:
        raise CsvFormatError("no data rows", 2)
    lab = None
    if label_idx is not None:
        lab = np.array(labels, dtype=object)
        try:
            lab = np.array([int(v) for v in labels])
        except ValueError:
            pass
    return DataSet(
        np.array(rows),
        [header[j] for j in feature_idx],
        labels=lab,
        known_mask=np.array(known) if known_idx is not None else None,
    )


def write_csv(path, data: DataSet) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    header = list(data.column_names)
    if data.labels is not None:
        header.append(LABEL_COLUMN)
    if data.known_mask is not None:
        header.append(KNOWN_COLUMN)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, row in enumerate(data.rows):
            rec = [repr(float(v)) for v in row]
            if data.labels is not None:
                rec.append(str(data.labels[i]))
            if data.known_mask is not None:
                rec.append("1" if data.known_mask[i] else "0")
            w.writerow(rec)


def encode_labels(labels: Sequence, classes: Optional[Sequence] = None):
    """Map arbitrary class identifiers to 1..G; returns ``(codes, classes)``."""
    labels = np.asarray(labels)
    if classes is None:
        classes = sorted(set(labels.tolist()), key=lambda v: (str(type(v)), v))
    lookup = {c: k + 1 for k, c in enumerate(classes)}
    return np.array([lookup[v] for v in labels.tolist()]), list(classes)

"""CSV readers and writers for sample paths and discrete measures.

Data files store floats with ``repr`` precision so they round-trip exactly;
reports use fixed 9-decimal formatting instead.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DomainError
from .measures import DiscreteMeasure, SamplePath

__all__ = ["ParseError", "read_measure_csv", "read_path_csv", "write_measure_csv", "write_path_csv"]


class ParseError(DomainError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def _floats(path, lineno, cells):
    try:
        out = [float(c) for c in cells]
    except ValueError:
        raise ParseError(path, lineno, f"not a number in {cells!r}") from None
    if not all(np.isfinite(out)):
        raise ParseError(path, lineno, "values must be finite")
    return out


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_path_csv(path, sample: SamplePath):
    """Rows ``index, value`` (1-based index) or ``index, value_1..value_d``."""
    vals = sample.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if vals.ndim == 1:
            w.writerow(["index", "value"])
            for i, v in enumerate(vals.tolist(), start=1):
                w.writerow([i, repr(v)])
        else:
            w.writerow(["index"] + [f"value_{j + 1}" for j in range(vals.shape[1])])
            for i, row in enumerate(vals.tolist(), start=1):
                w.writerow([i] + [repr(v) for v in row])


def read_path_csv(path, origin: str = "file") -> SamplePath:
    values = []
    width = None
    for lineno, row in _rows(path):
        if lineno == 1 and row[0].lower() == "index":
            continue
        if len(row) < 2:
            raise ParseError(path, lineno, "expected 'index, value[, ...]'")
        nums = _floats(path, lineno, row[1:])
        if width is None:
            width = len(nums)
        elif len(nums) != width:
            raise ParseError(path, lineno, f"expected {width} value columns, found {len(nums)}")
        values.append(nums[0] if width == 1 else nums)
    if not values:
        raise ParseError(path, 1, "no data rows")
    return SamplePath(np.asarray(values, dtype=float), origin=origin)


def write_measure_csv(path, measure: DiscreteMeasure):
    """Rows ``coord_1, ..., coord_d, weight``."""
    pts = measure.points.reshape(len(measure), -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(pts.shape[1])] + ["weight"])
        for row, wt in zip(pts.tolist(), measure.weights.tolist()):
            w.writerow([repr(v) for v in row] + [repr(wt)])


def read_measure_csv(path) -> DiscreteMeasure:
    """Parse ``coord..., weight`` rows; an optional non-numeric header is skipped."""
    points, weights = [], []
    width = None
    first = True
    for lineno, row in _rows(path):
        if first:
            first = False
            if not any(_is_number(c) for c in row):
                continue  # header
        if len(row) < 2:
            raise ParseError(path, lineno, "expected 'coord..., weight'")
        nums = _floats(path, lineno, row)
        if nums[-1] < 0:
            raise ParseError(path, lineno, f"negative weight {nums[-1]}")
        if width is None:
            width = len(nums) - 1
        elif len(nums) - 1 != width:
            raise ParseError(path, lineno, f"expected {width} coordinates, found {len(nums) - 1}")
        points.append(nums[0] if width == 1 else nums[:-1])
        weights.append(nums[-1])
    if not points:
        raise ParseError(path, 1, "no data rows")
    total = sum(weights)
    if abs(total - 1.0) > 1e-9:
        raise ParseError(path, lineno, f"weights sum to {total:.12g}, not 1")
    return DiscreteMeasure(np.asarray(points, dtype=float), weights)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p

"""CSV helpers.

All numeric output uses 17 significant digits so that written matrices
round-trip to the exact float64 values.
"""

from __future__ import annotations

import numpy as np

FLOAT_FMT = "%.17g"


def write_matrix(path, arr, fmt: str = FLOAT_FMT, header: str | None = None) -> None:
    arr = np.atleast_2d(np.asarray(arr))
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for row in arr:
            fh.write(",".join(fmt % x for x in row) + "\n")


def write_vector(path, vec, fmt: str = FLOAT_FMT) -> None:
    with open(path, "w") as fh:
        for x in np.asarray(vec).ravel():
            fh.write(fmt % x + "\n")


def read_matrix(path) -> np.ndarray:
    """Read a comma-separated numeric matrix, skipping an optional header.

    A non-numeric cell raises ValueError naming its 1-based row and
    column.
    """
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    start = 0
    if _has_header(lines[0]):
        start = 1
    if start == len(lines):
        raise ValueError(f"{path}: no data rows")
    width = None
    for r, line in enumerate(lines[start:], start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ValueError(f"{path}: row {r} has {len(cells)} cells, expected {width}")
        parsed = []
        for c, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell at row {r}, column {c}: {cell!r}"
                ) from None
        rows.append(parsed)
    return np.asarray(rows, dtype=float)


def _has_header(line: str) -> bool:
    for cell in line.split(","):
        try:
            float(cell)
        except ValueError:
            return True
    return False


def read_vector(path, dtype=float) -> np.ndarray:
    return read_matrix(path).ravel().astype(dtype)

"""CSV exchange format for complex and real matrices.

A file starts with a self-describing header row ``n_rows,n_cols,kind`` where
``kind`` is ``complex`` or ``real``.  Complex matrices interleave columns as
``re,im`` pairs, so an N x M complex matrix has N data rows of 2M fields.
Values are written with shortest round-trip precision.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["write_matrix", "read_matrix", "MatrixFormatError"]


class MatrixFormatError(ValueError):
    """Malformed matrix CSV; carries the offending line number."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def write_matrix(path, values: np.ndarray) -> None:
    """Write a 1-D or 2-D array; vectors are stored as single columns."""
    arr = np.asarray(values)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("only 1-D or 2-D arrays are supported")
    is_complex = np.iscomplexobj(arr)
    n, m = arr.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([n, m, "complex" if is_complex else "real"])
        for row in arr:
            if is_complex:
                flat = np.empty(2 * m, dtype=float)
                flat[0::2] = row.real
                flat[1::2] = row.imag
            else:
                flat = row.astype(float)
            writer.writerow([repr(float(v)) for v in flat])


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`.

    Raises
    ------
    MatrixFormatError
        With a line-numbered diagnostic on any malformed content.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MatrixFormatError(path, 1, "empty file")
    header = rows[0]
    if len(header) != 3 or header[2] not in ("complex", "real"):
        raise MatrixFormatError(path, 1, "header must be 'n_rows,n_cols,kind'")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise MatrixFormatError(path, 1, "non-integer dimensions in header") from None
    if n < 1 or m < 1:
        raise MatrixFormatError(path, 1, "dimensions must be positive")
    is_complex = header[2] == "complex"
    width = 2 * m if is_complex else m
    data = rows[1:]
    if len(data) != n:
        raise MatrixFormatError(path, len(rows) + 1, f"expected {n} data rows, found {len(data)}")
    out = np.empty((n, m), dtype=complex if is_complex else float)
    for i, row in enumerate(data):
        if len(row) != width:
            raise MatrixFormatError(path, i + 2, f"expected {width} fields, found {len(row)}")
        try:
            vals = np.array([float(v) for v in row])
        except ValueError:
            raise MatrixFormatError(path, i + 2, "non-numeric field") from None
        out[i] = vals[0::2] + 1j * vals[1::2] if is_complex else vals
    return out

"""MatrixMarket coordinate I/O.

Only ``coordinate real general`` and ``coordinate real symmetric`` are
understood. Values are written with 17 significant digits so a write/read
round trip reproduces every float64 exactly.
"""
from __future__ import annotations

import os

import numpy as np

from .csr import CooMatrix, CsrMatrix, build

__all__ = ["MatrixMarketError", "read_matrix_market", "write_matrix_market"]


class MatrixMarketError(ValueError):
    pass


def read_matrix_market(path: str | os.PathLike) -> CsrMatrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        parts = header.strip().lower().split()
        if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
            raise MatrixMarketError(f"malformed MatrixMarket header: {header.strip()!r}")
        fmt, field, symmetry = parts[2], parts[3], parts[4]
        if fmt != "coordinate":
            raise MatrixMarketError(f"unsupported MatrixMarket format {fmt!r} (need coordinate)")
        if field not in ("real", "double"):
            raise MatrixMarketError(f"unsupported MatrixMarket field {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise MatrixMarketError(f"unsupported MatrixMarket symmetry {symmetry!r}")

        line = fh.readline()
        while line and line.lstrip().startswith("%"):
            line = fh.readline()
        try:
            n_rows, n_cols, nnz = (int(t) for t in line.split())
        except ValueError as exc:
            raise MatrixMarketError(f"malformed size line: {line.strip()!r}") from exc

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in fh:
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            tok = s.split()
            if len(tok) != 3 or k >= nnz:
                raise MatrixMarketError(f"malformed entry line: {s!r}")
            rows[k] = int(tok[0]) - 1
            cols[k] = int(tok[1]) - 1
            vals[k] = float(tok[2])
            k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}")
    if nnz and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise MatrixMarketError("entry index out of range")

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.r_[rows, cols[off]], np.r_[cols, rows[off]], np.r_[vals, vals[off]])
    return build(CooMatrix(n_rows, n_cols, rows, cols, vals))


def write_matrix_market(path: str | os.PathLike, A: CsrMatrix, comment: str | None = None) -> None:
    rows = A.row_indices() + 1
    cols = A.col_idx + 1
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for c in comment.splitlines():
                fh.write(f"% {c}\n")
        fh.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        fh.writelines(f"{r} {c} {v:.17g}\n"
                      for r, c, v in zip(rows.tolist(), cols.tolist(), A.val.tolist()))

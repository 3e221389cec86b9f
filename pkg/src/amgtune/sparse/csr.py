"""Coordinate and compressed-sparse-row storage plus the handful of kernels
the multigrid hierarchy needs (build, matvec, transpose, Galerkin product).

Everything is float64 with int64 indices. Matrices are treated as immutable
values; every operation returns a new object.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "CooMatrix",
    "CsrMatrix",
    "SparseStructureError",
    "DimensionMismatchError",
    "build",
    "spmv",
    "transpose",
    "spgemm",
    "triple_product",
    "from_dense",
    "identity",
]


class SparseStructureError(ValueError):
    """Raised for malformed triplets or CSR arrays."""


class DimensionMismatchError(ValueError):
    """Raised when operand shapes do not conform."""


@dataclass(frozen=True)
class CooMatrix:
    n_rows: int
    n_cols: int
    row: NDArray[np.int64]
    col: NDArray[np.int64]
    val: NDArray[np.float64]

    def __post_init__(self):
        row = np.ascontiguousarray(self.row, dtype=np.int64)
        col = np.ascontiguousarray(self.col, dtype=np.int64)
        val = np.ascontiguousarray(self.val, dtype=np.float64)
        if not (row.ndim == col.ndim == val.ndim == 1):
            raise SparseStructureError("triplet arrays must be one-dimensional")
        if not (len(row) == len(col) == len(val)):
            raise SparseStructureError(
                f"triplet arrays differ in length: {len(row)}, {len(col)}, {len(val)}"
            )
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)
        object.__setattr__(self, "val", val)

    @property
    def nnz(self) -> int:
        return len(self.val)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: NDArray[np.int64]
    col_idx: NDArray[np.int64]
    val: NDArray[np.float64]

    @property
    def nnz(self) -> int:
        return len(self.val)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row_indices(self) -> NDArray[np.int64]:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_ptr))

    def to_coo(self) -> CooMatrix:
        return CooMatrix(self.n_rows, self.n_cols, self.row_indices(),
                         self.col_idx.copy(), self.val.copy())

    def to_dense(self) -> NDArray[np.float64]:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_indices(), self.col_idx), self.val)
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.val, self.col_idx, self.row_ptr), shape=self.shape)

    def diagonal(self) -> NDArray[np.float64]:
        d = np.zeros(min(self.shape))
        rows = self.row_indices()
        mask = rows == self.col_idx
        d[rows[mask]] = self.val[mask]
        return d

    def structurally_equal(self, other: "CsrMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.val, other.val)
        )

    def validate(self) -> None:
        """Check the CSR invariants; raise SparseStructureError on violation."""
        rp, ci = self.row_ptr, self.col_idx
        if len(rp) != self.n_rows + 1 or rp[0] != 0 or rp[-1] != len(ci):
            raise SparseStructureError("row_ptr inconsistent with nnz")
        if np.any(np.diff(rp) < 0):
            raise SparseStructureError("row_ptr must be nondecreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise SparseStructureError("column index out of range")
        same_row = self.row_indices()[1:] == self.row_indices()[:-1]
        if np.any(np.diff(ci)[same_row] <= 0):
            raise SparseStructureError("columns must be strictly increasing within a row")
        if np.any(self.val == 0.0):
            raise SparseStructureError("explicit zero stored")

    def __matmul__(self, x):
        if isinstance(x, CsrMatrix):
            return spgemm(self, x)
        return spmv(self, x)


def build(triplets: CooMatrix) -> CsrMatrix:
    """Convert triplets to CSR: duplicates summed, rows sorted, zeros dropped.

    >>> A = build(CooMatrix(2, 2, [0, 0, 1, 1], [0, 1, 0, 1], [2., -1., -1., 2.]))
    >>> A.row_ptr.tolist(), A.val.tolist()
    ([0, 2, 4], [2.0, -1.0, -1.0, 2.0])
    """
    n_rows, n_cols = int(triplets.n_rows), int(triplets.n_cols)
    if n_rows < 0 or n_cols < 0:
        raise SparseStructureError("negative dimension")
    row, col, val = triplets.row, triplets.col, triplets.val
    if len(row):
        if row.min() < 0 or row.max() >= n_rows:
            raise SparseStructureError(f"row index out of range for {n_rows} rows")
        if col.min() < 0 or col.max() >= n_cols:
            raise SparseStructureError(f"column index out of range for {n_cols} columns")

    key = row * max(n_cols, 1) + col
    order = np.argsort(key, kind="stable")
    key = key[order]
    val = val[order]
    if len(key):
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        summed = np.add.reduceat(val, starts)
        ukey = key[starts]
    else:
        summed = val
        ukey = key
    keep = summed != 0.0
    summed = summed[keep]
    ukey = ukey[keep]
    urow = ukey // max(n_cols, 1)
    ucol = ukey - urow * max(n_cols, 1)
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(urow, minlength=n_rows), out=row_ptr[1:])
    return CsrMatrix(n_rows, n_cols, row_ptr, ucol.astype(np.int64), summed.astype(np.float64))


def from_dense(M: ArrayLike) -> CsrMatrix:
    M = np.asarray(M, dtype=np.float64)
    r, c = np.nonzero(M)
    return build(CooMatrix(M.shape[0], M.shape[1], r, c, M[r, c]))


def identity(n: int) -> CsrMatrix:
    idx = np.arange(n, dtype=np.int64)
    return CsrMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


@numba.njit(cache=True)
def _spmv_kernel(row_ptr, col_idx, val, x, y):
    for i in range(len(row_ptr) - 1):
        s = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            s += val[k] * x[col_idx[k]]
        y[i] = s


def spmv(A: CsrMatrix, x: ArrayLike) -> NDArray[np.float64]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise DimensionMismatchError(f"matrix has {A.n_cols} columns, vector has shape {x.shape}")
    y = np.empty(A.n_rows)
    _spmv_kernel(A.row_ptr, A.col_idx, A.val, x, y)
    return y


def transpose(A: CsrMatrix) -> CsrMatrix:
    order = np.argsort(A.col_idx, kind="stable")
    new_cols = A.row_indices()[order]
    row_ptr = np.zeros(A.n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(A.col_idx, minlength=A.n_cols), out=row_ptr[1:])
    return CsrMatrix(A.n_cols, A.n_rows, row_ptr, new_cols, A.val[order].copy())


@numba.njit(cache=True)
def _spgemm_kernel(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, n_rows, n_cols):
    # Gustavson row-by-row product with a dense marker; two passes.
    marker = np.full(n_cols, -1, dtype=np.int64)
    c_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    for i in range(n_rows):
        count = 0
        for ka in range(a_ptr[i], a_ptr[i + 1]):
            k = a_idx[ka]
            for kb in range(b_ptr[k], b_ptr[k + 1]):
                j = b_idx[kb]
                if marker[j] != i:
                    marker[j] = i
                    count += 1
        c_ptr[i + 1] = c_ptr[i] + count
    nnz = c_ptr[n_rows]
    c_idx = np.empty(nnz, dtype=np.int64)
    c_val = np.empty(nnz, dtype=np.float64)
    acc = np.zeros(n_cols, dtype=np.float64)
    marker[:] = -1
    for i in range(n_rows):
        start = c_ptr[i]
        pos = start
        for ka in range(a_ptr[i], a_ptr[i + 1]):
            k = a_idx[ka]
            av = a_val[ka]
            for kb in range(b_ptr[k], b_ptr[k + 1]):
                j = b_idx[kb]
                if marker[j] != i:
                    marker[j] = i
                    c_idx[pos] = j
                    acc[j] = av * b_val[kb]
                    pos += 1
                else:
                    acc[j] += av * b_val[kb]
        c_idx[start:pos] = np.sort(c_idx[start:pos])
        for p in range(start, pos):
            c_val[p] = acc[c_idx[p]]
    return c_ptr, c_idx, c_val


def _drop_zeros(n_rows, n_cols, ptr, idx, val) -> CsrMatrix:
    keep = val != 0.0
    if keep.all():
        return CsrMatrix(n_rows, n_cols, ptr, idx, val)
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(ptr))[keep]
    new_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=new_ptr[1:])
    return CsrMatrix(n_rows, n_cols, new_ptr, idx[keep], val[keep])


def spgemm(A: CsrMatrix, B: CsrMatrix) -> CsrMatrix:
    """Sparse product A @ B in sorted CSR form, exact zeros removed."""
    if A.n_cols != B.n_rows:
        raise DimensionMismatchError(f"cannot multiply {A.shape} by {B.shape}")
    ptr, idx, val = _spgemm_kernel(A.row_ptr, A.col_idx, A.val,
                                   B.row_ptr, B.col_idx, B.val, A.n_rows, B.n_cols)
    return _drop_zeros(A.n_rows, B.n_cols, ptr, idx, val)


def triple_product(R: CsrMatrix, A: CsrMatrix, P: CsrMatrix) -> CsrMatrix:
    """Galerkin product R @ A @ P."""
    if R.n_cols != A.n_rows or A.n_cols != P.n_rows:
        raise DimensionMismatchError(
            f"nonconforming triple product {R.shape} x {A.shape} x {P.shape}"
        )
    return spgemm(spgemm(R, A), P)

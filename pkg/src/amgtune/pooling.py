"""Sparse-matrix pooling into a fixed-size four-channel image.

Channel order: max positive part, max negative part (as a magnitude), sum,
nonzero count. Planes are stored channel-first, shape ``(4, m, m)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import NDArray

from .sparse import CooMatrix, CsrMatrix

__all__ = ["PooledTensor", "pool", "normalize", "block_index", "DEFAULT_M"]

DEFAULT_M = 75


@dataclass(frozen=True, eq=False)
class PooledTensor:
    data: NDArray[np.float64]  # (4, m, m)
    n1: int
    visits: int = 0

    @property
    def m(self) -> int:
        return self.data.shape[-1]

    @property
    def max_pos(self):
        return self.data[0]

    @property
    def max_neg(self):
        return self.data[1]

    @property
    def total(self):
        return self.data[2]

    @property
    def count(self):
        return self.data[3]


def block_index(r, n1: int, m: int):
    """Block of row/column index ``r``: the first ``n1 mod m`` blocks hold
    ``n1 // m + 1`` indices, the rest ``n1 // m``. When ``n1 < m`` every
    index is its own block."""
    r = np.asarray(r, dtype=np.int64)
    q, p = divmod(n1, m)
    if q == 0:
        return r.copy()
    t = (q + 1) * p
    return np.where(r < t, r // (q + 1), (r - t) // q + p)


@numba.njit(cache=True)
def _pool_kernel(n1, m, row, col, val, V):
    q = n1 // m
    p = n1 % m
    t = (q + 1) * p
    visits = 0
    for k in range(len(val)):
        r = row[k]
        c = col[k]
        if q == 0:
            i = r
            j = c
        else:
            i = r // (q + 1) if r < t else (r - t) // q + p
            j = c // (q + 1) if c < t else (c - t) // q + p
        v = val[k]
        if v > V[0, i, j]:
            V[0, i, j] = v
        if -v > V[1, i, j]:
            V[1, i, j] = -v
        V[2, i, j] += v
        V[3, i, j] += 1.0
        visits += 1
    return visits


def pool(A: CooMatrix | CsrMatrix, m: int = DEFAULT_M) -> PooledTensor:
    """Single pass over the stored entries of ``A`` accumulating block
    statistics into an ``m x m`` grid.

    A CSR input is pooled through its (duplicate-free) COO view. For
    ``n1 < m`` the image is zero-padded: entry ``(r, c)`` lands in block
    ``(r, c)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    coo = A.to_coo() if isinstance(A, CsrMatrix) else A
    if coo.n_rows != coo.n_cols:
        raise ValueError(f"pooling needs a square matrix, got {coo.shape}")
    n1 = coo.n_rows
    V = np.zeros((4, m, m))
    visits = _pool_kernel(n1, m, coo.row, coo.col, coo.val, V)
    return PooledTensor(V, n1, int(visits))


def normalize(V: PooledTensor) -> PooledTensor:
    """Per-channel signed log scaling ``sign(v) log(|v|+1) / max log(|v|+1)``.

    Zeros stay zero and an all-zero channel stays all zero.
    """
    L = np.log1p(np.abs(V.data))
    M = L.reshape(L.shape[0], -1).max(axis=1)
    scale = np.where(M > 0, M, 1.0)[:, None, None]
    out = np.sign(V.data) * L / scale
    return PooledTensor(out, V.n1, V.visits)

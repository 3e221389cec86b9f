from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..sparse import CsrMatrix

__all__ = ["StrengthGraph", "strength_sets"]


@dataclass(frozen=True, eq=False)
class StrengthGraph:
    """Strong-dependence graph stored as two CSR patterns.

    Row ``i`` of ``(s_ptr, s_idx)`` is S_i, the variables ``i`` strongly
    depends on; row ``j`` of ``(t_ptr, t_idx)`` is S_j^T, the variables that
    strongly depend on ``j``. ``t_edge[t]`` points back to the position of the
    same edge in ``s_idx``.
    """

    n: int
    s_ptr: NDArray[np.int64]
    s_idx: NDArray[np.int64]
    t_ptr: NDArray[np.int64]
    t_idx: NDArray[np.int64]
    t_edge: NDArray[np.int64]

    @property
    def n_edges(self) -> int:
        return len(self.s_idx)

    def S(self, i: int) -> NDArray[np.int64]:
        return self.s_idx[self.s_ptr[i]:self.s_ptr[i + 1]]

    def ST(self, j: int) -> NDArray[np.int64]:
        return self.t_idx[self.t_ptr[j]:self.t_ptr[j + 1]]

    def edge_rows(self) -> NDArray[np.int64]:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.s_ptr))

    @classmethod
    def from_edges(cls, n: int, rows, cols) -> "StrengthGraph":
        """Graph with edges ``(rows[e], cols[e])`` meaning rows[e] depends on cols[e]."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if np.any(rows == cols):
            raise ValueError("strength graph cannot contain self loops")
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        dup = np.zeros(len(rows), dtype=bool)
        dup[1:] = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        rows, cols = rows[~dup], cols[~dup]
        s_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=s_ptr[1:])
        t_order = np.argsort(cols, kind="stable")
        t_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=n), out=t_ptr[1:])
        return cls(n, s_ptr, cols, t_ptr, rows[t_order], t_order.astype(np.int64))


def strength_sets(A: CsrMatrix, theta: float) -> StrengthGraph:
    """Classical strong dependence: j in S_i iff j != i and
    ``-a_ij >= theta * max_{l != i} (-a_il)``; rows whose largest ``-a_il``
    is not positive depend on nothing."""
    if A.n_rows != A.n_cols:
        raise ValueError(f"strength needs a square matrix, got {A.shape}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    n = A.n_rows
    rows = A.row_indices()
    neg = -A.val
    neg_off = np.where(rows == A.col_idx, -np.inf, neg)
    row_max = np.full(n, -np.inf)
    np.maximum.at(row_max, rows, neg_off)
    strong = (rows != A.col_idx) & (row_max[rows] > 0.0) & (neg >= theta * row_max[rows])
    return StrengthGraph.from_edges(n, rows[strong], A.col_idx[strong])

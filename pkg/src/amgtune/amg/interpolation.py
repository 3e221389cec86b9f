from __future__ import annotations

import numba
import numpy as np

from ..sparse import CsrMatrix
from ..sparse.csr import _drop_zeros
from .cljp import CfSplitting
from .strength import StrengthGraph

__all__ = ["InterpolationError", "build_interpolation"]


class InterpolationError(ArithmeticError):
    """An F-row of the interpolation operator cannot be formed."""

    def __init__(self, message, row, neighbor=-1):
        super().__init__(message)
        self.row = row
        self.neighbor = neighbor


_OK, _ISOLATED, _ZERO_DIAG_LUMP, _ZERO_INNER = 0, 1, 2, 3


@numba.njit(cache=True)
def _interp_kernel(n, a_ptr, a_idx, a_val, s_ptr, s_idx, is_c, cidx):
    p_ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if is_c[i]:
            p_ptr[i + 1] = p_ptr[i] + 1
        else:
            cnt = 0
            for e in range(s_ptr[i], s_ptr[i + 1]):
                if is_c[s_idx[e]]:
                    cnt += 1
            if cnt == 0:
                return _ISOLATED, i, -1, p_ptr, np.empty(0, np.int64), np.empty(0)
            p_ptr[i + 1] = p_ptr[i] + cnt
    p_idx = np.empty(p_ptr[n], dtype=np.int64)
    p_val = np.empty(p_ptr[n], dtype=np.float64)

    diag = np.zeros(n)
    for i in range(n):
        for k in range(a_ptr[i], a_ptr[i + 1]):
            if a_idx[k] == i:
                diag[i] += a_val[k]

    strong_mark = np.full(n, -1, dtype=np.int64)
    ci_mark = np.full(n, -1, dtype=np.int64)
    acc = np.zeros(n)
    for i in range(n):
        pos = p_ptr[i]
        if is_c[i]:
            p_idx[pos] = cidx[i]
            p_val[pos] = 1.0
            continue
        for e in range(s_ptr[i], s_ptr[i + 1]):
            j = s_idx[e]
            strong_mark[j] = i
            if is_c[j]:
                ci_mark[j] = i
                acc[j] = 0.0
        # weak neighbours are lumped into the diagonal
        denom = diag[i]
        for k in range(a_ptr[i], a_ptr[i + 1]):
            l = a_idx[k]
            if l == i:
                continue
            if strong_mark[l] == i:
                if is_c[l]:
                    acc[l] += a_val[k]
            else:
                denom += a_val[k]
        if denom == 0.0:
            return _ZERO_DIAG_LUMP, i, -1, p_ptr, p_idx, p_val
        # strong F neighbours are distributed over C_i
        for k in range(a_ptr[i], a_ptr[i + 1]):
            l = a_idx[k]
            if l == i or strong_mark[l] != i or is_c[l]:
                continue
            a_il = a_val[k]
            a_ll = diag[l]
            s = 0.0
            for k2 in range(a_ptr[l], a_ptr[l + 1]):
                m = a_idx[k2]
                if ci_mark[m] == i and a_val[k2] * a_ll <= 0.0:
                    s += a_val[k2]
            if s == 0.0:
                return _ZERO_INNER, i, l, p_ptr, p_idx, p_val
            for k2 in range(a_ptr[l], a_ptr[l + 1]):
                m = a_idx[k2]
                if ci_mark[m] == i and a_val[k2] * a_ll <= 0.0:
                    acc[m] += a_il * a_val[k2] / s
        for e in range(s_ptr[i], s_ptr[i + 1]):
            j = s_idx[e]
            if is_c[j]:
                p_idx[pos] = cidx[j]
                p_val[pos] = -acc[j] / denom
                pos += 1
    return _OK, -1, -1, p_ptr, p_idx, p_val


def build_interpolation(A: CsrMatrix, G: StrengthGraph, split: CfSplitting) -> CsrMatrix:
    """Classical interpolation operator from the coarse to the fine grid.

    C-points copy their coarse value. An F-point ``i`` interpolates from its
    strong C-neighbours ``C_i``; strong F-neighbours are distributed over
    ``C_i`` in proportion to their (sign-filtered) couplings and weak
    neighbours are lumped into the diagonal::

        w_ij = -(a_ij + sum_{l in Ds_i} a_il a^_lj / sum_{m in C_i} a^_lm)
               / (a_ii + sum_{l weak} a_il)

    with ``a^_lm = a_lm`` when ``a_lm * a_ll <= 0`` and zero otherwise.

    Raises
    ------
    InterpolationError
        If an F-point has no strong C-neighbour, or either denominator
        vanishes. The offending row (and neighbour) is attached.
    """
    n = A.n_rows
    if split.n != n:
        raise ValueError("splitting and matrix sizes differ")
    if split.n_coarse == 0:
        raise InterpolationError("coarse set is empty", row=-1)
    is_c = split.is_coarse
    status, row, nbr, ptr, idx, val = _interp_kernel(
        n, A.row_ptr, A.col_idx, A.val, G.s_ptr, G.s_idx, is_c, split.coarse_index())
    if status == _ISOLATED:
        raise InterpolationError(f"isolated fine point: row {row} has no strong coarse neighbour", row)
    if status == _ZERO_DIAG_LUMP:
        raise InterpolationError(f"singular interpolation: zero lumped diagonal in row {row}", row)
    if status == _ZERO_INNER:
        raise InterpolationError(
            f"singular interpolation: row {row}, strong fine neighbour {nbr} shares no "
            f"coupling with the coarse interpolation set", row, nbr)
    return _drop_zeros(n, split.n_coarse, ptr, idx, val)

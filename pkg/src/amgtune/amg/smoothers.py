"""Stationary smoothers ``u <- u + B (f - A u)`` applied matrix-free."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..sparse import CsrMatrix, spmv

__all__ = ["SmootherSpec", "SmootherBreakdownError", "smooth", "SMOOTHERS"]

SMOOTHERS = ("jacobi", "gauss_seidel", "sym_gauss_seidel")


class SmootherBreakdownError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class SmootherSpec:
    kind: str = "sym_gauss_seidel"
    omega: float = 2.0 / 3.0  # used by jacobi only

    def __post_init__(self):
        if self.kind not in SMOOTHERS:
            raise ValueError(f"unknown smoother {self.kind!r}; expected one of {SMOOTHERS}")


@numba.njit(cache=True)
def _gs_sweep(row_ptr, col_idx, val, diag, u, f, forward):
    n = len(u)
    for q in range(n):
        i = q if forward else n - 1 - q
        s = f[i]
        for k in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[k]
            if j != i:
                s -= val[k] * u[j]
        u[i] = s / diag[i]


def smooth(A: CsrMatrix, spec: SmootherSpec, u0, f, nu: int, diag=None):
    """Apply ``nu`` smoothing steps starting from ``u0``; returns a new vector.

    Weighted Jacobi uses ``B = omega D^-1``; Gauss-Seidel uses
    ``B = (D + L)^-1`` by forward substitution; the symmetric variant follows
    each forward sweep with a backward one.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    u = np.array(u0, dtype=np.float64, copy=True)
    f = np.ascontiguousarray(f, dtype=np.float64)
    if u.shape != (A.n_rows,) or f.shape != (A.n_rows,):
        raise ValueError("vector lengths do not match the matrix")
    if nu == 0:
        return u
    if diag is None:
        diag = A.diagonal()
    if np.any(diag == 0.0):
        bad = int(np.flatnonzero(diag == 0.0)[0])
        raise SmootherBreakdownError(f"zero diagonal entry in row {bad}")
    if spec.kind == "jacobi":
        scale = spec.omega / diag
        for _ in range(nu):
            u += scale * (f - spmv(A, u))
    else:
        sym = spec.kind == "sym_gauss_seidel"
        for _ in range(nu):
            _gs_sweep(A.row_ptr, A.col_idx, A.val, diag, u, f, True)
            if sym:
                _gs_sweep(A.row_ptr, A.col_idx, A.val, diag, u, f, False)
    return u

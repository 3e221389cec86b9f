"""Symmetric DoF renumbering (natural, Cuthill-McKee, reverse CM, random)."""
from __future__ import annotations

from collections import deque

import numpy as np
from numpy.typing import NDArray

from .csr import CooMatrix, CsrMatrix, build, transpose

__all__ = ["reorder", "permute_symmetric", "cuthill_mckee", "bandwidth", "METHODS"]

METHODS = ("natural", "cuthill_mckee", "reverse_cuthill_mckee", "random")


def permute_symmetric(A: CsrMatrix, perm: NDArray[np.int64]) -> CsrMatrix:
    """Return B with B[i, j] = A[perm[i], perm[j]]."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm), dtype=np.int64)
    return build(CooMatrix(A.n_rows, A.n_cols, inv[A.row_indices()], inv[A.col_idx], A.val))


def bandwidth(A: CsrMatrix) -> int:
    if A.nnz == 0:
        return 0
    return int(np.abs(A.row_indices() - A.col_idx).max())


def cuthill_mckee(A: CsrMatrix) -> NDArray[np.int64]:
    """Cuthill-McKee ordering of the symmetrized pattern of ``A``.

    Each connected component is started from its lowest-degree vertex and
    traversed breadth-first, neighbours visited by increasing degree (ties by
    index), which keeps the result deterministic.
    """
    n = A.n_rows
    At = transpose(A)
    rows = np.r_[A.row_indices(), At.row_indices()]
    cols = np.r_[A.col_idx, At.col_idx]
    off = rows != cols
    G = build(CooMatrix(n, n, rows[off], cols[off], np.ones(int(off.sum()))))
    degree = np.diff(G.row_ptr)

    visited = np.zeros(n, dtype=bool)
    order: list[int] = []
    by_degree = np.lexsort((np.arange(n), degree))
    for start in by_degree:
        if visited[start]:
            continue
        visited[start] = True
        queue = deque([int(start)])
        while queue:
            v = queue.popleft()
            order.append(v)
            nbrs = G.col_idx[G.row_ptr[v]:G.row_ptr[v + 1]]
            nbrs = nbrs[~visited[nbrs]]
            if len(nbrs):
                nbrs = nbrs[np.lexsort((nbrs, degree[nbrs]))]
                visited[nbrs] = True
                queue.extend(nbrs.tolist())
    return np.asarray(order, dtype=np.int64)


def reorder(A: CsrMatrix, method: str = "natural", seed: int | None = None
            ) -> tuple[CsrMatrix, NDArray[np.int64]]:
    """Renumber the unknowns of a square matrix.

    Parameters
    ----------
    A : CsrMatrix
        Square matrix.
    method : {'natural', 'cuthill_mckee', 'reverse_cuthill_mckee', 'random'}
    seed : int, optional
        Seed for ``method='random'``.

    Returns
    -------
    B : CsrMatrix
        ``A[perm][:, perm]``.
    perm : ndarray
        New position ``i`` holds old unknown ``perm[i]``.
    """
    if A.n_rows != A.n_cols:
        raise ValueError(f"reorder needs a square matrix, got {A.shape}")
    n = A.n_rows
    if method == "natural":
        perm = np.arange(n, dtype=np.int64)
    elif method == "cuthill_mckee":
        perm = cuthill_mckee(A)
    elif method == "reverse_cuthill_mckee":
        perm = cuthill_mckee(A)[::-1].copy()
    elif method == "random":
        perm = np.random.default_rng(seed).permutation(n).astype(np.int64)
    else:
        raise ValueError(f"unknown reordering {method!r}; expected one of {METHODS}")
    if method == "natural":
        return A, perm
    return permute_symmetric(A, perm), perm

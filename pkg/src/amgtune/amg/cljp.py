"""Cleary-Luby-Jones-Plassmann C/F splitting."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import NDArray

from .strength import StrengthGraph

__all__ = ["CfSplitting", "cljp_split", "F_POINT", "C_POINT"]

F_POINT = 0
C_POINT = 1


@dataclass(frozen=True, eq=False)
class CfSplitting:
    """C/F labels plus the trace of the run that produced them.

    ``label_round[i]`` is the round in which vertex ``i`` got its label and
    ``edge_round[e]`` the round in which strength edge ``e`` was removed
    (``-1`` if it survived). Together they let a caller rebuild the graph as
    it stood at the start of any round.
    """

    label: NDArray[np.int8]
    label_round: NDArray[np.int64]
    edge_round: NDArray[np.int64]
    n_rounds: int
    guard_used: bool

    @property
    def n(self) -> int:
        return len(self.label)

    @property
    def is_coarse(self) -> NDArray[np.bool_]:
        return self.label == C_POINT

    @property
    def n_coarse(self) -> int:
        return int(np.count_nonzero(self.label == C_POINT))

    def coarse_index(self) -> NDArray[np.int64]:
        """Map fine index to coarse index (``-1`` for F-points)."""
        c = self.is_coarse
        idx = np.full(self.n, -1, dtype=np.int64)
        idx[c] = np.arange(int(c.sum()), dtype=np.int64)
        return idx


@numba.njit(cache=True)
def _cljp_kernel(n, s_ptr, s_idx, t_ptr, t_idx, t_edge, eta):
    label = np.full(n, -1, dtype=np.int8)
    label_round = np.full(n, -1, dtype=np.int64)
    alive = np.ones(len(s_idx), dtype=np.bool_)
    edge_round = np.full(len(s_idx), -1, dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    d_list = np.empty(n, dtype=np.int64)
    remaining = n
    rnd = 0
    guard = False
    while remaining > 0:
        n_d = 0
        for i in range(n):
            if label[i] != -1:
                continue
            ok = True
            for e in range(s_ptr[i], s_ptr[i + 1]):
                if alive[e]:
                    j = s_idx[e]
                    if label[j] == -1 and eta[j] >= eta[i]:
                        ok = False
                        break
            if ok:
                for t in range(t_ptr[i], t_ptr[i + 1]):
                    if alive[t_edge[t]]:
                        j = t_idx[t]
                        if label[j] == -1 and eta[j] >= eta[i]:
                            ok = False
                            break
            if ok:
                d_list[n_d] = i
                n_d += 1
        if n_d == 0:
            # no progress possible: everything left becomes coarse
            guard = True
            for i in range(n):
                if label[i] == -1:
                    label[i] = 1
                    label_round[i] = rnd
            remaining = 0
            break
        for q in range(n_d):
            c = d_list[q]
            label[c] = 1
            label_round[c] = rnd
            remaining -= 1
        for q in range(n_d):
            c = d_list[q]
            # points that c depends on lose one dependant
            for e in range(s_ptr[c], s_ptr[c + 1]):
                if alive[e]:
                    alive[e] = False
                    edge_round[e] = rnd
                    j = s_idx[e]
                    eta[j] -= 1.0
                    if label[j] == -1 and eta[j] < 1.0:
                        label[j] = 0
                        label_round[j] = rnd
                        remaining -= 1
            for t in range(t_ptr[c], t_ptr[c + 1]):
                mark[t_idx[t]] = c
            for t in range(t_ptr[c], t_ptr[c + 1]):
                j = t_idx[t]
                e = t_edge[t]
                if alive[e]:
                    alive[e] = False
                    edge_round[e] = rnd
                # k depending on both j and c no longer needs j
                for t2 in range(t_ptr[j], t_ptr[j + 1]):
                    e2 = t_edge[t2]
                    if alive[e2] and mark[t_idx[t2]] == c:
                        alive[e2] = False
                        edge_round[e2] = rnd
                        eta[j] -= 1.0
                        if label[j] == -1 and eta[j] < 1.0:
                            label[j] = 0
                            label_round[j] = rnd
                            remaining -= 1
        rnd += 1
    return label, label_round, edge_round, rnd, guard


def cljp_split(G: StrengthGraph, seed=0) -> CfSplitting:
    """Split the vertices of ``G`` into coarse and fine points.

    The measure of each vertex starts at ``|S_i^T|`` plus a uniform(0, 1)
    tie-breaker drawn from ``numpy.random.default_rng(seed)``. A vertex joins
    the independent set of a round when its measure beats every unassigned
    neighbour in the current graph (edges in either direction). Vertices are
    labelled F only when a decrement pushes their measure below one.

    Parameters
    ----------
    G : StrengthGraph
    seed : int or numpy SeedSequence
        Seed for the tie-breaking draws.

    Returns
    -------
    CfSplitting
    """
    rng = np.random.default_rng(seed)
    eta = np.diff(G.t_ptr).astype(np.float64) + rng.random(G.n)
    label, label_round, edge_round, n_rounds, guard = _cljp_kernel(
        G.n, G.s_ptr, G.s_idx, G.t_ptr, G.t_idx, G.t_edge, eta)
    return CfSplitting(label, label_round, edge_round, int(n_rounds), bool(guard))

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from ..sparse import CsrMatrix, DimensionMismatchError, transpose, triple_product
from .cljp import CfSplitting, cljp_split
from .interpolation import build_interpolation
from .smoothers import SMOOTHERS, SmootherSpec
from .strength import strength_sets

__all__ = ["AmgConfig", "Level", "Hierarchy", "galerkin_coarsen", "setup_hierarchy"]


@dataclass(frozen=True)
class AmgConfig:
    theta: float = 0.5
    nu1: int = 1
    nu2: int = 1
    N_max: int = 100
    tol: float = 1e-8
    coarse_max: int = 2
    max_levels: int = 25
    smoother: str = "sym_gauss_seidel"
    jacobi_omega: float = 2.0 / 3.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("smoothing counts must be nonnegative")
        if self.max_levels < 1 or self.coarse_max < 1 or self.N_max < 0:
            raise ValueError("max_levels and coarse_max must be >= 1, N_max >= 0")
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"unknown smoother {self.smoother!r}")

    @property
    def smoother_spec(self) -> SmootherSpec:
        return SmootherSpec(self.smoother, self.jacobi_omega)

    def with_theta(self, theta: float) -> "AmgConfig":
        d = asdict(self)
        d["theta"] = float(theta)
        return AmgConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Level:
    A: CsrMatrix
    P: CsrMatrix
    R: CsrMatrix
    splitting: CfSplitting
    diag: np.ndarray


@dataclass(frozen=True, eq=False)
class Hierarchy:
    levels: list[Level]
    coarsest_A: CsrMatrix
    coarse_lu: tuple = field(repr=False)
    config: AmgConfig
    truncated: str  # why coarsening stopped

    @property
    def n_levels(self) -> int:
        return len(self.levels) + 1

    @property
    def level_sizes(self) -> list[int]:
        return [lv.A.n_rows for lv in self.levels] + [self.coarsest_A.n_rows]

    @property
    def level_nnz(self) -> list[int]:
        return [lv.A.nnz for lv in self.levels] + [self.coarsest_A.nnz]

    @property
    def operator_complexity(self) -> float:
        nnz = self.level_nnz
        return float(sum(nnz) / nnz[0]) if nnz[0] else 1.0

    def operator(self, k: int) -> CsrMatrix:
        return self.levels[k].A if k < len(self.levels) else self.coarsest_A

    def coarse_solve(self, f):
        if self.coarsest_A.n_rows == 0:
            return np.zeros(0)
        return scipy.linalg.lu_solve(self.coarse_lu, f)


def galerkin_coarsen(A: CsrMatrix, P: CsrMatrix) -> tuple[CsrMatrix, CsrMatrix]:
    """Return ``(R, A_c)`` with ``R = P^T`` and ``A_c = R A P``."""
    if P.n_rows != A.n_rows or A.n_rows != A.n_cols:
        raise DimensionMismatchError(f"interpolation {P.shape} does not fit operator {A.shape}")
    R = transpose(P)
    return R, triple_product(R, A, P)


def setup_hierarchy(A: CsrMatrix, cfg: AmgConfig) -> Hierarchy:
    """Build the multigrid hierarchy for a (documented, unchecked) SPD ``A``.

    Coarsening stops when the operator has at most ``cfg.coarse_max`` rows,
    when ``cfg.max_levels`` is reached, or when a splitting fails to shrink the
    grid. The last operator is LU-factorised densely.
    """
    if A.n_rows != A.n_cols:
        raise ValueError(f"AMG needs a square matrix, got {A.shape}")
    root = np.random.SeedSequence(cfg.seed)
    level_seeds = root.spawn(cfg.max_levels)
    levels: list[Level] = []
    Ak = A
    reason = "max_levels"
    for k in range(cfg.max_levels - 1):
        if Ak.n_rows <= cfg.coarse_max:
            reason = "coarse_max"
            break
        G = strength_sets(Ak, cfg.theta)
        split = cljp_split(G, level_seeds[k])
        if split.n_coarse >= Ak.n_rows or split.n_coarse == 0:
            reason = "stagnation"
            break
        P = build_interpolation(Ak, G, split)
        R, Ac = galerkin_coarsen(Ak, P)
        levels.append(Level(Ak, P, R, split, Ak.diagonal()))
        Ak = Ac
    else:
        if Ak.n_rows <= cfg.coarse_max:
            reason = "coarse_max"
    dense = Ak.to_dense()
    lu = scipy.linalg.lu_factor(dense, check_finite=False) if Ak.n_rows else ()
    return Hierarchy(levels, Ak, lu, cfg, reason)

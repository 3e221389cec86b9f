from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..sparse import CsrMatrix, spmv
from .hierarchy import AmgConfig, Hierarchy, setup_hierarchy
from .smoothers import smooth

__all__ = ["SolveStats", "vcycle", "amg_solve", "work_units", "solve_with_hierarchy"]


@dataclass
class SolveStats:
    iterations: int
    residual_history: list[float]
    rho: float
    level_sizes: list[int]
    level_nnz: list[int]
    operator_complexity: float
    work_units: float
    wall_seconds: float
    setup_seconds: float
    cycle_seconds: float
    converged: bool
    relative_residual: float
    theta: float
    tuner_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def work_units(hierarchy: Hierarchy, n_iterations: int, nu1: int, nu2: int) -> float:
    """Deterministic cost surrogate: setup plus ``n_iterations`` V-cycles.

    setup = sum_k 3 nnz_k; one cycle = sum over non-coarsest levels of
    (nu1 + nu2 + 1) nnz_k + 2 nnz(P_k), plus n_M^3 / 3 for the direct solve.
    """
    setup = 3.0 * sum(hierarchy.level_nnz)
    cycle = sum((nu1 + nu2 + 1) * lv.A.nnz + 2 * lv.P.nnz for lv in hierarchy.levels)
    cycle += hierarchy.coarsest_A.n_rows ** 3 / 3.0
    return float(setup + n_iterations * cycle)


def vcycle(k: int, u, f, hierarchy: Hierarchy, nu1: int, nu2: int):
    """One V-cycle on level ``k`` (0-based); returns the updated iterate."""
    if k == len(hierarchy.levels):
        return hierarchy.coarse_solve(f)
    lv = hierarchy.levels[k]
    spec = hierarchy.config.smoother_spec
    u = smooth(lv.A, spec, u, f, nu1, lv.diag)
    r_coarse = spmv(lv.R, f - spmv(lv.A, u))
    e = vcycle(k + 1, np.zeros(lv.R.n_rows), r_coarse, hierarchy, nu1, nu2)
    u = u + spmv(lv.P, e)
    return smooth(lv.A, spec, u, f, nu2, lv.diag)


def _criterion(rnorm, fnorm):
    return rnorm / fnorm if fnorm > 0 else rnorm


def solve_with_hierarchy(hierarchy: Hierarchy, A: CsrMatrix, f, u0=None):
    """Stationary V-cycle iteration on a prebuilt hierarchy.

    Returns ``(u, residual_history, converged)``. Iterates while the relative
    residual (absolute when ``f == 0``) exceeds ``tol`` and fewer than
    ``N_max`` cycles have run.
    """
    cfg = hierarchy.config
    f = np.ascontiguousarray(f, dtype=np.float64)
    u = np.zeros(A.n_rows) if u0 is None else np.array(u0, dtype=np.float64, copy=True)
    fnorm = float(np.linalg.norm(f))
    rnorm = float(np.linalg.norm(f - spmv(A, u)))
    history = [rnorm]
    it = 0
    while it < cfg.N_max and _criterion(rnorm, fnorm) > cfg.tol:
        u = vcycle(0, u, f, hierarchy, cfg.nu1, cfg.nu2)
        rnorm = float(np.linalg.norm(f - spmv(A, u)))
        history.append(rnorm)
        it += 1
    return u, history, _criterion(rnorm, fnorm) <= cfg.tol


def amg_solve(A: CsrMatrix, f, u0=None, cfg: AmgConfig | None = None):
    """Set up the hierarchy for ``cfg.theta`` and iterate V-cycles to tolerance.

    Non-convergence within ``N_max`` cycles is reported through
    ``stats.converged`` rather than raised.
    """
    cfg = cfg or AmgConfig()
    t0 = time.perf_counter()
    H = setup_hierarchy(A, cfg)
    t1 = time.perf_counter()
    u, history, converged = solve_with_hierarchy(H, A, f, u0)
    t2 = time.perf_counter()
    n_it = len(history) - 1
    if n_it > 0 and history[0] > 0:
        rho = (history[-1] / history[0]) ** (1.0 / n_it)
    else:
        rho = float("nan")
    fnorm = float(np.linalg.norm(f))
    stats = SolveStats(
        iterations=n_it,
        residual_history=history,
        rho=float(rho),
        level_sizes=H.level_sizes,
        level_nnz=H.level_nnz,
        operator_complexity=H.operator_complexity,
        work_units=work_units(H, n_it, cfg.nu1, cfg.nu2),
        wall_seconds=t2 - t0,
        setup_seconds=t1 - t0,
        cycle_seconds=t2 - t1,
        converged=bool(converged),
        relative_residual=_criterion(history[-1], fnorm),
        theta=cfg.theta,
        extra={"truncation": H.truncated},
    )
    return u, stats

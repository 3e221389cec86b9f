"""Online threshold selection from a trained cost network.

A matrix is pooled once, the network is swept over a fine threshold grid,
and the predicted minimiser is used unless the network's own uncertainty
estimate says the prediction is not trustworthy, in which case the default
threshold is kept.
"""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .amg import AmgConfig, SolveStats, amg_solve
from .nn import NetworkParams, conv_features, head_forward, scalar_inputs
from .pooling import normalize, pool
from .sparse import CsrMatrix

__all__ = [
    "TUNE_GRID",
    "TunedCurve",
    "TuneResult",
    "CalibrationResult",
    "predict_curve",
    "sigma_hat",
    "select_theta",
    "elbow_index",
    "calibrate_sigma_bar",
    "tune_matrix",
    "ann_amg_solve",
]

# theta_j = j / 200 for j = 10..190
TUNE_INDEX = np.arange(10, 191)
TUNE_GRID = TUNE_INDEX / 200.0


@dataclass(frozen=True, eq=False)
class TunedCurve:
    theta: NDArray[np.float64]
    t_hat: NDArray[np.float64]
    sigma: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.theta)


@dataclass(eq=False)
class TuneResult:
    theta_star: float
    sigma_hat_value: float
    curve: TunedCurve
    used_default: bool
    default_theta: float
    sigma_bar: float
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "theta_star": self.theta_star,
            "sigma_hat": self.sigma_hat_value,
            "sigma_bar": self.sigma_bar,
            "used_default": self.used_default,
            "default_theta": self.default_theta,
            "seconds": self.seconds,
            "curve": {
                "theta": self.curve.theta.tolist(),
                "t_hat": self.curve.t_hat.tolist(),
                "sigma": self.curve.sigma.tolist(),
            },
        }

    def write_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_curve_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "t_hat", "sigma"])
            for row in zip(self.curve.theta, self.curve.t_hat, self.curve.sigma):
                w.writerow([repr(float(x)) for x in row])


@dataclass(eq=False)
class CalibrationResult:
    sigma_bar: float
    sorted_sigma: NDArray[np.float64]  # descending
    elbow: int
    problem_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"sigma_bar": self.sigma_bar, "elbow_index": self.elbow,
                "sorted_sigma_hat": self.sorted_sigma.tolist(), "problem_ids": self.problem_ids}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationResult":
        return cls(float(d["sigma_bar"]), np.asarray(d["sorted_sigma_hat"], dtype=np.float64),
                   int(d["elbow_index"]), list(d.get("problem_ids", [])))


def predict_curve(params: NetworkParams, V_hat, p, log2_n1, theta=TUNE_GRID) -> TunedCurve:
    """Evaluate the network at every threshold of ``theta`` for one image.

    The convolutional part runs once, in single precision; the dense part is
    batched over the grid in double precision.
    """
    V = np.asarray(V_hat, dtype=np.float64)
    if V.ndim == 3:
        V = V[None]
    theta = np.asarray(theta, dtype=np.float64)
    flat, _ = conv_features(params, V, dtype=np.float32)
    scal = scalar_inputs(params.spec, p, log2_n1, theta)
    t_hat, s_hat, _ = head_forward(params, flat, np.zeros(len(theta), dtype=np.int64), scal)
    return TunedCurve(theta.copy(), t_hat, s_hat)


def sigma_hat(curve: TunedCurve) -> float:
    """Uncertainty averaged over the grid, weighted by ``1 - t_hat`` so the
    region the network believes is cheap counts most."""
    return float(np.mean((1.0 - curve.t_hat) * curve.sigma))


def select_theta(curve: TunedCurve, sigma_bar: float, default_theta: float = 0.5) -> TuneResult:
    """Grid minimiser of the predicted cost, or ``default_theta`` when the
    averaged uncertainty exceeds ``sigma_bar``. Ties go to the smaller
    threshold."""
    s = sigma_hat(curve)
    if s > sigma_bar:
        return TuneResult(float(default_theta), s, curve, True, float(default_theta), float(sigma_bar))
    j = int(np.argmin(curve.t_hat))  # first occurrence; grid is ascending
    return TuneResult(float(curve.theta[j]), s, curve, False, float(default_theta), float(sigma_bar))


def elbow_index(values) -> int:
    """Index of the point farthest from the chord joining the first and last
    points of ``values`` (plotted against their index). Ties go to the first
    index after the start; lists of one or two points return 0."""
    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    if n <= 2:
        return 0
    x = np.arange(n, dtype=np.float64)
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    dist = np.abs(dy * (x - x[0]) - dx * (y - y[0])) / np.hypot(dx, dy)
    return 1 + int(np.argmax(dist[1:-1]))


def calibrate_sigma_bar(sigmas, problem_ids=None) -> CalibrationResult:
    """Pick the uncertainty threshold at the elbow of the descending sorted
    validation uncertainties."""
    s = np.asarray(sigmas, dtype=np.float64)
    if s.size == 0:
        raise ValueError("calibration needs at least one uncertainty value")
    order = np.argsort(-s, kind="stable")
    srt = s[order]
    k = elbow_index(srt)
    ids = [problem_ids[i] for i in order] if problem_ids is not None else []
    return CalibrationResult(float(srt[k]), srt, k, ids)


def tune_matrix(A: CsrMatrix, params: NetworkParams, sigma_bar: float, p: int = 1,
                default_theta: float = 0.5) -> TuneResult:
    """Pool, normalise, sweep and select for a single matrix."""
    t0 = time.perf_counter()
    V = normalize(pool(A, params.spec.m)).data
    # inputs are stored at float32 precision during training
    V = np.asarray(V, dtype=np.float32).astype(np.float64)
    curve = predict_curve(params, V, p, np.log2(A.n_rows))
    res = select_theta(curve, sigma_bar, default_theta)
    res.seconds = time.perf_counter() - t0
    return res


def ann_amg_solve(A: CsrMatrix, f, u0, params: NetworkParams, sigma_bar: float,
                  base_cfg: AmgConfig | None = None, p: int = 1,
                  default_theta: float = 0.5) -> tuple[NDArray[np.float64], SolveStats, TuneResult]:
    """Tune the strength threshold for ``A`` and solve with it."""
    cfg = base_cfg if base_cfg is not None else AmgConfig()
    res = tune_matrix(A, params, sigma_bar, p, default_theta)
    u, stats = amg_solve(A, f, u0, cfg.with_theta(res.theta_star))
    stats.tuner_seconds = res.seconds
    return u, stats, res

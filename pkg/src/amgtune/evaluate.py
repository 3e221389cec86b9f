"""Performance indices of the tuned solver against a fixed-threshold baseline."""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .amg import AmgConfig, amg_solve
from .dataset import ProblemCurve, TimingPolicy, measure_point
from .nn import NetworkParams
from .problems import ProblemInstance
from .tuner import tune_matrix

__all__ = [
    "PerfRecord",
    "Summary",
    "perf_indices",
    "aggregate",
    "solve_cost",
    "evaluate_problems",
    "write_report",
]


@dataclass(frozen=True)
class PerfRecord:
    problem_id: str
    t_ann: float
    t_base: float
    t_min: float
    theta_star: float = float("nan")
    used_default: bool = False

    @property
    def P(self) -> float:
        return 1.0 - self.t_ann / self.t_base

    @property
    def P_max(self) -> float:
        return 1.0 - self.t_min / self.t_base

    @property
    def ratio(self) -> float:
        """P / P_max; nan when the baseline already is the grid minimum."""
        pm = self.P_max
        return self.P / pm if pm != 0 else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(P=self.P, P_max=self.P_max, P_over_P_max=self.ratio)
        return d


def perf_indices(t_ann: float, t_base: float, t_min: float, problem_id: str = "",
                 theta_star: float = float("nan"), used_default: bool = False) -> PerfRecord:
    """``P = 1 - t_ann / t_base`` and ``P_max = 1 - t_min / t_base``."""
    if min(t_ann, t_base, t_min) <= 0:
        raise ValueError("all times must be positive")
    return PerfRecord(problem_id, float(t_ann), float(t_base), float(t_min),
                      float(theta_star), bool(used_default))


@dataclass(frozen=True)
class Summary:
    n: int
    PB: float  # fraction of problems with P >= 0
    P_mean: float
    P_median: float
    ratio_median: float
    baseline_theta: float = 0.5
    sigma_bar: float = float("nan")
    within_10pct: float = float("nan")  # fraction with t_ann <= 1.1 t_min

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(records: Sequence[PerfRecord], baseline_theta: float = 0.5,
              sigma_bar: float = float("nan")) -> Summary:
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    P = np.array([r.P for r in records])
    ratio = np.array([r.ratio for r in records])
    close = np.array([r.t_ann <= 1.1 * r.t_min for r in records])
    finite = ratio[np.isfinite(ratio)]
    return Summary(
        n=len(records),
        PB=float(np.mean(P >= 0)),
        P_mean=float(np.mean(P)),
        P_median=float(np.median(P)),
        ratio_median=float(np.median(finite)) if finite.size else float("nan"),
        baseline_theta=float(baseline_theta),
        sigma_bar=float(sigma_bar),
        within_10pct=float(np.mean(close)),
    )


def solve_cost(instance: ProblemInstance, cfg: AmgConfig, policy: TimingPolicy) -> float:
    """Cost of one solve under ``policy``: work units or mean wall time."""
    if policy.mode == "cost_model":
        return amg_solve(instance.A, instance.f, None, cfg)[1].work_units

    def run():
        t0 = time.perf_counter()
        amg_solve(instance.A, instance.f, None, cfg)
        return time.perf_counter() - t0

    return measure_point(run, policy)[0]


def _cost_on_curve(curve: ProblemCurve, theta: float):
    hit = np.flatnonzero(curve.theta_grid == theta)
    return float(curve.t_raw_mean[hit[0]]) if hit.size else None


def evaluate_problems(instances: Sequence[ProblemInstance], curves: Sequence[ProblemCurve],
                      params: NetworkParams, sigma_bar: float, cfg: AmgConfig,
                      policy: TimingPolicy, baseline_theta: float = 0.5) -> list[PerfRecord]:
    """Tune and cost every instance; ``curves`` supply the measured sweep
    (matched by problem id) from which ``t_min`` and, when the baseline lies
    on the grid, ``t_base`` are taken. Costs at thresholds found on the grid
    are reused in cost-model mode, which is deterministic."""
    by_id = {c.problem_id: c for c in curves}
    out = []
    for inst in instances:
        curve = by_id[inst.problem_id]
        res = tune_matrix(inst.A, params, sigma_bar, inst.p, baseline_theta)
        reuse = policy.mode == "cost_model"
        t_base = _cost_on_curve(curve, baseline_theta) if reuse else None
        if t_base is None:
            t_base = solve_cost(inst, cfg.with_theta(baseline_theta), policy)
        t_ann = _cost_on_curve(curve, res.theta_star) if reuse else None
        if t_ann is None:
            t_ann = solve_cost(inst, cfg.with_theta(res.theta_star), policy)
        t_min = min(float(curve.t_raw_mean.min()), t_base)
        out.append(perf_indices(t_ann, t_base, t_min, inst.problem_id, res.theta_star, res.used_default))
    return out


def write_report(directory: str | os.PathLike, summary: Summary, records: Sequence[PerfRecord]) -> None:
    """``report.json`` (summary + records), ``summary.csv`` (one row in the
    layout of a results table) and ``records.csv``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "report.json"), "w", encoding="utf-8") as fh:
        json.dump({"summary": summary.to_dict(), "records": [r.to_dict() for r in records]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(directory, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma_bar", "baseline_theta", "n", "PB", "P_mean", "P_median", "P_over_P_max_median"])
        w.writerow([summary.sigma_bar, summary.baseline_theta, summary.n, summary.PB,
                    summary.P_mean, summary.P_median, summary.ratio_median])
    with open(os.path.join(directory, "records.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["problem_id", "theta_star", "used_default", "t_ann", "t_base", "t_min",
                "P", "P_max", "P_over_P_max"]
        w.writerow(cols)
        for r in records:
            d = r.to_dict()
            w.writerow([d[c] for c in cols])

"""Offline cost measurement over the threshold grid."""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..amg import AmgConfig, amg_solve
from ..pooling import DEFAULT_M, normalize, pool
from ..problems import ProblemInstance
from .curves import THETA_GRID, ProblemCurve, normalize_curve, quantize_image
from .savgol import DEFAULT_DEGREE, DEFAULT_REVIEW_THRESHOLD, DEFAULT_WINDOW, savgol_smooth

__all__ = ["TimingPolicy", "RawCurve", "repeat_count", "measure_point", "measure_curve",
           "build_curve", "collect_curves", "machine_tag"]


def machine_tag() -> str:
    return os.environ.get("AMG_MACHINE_TAG", "")


@dataclass(frozen=True)
class TimingPolicy:
    mode: str = "cost_model"  # or "wallclock"
    r_min: int = 2
    r_max: int = 100
    budget_seconds: float = 60.0

    def __post_init__(self):
        if self.mode not in ("cost_model", "wallclock"):
            raise ValueError(f"unknown timing mode {self.mode!r}")
        if not 1 <= self.r_min <= self.r_max:
            raise ValueError("need 1 <= r_min <= r_max")
        if self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be positive")


def repeat_count(mean_first: float, policy: TimingPolicy) -> int:
    """Repetitions inversely proportional to the pilot mean, clamped."""
    if mean_first <= 0:
        return policy.r_max
    r = int(round(policy.budget_seconds / mean_first))
    return int(min(max(r, policy.r_min), policy.r_max))


def measure_point(run: Callable[[], float], policy: TimingPolicy) -> tuple[float, int]:
    """Mean of ``r`` calls of ``run``; ``r`` is fixed after two pilot calls."""
    samples = [run() for _ in range(policy.r_min)]
    r = repeat_count(float(np.mean(samples[:2])), policy)
    samples.extend(run() for _ in range(r - len(samples)))
    return float(np.mean(samples)), r


@dataclass
class RawCurve:
    theta: np.ndarray
    t_mean: np.ndarray
    repeats: np.ndarray
    iterations: np.ndarray
    nonconverged: np.ndarray
    mode: str
    extra: dict = field(default_factory=dict)


def measure_curve(instance: ProblemInstance, cfg_template: AmgConfig, policy: TimingPolicy,
                  theta_grid: Sequence[float] = THETA_GRID) -> RawCurve:
    """Cost of solving ``instance`` at every threshold of ``theta_grid``.

    ``cost_model`` records work units of a single (deterministic) solve;
    ``wallclock`` records the mean setup+solve time over the adaptive number
    of repetitions. Non-converged points keep their capped-iteration cost and
    are marked.
    """
    theta_grid = np.asarray(theta_grid, dtype=np.float64)
    k = len(theta_grid)
    t_mean = np.empty(k)
    repeats = np.ones(k, dtype=np.int64)
    iters = np.empty(k, dtype=np.int64)
    nonconv = np.zeros(k, dtype=bool)
    for q, theta in enumerate(theta_grid):
        cfg = cfg_template.with_theta(theta)
        if policy.mode == "cost_model":
            _, st = amg_solve(instance.A, instance.f, None, cfg)
            t_mean[q] = st.work_units
            iters[q], nonconv[q] = st.iterations, not st.converged
        else:
            last = {}

            def run():
                t0 = time.perf_counter()
                _, st = amg_solve(instance.A, instance.f, None, cfg)
                last["st"] = st
                return time.perf_counter() - t0

            t_mean[q], repeats[q] = measure_point(run, policy)
            iters[q], nonconv[q] = last["st"].iterations, not last["st"].converged
    return RawCurve(theta_grid, t_mean, repeats, iters, nonconv, policy.mode)


def build_curve(instance: ProblemInstance, raw: RawCurve, m: int = DEFAULT_M,
                window: int = DEFAULT_WINDOW, degree: int = DEFAULT_DEGREE,
                review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
                tag: str | None = None) -> ProblemCurve:
    """Smooth, normalise and attach the pooled image of the matrix."""
    smoothed, flag = savgol_smooth(raw.t_mean, window, degree, review_threshold)
    normalized, degenerate = normalize_curve(smoothed)
    V_hat = quantize_image(normalize(pool(instance.A, m)).data)
    return ProblemCurve(
        problem_id=instance.problem_id,
        base_problem_id=instance.base_problem_id,
        renumbering=instance.renumbering,
        V_hat=V_hat,
        p=instance.p,
        log2_n1=float(np.log2(instance.n)),
        theta_grid=raw.theta.copy(),
        t_raw_mean=raw.t_mean.copy(),
        t_smoothed=smoothed,
        t_normalized=normalized,
        review_flag=bool(flag or degenerate),
        degenerate=degenerate,
        machine_tag=machine_tag() if tag is None else tag,
        nonconverged=raw.nonconverged.copy(),
        timing_mode=raw.mode,
    )


def _collect_one(args):
    inst, cfg, policy, m, window, degree, thr, tag = args
    raw = measure_curve(inst, cfg, policy)
    return build_curve(inst, raw, m, window, degree, thr, tag)


def collect_curves(instances: Sequence[ProblemInstance], cfg_template: AmgConfig,
                   policy: TimingPolicy, m: int = DEFAULT_M, window: int = DEFAULT_WINDOW,
                   degree: int = DEFAULT_DEGREE,
                   review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
                   workers: int = 1, tag: str | None = None,
                   progress: Callable[[int, int], None] | None = None) -> list[ProblemCurve]:
    """Measure and package every instance; output order follows the input.

    Wall-clock collection always runs serially so solves do not perturb each
    other's timings.
    """
    tag = machine_tag() if tag is None else tag
    jobs = [(inst, cfg_template, policy, m, window, degree, review_threshold, tag)
            for inst in instances]
    if workers > 1 and policy.mode == "cost_model":
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_collect_one, jobs))
    out = []
    for i, job in enumerate(jobs):
        out.append(_collect_one(job))
        if progress:
            progress(i + 1, len(jobs))
    return out

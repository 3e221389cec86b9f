"""Per-problem cost curves: the unit of the training dataset."""
from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "THETA_GRID",
    "SCHEMA_VERSION",
    "ProblemCurve",
    "SplitSpec",
    "DatasetFormatError",
    "normalize_curve",
    "split_dataset",
    "write_dataset",
    "read_dataset",
    "quantize_image",
]

# 37 equispaced thresholds 0.05, 0.075, ..., 0.95; (k + 2) / 40 keeps 0.5 exact
THETA_GRID = (np.arange(37) + 2) / 40.0
SCHEMA_VERSION = 1


class DatasetFormatError(ValueError):
    pass


def quantize_image(V: NDArray) -> NDArray[np.float64]:
    """Round to float32, the storage precision of network inputs."""
    return np.asarray(V, dtype=np.float32).astype(np.float64)


@dataclass(eq=False)
class ProblemCurve:
    problem_id: str
    base_problem_id: str
    renumbering: str
    V_hat: NDArray[np.float64]  # (4, m, m), float32-representable
    p: int
    log2_n1: float
    theta_grid: NDArray[np.float64]
    t_raw_mean: NDArray[np.float64]
    t_smoothed: NDArray[np.float64]
    t_normalized: NDArray[np.float64]
    review_flag: bool = False
    degenerate: bool = False
    machine_tag: str = ""
    nonconverged: NDArray[np.bool_] = field(default=None)
    timing_mode: str = "cost_model"

    def __post_init__(self):
        k = len(self.theta_grid)
        if self.nonconverged is None:
            self.nonconverged = np.zeros(k, dtype=bool)

    @property
    def n1(self) -> int:
        return int(round(2.0 ** self.log2_n1))

    def validate(self) -> None:
        k = len(self.theta_grid)
        for name in ("t_raw_mean", "t_smoothed", "t_normalized", "nonconverged"):
            if len(getattr(self, name)) != k:
                raise DatasetFormatError(f"{self.problem_id}: {name} not aligned with theta grid")
        tn = self.t_normalized
        if self.degenerate:
            if np.any(tn != 0) or not self.review_flag:
                raise DatasetFormatError(f"{self.problem_id}: degenerate curve must be zero and flagged")
        elif tn.min() != 0.0 or tn.max() != 1.0 or np.any((tn < 0) | (tn > 1)):
            raise DatasetFormatError(f"{self.problem_id}: normalized curve must span [0, 1]")
        if np.any(self.t_smoothed <= 0) and not self.review_flag:
            raise DatasetFormatError(f"{self.problem_id}: nonpositive smoothing must be flagged")
        if self.V_hat.ndim != 3 or self.V_hat.shape[0] != 4 or self.V_hat.shape[1] != self.V_hat.shape[2]:
            raise DatasetFormatError(f"{self.problem_id}: V_hat must have shape (4, m, m)")

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "problem_id": self.problem_id,
            "base_problem_id": self.base_problem_id,
            "renumbering": self.renumbering,
            "V_hat": _encode(self.V_hat),
            "p": int(self.p),
            "log2_n1": float(self.log2_n1),
            "theta_grid": [float(x) for x in self.theta_grid],
            "t_raw_mean": [float(x) for x in self.t_raw_mean],
            "t_smoothed": [float(x) for x in self.t_smoothed],
            "t_normalized": [float(x) for x in self.t_normalized],
            "review_flag": bool(self.review_flag),
            "degenerate": bool(self.degenerate),
            "machine_tag": self.machine_tag,
            "nonconverged": [bool(x) for x in self.nonconverged],
            "timing_mode": self.timing_mode,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ProblemCurve":
        version = rec.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DatasetFormatError(f"unsupported dataset schema_version {version!r}")
        c = cls(
            problem_id=rec["problem_id"],
            base_problem_id=rec["base_problem_id"],
            renumbering=rec["renumbering"],
            V_hat=_decode(rec["V_hat"]),
            p=int(rec["p"]),
            log2_n1=float(rec["log2_n1"]),
            theta_grid=np.asarray(rec["theta_grid"], dtype=np.float64),
            t_raw_mean=np.asarray(rec["t_raw_mean"], dtype=np.float64),
            t_smoothed=np.asarray(rec["t_smoothed"], dtype=np.float64),
            t_normalized=np.asarray(rec["t_normalized"], dtype=np.float64),
            review_flag=bool(rec["review_flag"]),
            degenerate=bool(rec.get("degenerate", False)),
            machine_tag=rec.get("machine_tag", ""),
            nonconverged=np.asarray(rec["nonconverged"], dtype=bool),
            timing_mode=rec.get("timing_mode", "cost_model"),
        )
        c.validate()
        return c


def _encode(arr: NDArray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f4")
    return {"dtype": "<f4", "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict) -> NDArray[np.float64]:
    if obj.get("dtype") != "<f4":
        raise DatasetFormatError(f"unsupported tensor dtype {obj.get('dtype')!r}")
    shape = tuple(int(s) for s in obj["shape"])
    try:
        raw = base64.b64decode(obj["data"], validate=True)
    except (ValueError, TypeError) as exc:
        raise DatasetFormatError("tensor payload is not valid base64") from exc
    if len(raw) != 4 * int(np.prod(shape)):
        raise DatasetFormatError(
            f"tensor payload has {len(raw)} bytes, shape {shape} needs {4 * int(np.prod(shape))}")
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)


def normalize_curve(smoothed) -> tuple[NDArray[np.float64], bool]:
    """Min-max scale to [0, 1]. A flat curve maps to zeros and reports
    ``degenerate=True``; spreads at roundoff level relative to the values
    count as flat."""
    t = np.asarray(smoothed, dtype=np.float64)
    lo, hi = t.min(), t.max()
    if hi - lo <= 64 * np.finfo(np.float64).eps * max(abs(lo), abs(hi)):
        return np.zeros_like(t), True
    out = (t - lo) / (hi - lo)
    # pin the extremes exactly despite rounding
    out[t == lo] = 0.0
    out[t == hi] = 1.0
    return np.clip(out, 0.0, 1.0), False


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.2
    val: float = 0.2
    test: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if min(self.train, self.val, self.test) < 0 or abs(self.train + self.val + self.test - 1) > 1e-9:
            raise ValueError("split fractions must be nonnegative and sum to one")


def split_dataset(curves, spec: SplitSpec = SplitSpec()):
    """Partition by base problem so renumbered twins stay together.

    Bases are sorted, shuffled with ``spec.seed``, then cut with
    ``floor(fraction * n)`` for train and validation; the rest is test.
    """
    bases = sorted({c.base_problem_id for c in curves})
    order = np.random.default_rng(spec.seed).permutation(len(bases))
    shuffled = [bases[i] for i in order]
    n_train = int(np.floor(spec.train * len(bases) + 1e-9))
    n_val = int(np.floor(spec.val * len(bases) + 1e-9))
    groups = {b: 0 for b in shuffled[:n_train]}
    groups.update({b: 1 for b in shuffled[n_train:n_train + n_val]})
    groups.update({b: 2 for b in shuffled[n_train + n_val:]})
    parts = ([], [], [])
    for c in curves:
        parts[groups[c.base_problem_id]].append(c)
    return parts


def write_dataset(path: str | os.PathLike, curves) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in curves:
            fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def read_dataset(path: str | os.PathLike) -> list[ProblemCurve]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid JSON") from exc
            out.append(ProblemCurve.from_record(rec))
    return out

"""Minibatch training with Adam and plateau-based learning-rate halving."""
from __future__ import annotations

import csv
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .network import (
    NetworkParams,
    NetworkSpec,
    conv_features,
    he_init,
    head_backward,
    head_forward,
    loss,
    loss_and_grad,
    loss_grad_outputs,
    scalar_inputs,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "PlateauSchedule",
    "SampleSet",
    "TrainingError",
    "History",
    "adam_update",
    "train_step",
    "train",
    "evaluate_loss",
    "predict_samples",
    "write_history_csv",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 32
    plateau_patience: int = 15
    plateau_factor: float = 0.5
    max_epochs: int = 200
    seed: int = 0
    freeze_conv: bool = False
    cache_features: bool = True  # with freeze_conv, run conv once per image
    include_flagged: bool = False
    time_limit_seconds: float | None = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.plateau_patience < 1 or not 0 < self.plateau_factor < 1:
            raise ValueError("invalid plateau schedule")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: dict[str, NDArray[np.float64]]
    v: dict[str, NDArray[np.float64]]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.arrays.items()},
                   {k: np.zeros_like(a) for k, a in params.arrays.items()})


def adam_update(params: NetworkParams, adam: AdamState, grads: dict, lr: float) -> None:
    """In-place bias-corrected Adam step on the arrays present in ``grads``."""
    adam.step += 1
    b1, b2 = adam.beta1, adam.beta2
    c1 = 1.0 - b1 ** adam.step
    c2 = 1.0 - b2 ** adam.step
    for name, g in grads.items():
        m = adam.m[name]
        v = adam.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params.arrays[name] -= lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)


@dataclass
class PlateauSchedule:
    """Multiply the rate by ``factor`` after ``patience`` epochs without a
    strict improvement of the monitored loss."""
    lr: float
    patience: int = 15
    factor: float = 0.5
    best: float = np.inf
    wait: int = 0

    def update(self, value: float) -> bool:
        """Record one epoch; returns True when ``value`` is a new best."""
        if value < self.best:
            self.best = value
            self.wait = 0
            return True
        self.wait += 1
        if self.wait >= self.patience:
            self.lr *= self.factor
            self.wait = 0
        return False


@dataclass(eq=False)
class SampleSet:
    """Curves flattened into (image, scalars) -> target samples."""
    images: NDArray[np.float64]  # (U, 4, m, m)
    image_index: NDArray[np.int64]  # (S,)
    scalars: NDArray[np.float64]  # (S, n_scalars)
    targets: NDArray[np.float64]  # (S,)

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def from_curves(cls, curves: Sequence, spec: NetworkSpec) -> "SampleSet":
        if not curves:
            return cls(np.zeros((0, 4, spec.m, spec.m)), np.zeros(0, dtype=np.int64),
                       np.zeros((0, spec.n_scalars)), np.zeros(0))
        images = np.stack([np.asarray(c.V_hat, dtype=np.float64) for c in curves])
        if images.shape[1:] != (4, spec.m, spec.m):
            raise ValueError(f"curve images have shape {images.shape[1:]}, spec expects m={spec.m}")
        idx, scal, tgt = [], [], []
        for u, c in enumerate(curves):
            k = len(c.theta_grid)
            idx.append(np.full(k, u, dtype=np.int64))
            scal.append(scalar_inputs(spec, np.full(k, c.p), np.full(k, c.log2_n1), c.theta_grid))
            tgt.append(np.asarray(c.t_normalized, dtype=np.float64))
        return cls(images, np.concatenate(idx), np.concatenate(scal), np.concatenate(tgt))


def _select(curves, include_flagged):
    return [c for c in curves if include_flagged or not c.review_flag]


def train_step(params: NetworkParams, adam: AdamState, batch, cfg: TrainConfig, lr: float | None = None,
               features: NDArray[np.float64] | None = None) -> float:
    """One optimisation step on ``batch = (images, image_index, scalars, targets)``.

    With ``features`` (cached conv outputs, one row per image of the batch)
    only the dense part is evaluated; conv arrays are never updated when
    ``cfg.freeze_conv`` is set. Returns the batch loss before the update.
    """
    images, image_index, scalars, targets = batch
    if features is not None:
        if not cfg.freeze_conv:
            raise ValueError("cached conv features require freeze_conv")
        t_hat, s_hat, cache = head_forward(params, features, image_index, scalars)
        value = loss(targets, t_hat, s_hat)
        dt, ds = loss_grad_outputs(targets, t_hat, s_hat)
        _, grads = head_backward(params, dt, ds, cache, need_dflat=False)
    else:
        value, grads = loss_and_grad(params, images, image_index, scalars, targets,
                                     freeze_conv=cfg.freeze_conv)
    if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
        raise TrainingError(f"non-finite loss {value!r} at step {adam.step + 1}; "
                            f"non-finite gradients in {bad}")
    if cfg.freeze_conv:
        grads = {k: g for k, g in grads.items() if not params.is_conv(k)}
    adam_update(params, adam, grads, cfg.lr if lr is None else lr)
    return value


def _all_features(params: NetworkParams, images, chunk: int = 64):
    if len(images) == 0:
        return np.zeros((0, params.spec.flat_size))
    return np.concatenate([conv_features(params, images[i:i + chunk])[0]
                           for i in range(0, len(images), chunk)])


def predict_samples(params: NetworkParams, data: SampleSet, features=None):
    """Predictions for every sample of ``data``."""
    if features is None:
        features = _all_features(params, data.images)
    t_hat, s_hat, _ = head_forward(params, features, data.image_index, data.scalars)
    return t_hat, s_hat


def evaluate_loss(params: NetworkParams, data: SampleSet, features=None) -> float:
    t_hat, s_hat = predict_samples(params, data, features)
    return loss(data.targets, t_hat, s_hat)


@dataclass
class History:
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    step_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    seconds: float = 0.0
    stopped_early: bool = False

    def rows(self):
        return list(zip(self.epoch, self.train_loss, self.val_loss, self.lr))


def write_history_csv(path: str | os.PathLike, history: History) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for e, tr, va, lr in history.rows():
            w.writerow([e, repr(float(tr)), repr(float(va)), repr(float(lr))])


def train(train_curves: Sequence, val_curves: Sequence, spec: NetworkSpec, cfg: TrainConfig,
          init: NetworkParams | None = None,
          progress: Callable[[int, float, float, float], None] | None = None
          ) -> tuple[NetworkParams, History]:
    """Fit the network and return the parameters with the best validation loss.

    Samples are reshuffled every epoch from a generator seeded by
    ``cfg.seed``. The learning rate is multiplied by ``plateau_factor`` each
    time the validation loss has not improved for ``plateau_patience``
    consecutive epochs. Curves with ``review_flag`` are skipped unless
    ``cfg.include_flagged``.
    """
    tr = SampleSet.from_curves(_select(train_curves, cfg.include_flagged), spec)
    va = SampleSet.from_curves(_select(val_curves, cfg.include_flagged), spec)
    if len(tr) == 0 or len(va) == 0:
        raise ValueError("training and validation sets must be nonempty")
    params = he_init(spec, cfg.seed) if init is None else init.copy()
    if params.spec != spec:
        raise ValueError("initial parameters were built for a different network spec")
    params.check()
    adam = AdamState.zeros_like(params)
    rng = np.random.default_rng(cfg.seed)
    cached = cfg.freeze_conv and cfg.cache_features
    tr_feat = _all_features(params, tr.images) if cached else None
    va_feat = _all_features(params, va.images) if cached else None

    hist = History()
    sched = PlateauSchedule(cfg.lr, cfg.plateau_patience, cfg.plateau_factor)
    best_params = params.copy()
    t0 = time.perf_counter()
    lr = sched.lr
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(tr))
        total = 0.0
        for s in range(0, len(order), cfg.batch):
            sel = order[s:s + cfg.batch]
            uniq, inv = np.unique(tr.image_index[sel], return_inverse=True)
            batch = (tr.images[uniq], inv, tr.scalars[sel], tr.targets[sel])
            value = train_step(params, adam, batch, cfg, lr,
                               features=tr_feat[uniq] if cached else None)
            hist.step_loss.append(value)
            total += value * len(sel)
        val = evaluate_loss(params, va, va_feat)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        hist.epoch.append(epoch)
        hist.train_loss.append(total / len(tr))
        hist.val_loss.append(val)
        hist.lr.append(lr)
        if progress:
            progress(epoch, total / len(tr), val, lr)
        if sched.update(val):
            best_params = params.copy()
            hist.best_epoch = epoch
        lr = sched.lr
        if cfg.time_limit_seconds is not None and time.perf_counter() - t0 > cfg.time_limit_seconds:
            hist.stopped_early = True
            break
    hist.seconds = time.perf_counter() - t0
    return best_params, hist

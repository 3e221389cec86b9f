"""Convolutional regression network predicting a normalised solve cost and
its uncertainty from a pooled matrix image plus a few scalars."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import layers as L

__all__ = [
    "ConvBlock",
    "NetworkSpec",
    "NetworkParams",
    "he_init",
    "scalar_inputs",
    "conv_features",
    "conv_features_backward",
    "head_forward",
    "head_backward",
    "forward",
    "forward_batch",
    "loss",
    "loss_and_grad",
    "loss_grad_outputs",
]

HEAD_T_BIAS = 0.5


@dataclass(frozen=True)
class ConvBlock:
    filters: int = 64
    layers: int = 3
    kernel_size: int = 6

    def to_dict(self) -> dict:
        return {"filters": self.filters, "layers": self.layers, "kernel_size": self.kernel_size}


@dataclass(frozen=True)
class NetworkSpec:
    m: int = 75
    conv_blocks: tuple[ConvBlock, ...] = (ConvBlock(),)
    cnn_output_size: int = 256
    dense_widths: tuple[int, ...] = (512, 512)
    include_p: bool = True

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks", tuple(
            b if isinstance(b, ConvBlock) else ConvBlock(**b) for b in self.conv_blocks))
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))
        if not 1 <= len(self.conv_blocks) <= 3:
            raise ValueError("need one to three convolutional blocks")
        for b in self.conv_blocks:
            if min(b.filters, b.layers, b.kernel_size) < 1:
                raise ValueError(f"conv block sizes must be positive: {b}")
        if self.m < 2 ** len(self.conv_blocks):
            raise ValueError(f"m={self.m} too small for {len(self.conv_blocks)} max-pool stages")
        if self.cnn_output_size < 1 or any(w < 1 for w in self.dense_widths):
            raise ValueError("layer widths must be positive")

    @property
    def n_scalars(self) -> int:
        return 3 if self.include_p else 2

    @property
    def flat_size(self) -> int:
        side = self.m
        for _ in self.conv_blocks:
            side //= 2
        return self.conv_blocks[-1].filters * side * side

    def conv_layer_names(self) -> list[str]:
        return [f"conv{b}_{l}" for b, blk in enumerate(self.conv_blocks) for l in range(blk.layers)]

    def dense_layer_names(self) -> list[str]:
        return ["cnn_out"] + [f"dense{i}" for i in range(len(self.dense_widths))] + ["head"]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        ch = 4
        for b, blk in enumerate(self.conv_blocks):
            for l in range(blk.layers):
                k = blk.kernel_size
                shapes[f"conv{b}_{l}/W"] = (blk.filters, ch, k, k)
                shapes[f"conv{b}_{l}/b"] = (blk.filters,)
                ch = blk.filters
        widths = [self.flat_size, self.cnn_output_size]
        shapes["cnn_out/W"] = (widths[0], widths[1])
        shapes["cnn_out/b"] = (widths[1],)
        prev = self.cnn_output_size + self.n_scalars
        for i, w in enumerate(self.dense_widths):
            shapes[f"dense{i}/W"] = (prev, w)
            shapes[f"dense{i}/b"] = (w,)
            prev = w
        shapes["head/W"] = (prev, 2)
        shapes["head/b"] = (2,)
        return shapes

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "conv_blocks": [b.to_dict() for b in self.conv_blocks],
            "cnn_output_size": self.cnn_output_size,
            "dense_widths": list(self.dense_widths),
            "include_p": self.include_p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            m=int(d["m"]),
            conv_blocks=tuple(ConvBlock(**b) for b in d["conv_blocks"]),
            cnn_output_size=int(d["cnn_output_size"]),
            dense_widths=tuple(d["dense_widths"]),
            include_p=bool(d["include_p"]),
        )


@dataclass(eq=False)
class NetworkParams:
    spec: NetworkSpec
    arrays: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> NDArray[np.float64]:
        return self.arrays[name]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, {k: v.copy() for k, v in self.arrays.items()})

    def is_conv(self, name: str) -> bool:
        return name.startswith("conv")

    def check(self) -> None:
        expected = self.spec.param_shapes()
        missing = sorted(set(expected) - set(self.arrays))
        if missing:
            raise KeyError(f"missing parameter arrays: {missing}")
        extra = sorted(set(self.arrays) - set(expected))
        if extra:
            raise KeyError(f"unexpected parameter arrays: {extra}")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ValueError(f"{name}: shape {self.arrays[name].shape} does not match spec {shape}")


def he_init(spec: NetworkSpec, seed: int = 0) -> NetworkParams:
    """Weights ~ N(0, 2 / fan_in) and zero biases for every hidden layer.

    The output head starts at zero weights with the cost bias at 0.5, so
    every sample begins inside the live range of the clamp; with random
    head weights the scalar inputs routinely push the cost output below
    zero where it receives no gradient.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith("/b") or name == "head/W":
            arrays[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            arrays[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    arrays["head/b"][0] = HEAD_T_BIAS
    return NetworkParams(spec, arrays)


def scalar_inputs(spec: NetworkSpec, p, log2_n1, theta) -> NDArray[np.float64]:
    """Stack the scalar features into shape ``(B, n_scalars)``; scalars
    broadcast against each other."""
    cols = [log2_n1, theta]
    if spec.include_p:
        cols.insert(0, p)
    cols = np.broadcast_arrays(*[np.asarray(c, dtype=np.float64) for c in cols])
    return np.stack([c.reshape(-1) for c in cols], axis=1)


def conv_features(params: NetworkParams, images: NDArray[np.float64], dtype=np.float64):
    """Run the convolutional blocks on ``(U, 4, m, m)`` images and flatten.

    ``dtype=np.float32`` trades about seven significant digits for roughly
    half the time; it is meant for inference, gradients need float64.
    """
    spec = params.spec
    if images.ndim != 4 or images.shape[1:] != (4, spec.m, spec.m):
        raise ValueError(f"expected images of shape (U, 4, {spec.m}, {spec.m}), got {images.shape}")
    x = np.asarray(images, dtype=dtype)
    cache = []
    for b, blk in enumerate(spec.conv_blocks):
        for l in range(blk.layers):
            name = f"conv{b}_{l}"
            z, cc = L.conv2d_forward(x, params[name + "/W"].astype(dtype, copy=False),
                                     params[name + "/b"].astype(dtype, copy=False))
            x = L.relu(z)
            cache.append(("conv", name, cc, z))
        x, pc = L.maxpool2_forward(x)
        cache.append(("pool", None, pc, None))
    return x.reshape(len(images), -1).astype(np.float64, copy=False), (cache, x.shape)


def conv_features_backward(params: NetworkParams, dflat, cache, grads: dict) -> None:
    layers, shape = cache
    dx = dflat.reshape(shape)
    first = layers[0][1]
    for kind, name, cc, z in reversed(layers):
        if kind == "pool":
            dx = L.maxpool2_backward(dx, cc)
        else:
            dz = dx * (z > 0)
            dx, dW, db = L.conv2d_backward(dz, cc, need_dx=name != first)
            grads[name + "/W"] = dW
            grads[name + "/b"] = db


def head_forward(params: NetworkParams, flat, image_index, scalars):
    """Dense part: per-image CNN output, then per-sample dense stack.

    ``image_index[i]`` selects the row of ``flat`` belonging to sample ``i``.
    """
    spec = params.spec
    zc, xc = L.dense_forward(flat, params["cnn_out/W"], params["cnn_out/b"])
    y_cnn = L.relu(zc)
    h = np.concatenate([y_cnn[image_index], scalars], axis=1)
    cache = {"zc": zc, "xc": xc, "image_index": image_index, "n_images": len(flat), "dense": []}
    for i in range(len(spec.dense_widths)):
        name = f"dense{i}"
        z, xin = L.dense_forward(h, params[name + "/W"], params[name + "/b"])
        cache["dense"].append((name, xin, z))
        h = L.relu(z)
    z_out, xin = L.dense_forward(h, params["head/W"], params["head/b"])
    cache["head_in"] = xin
    cache["z_out"] = z_out
    t_hat = L.clamp01(z_out[:, 0])
    sigma_hat = L.softplus(z_out[:, 1])
    return t_hat, sigma_hat, cache


def head_backward(params: NetworkParams, dt, ds, cache, need_dflat: bool = True):
    grads: dict[str, NDArray[np.float64]] = {}
    z_out = cache["z_out"]
    zt = z_out[:, 0]
    dz = np.stack([dt * ((zt > 0) & (zt < 1)), ds * L.sigmoid(z_out[:, 1])], axis=1)
    dh, grads["head/W"], grads["head/b"] = L.dense_backward(dz, cache["head_in"], params["head/W"])
    for name, xin, z in reversed(cache["dense"]):
        dz = dh * (z > 0)
        dh, grads[name + "/W"], grads[name + "/b"] = L.dense_backward(dz, xin, params[name + "/W"])
    n_cnn = params.spec.cnn_output_size
    dy = np.zeros((cache["n_images"], n_cnn))
    np.add.at(dy, cache["image_index"], dh[:, :n_cnn])
    dzc = dy * (cache["zc"] > 0)
    dflat, grads["cnn_out/W"], grads["cnn_out/b"] = L.dense_backward(
        dzc, cache["xc"], params["cnn_out/W"], need_dx=need_dflat)
    return dflat, grads


def forward_batch(params: NetworkParams, images, image_index, scalars):
    """Batched forward pass. Convolutions run once per distinct image."""
    flat, ccache = conv_features(params, np.asarray(images, dtype=np.float64))
    t_hat, sigma_hat, hcache = head_forward(params, flat, np.asarray(image_index), scalars)
    return t_hat, sigma_hat, (ccache, hcache)


def forward(params: NetworkParams, V_hat, p, log2_n1, theta):
    """Evaluate the network on one pooled image and one or more thresholds.

    Returns ``(t_hat, sigma_hat, cache)`` with one entry per threshold.
    """
    V = np.asarray(V_hat, dtype=np.float64)
    if V.ndim == 3:
        V = V[None]
    scal = scalar_inputs(params.spec, p, log2_n1, theta)
    return forward_batch(params, V, np.zeros(len(scal), dtype=np.int64), scal)


def loss(t_true, t_hat, sigma_hat) -> float:
    """Mean over the batch of ``e**2 + (sigma**2 - e**2)**2`` with
    ``e = t - t_hat``."""
    e2 = (np.asarray(t_true) - t_hat) ** 2
    return float(np.mean(e2 + (np.asarray(sigma_hat) ** 2 - e2) ** 2))


def loss_grad_outputs(t_true, t_hat, sigma_hat):
    e = np.asarray(t_true) - t_hat
    gap = sigma_hat ** 2 - e ** 2
    n = len(e)
    dt = (-2.0 * e + 4.0 * e * gap) / n
    ds = 4.0 * sigma_hat * gap / n
    return dt, ds


def loss_and_grad(params: NetworkParams, images, image_index, scalars, t_true,
                  freeze_conv: bool = False):
    """Loss and gradients of every trainable array (conv arrays omitted when
    ``freeze_conv``)."""
    flat, ccache = conv_features(params, np.asarray(images, dtype=np.float64))
    t_hat, s_hat, hcache = head_forward(params, flat, np.asarray(image_index), scalars)
    value = loss(t_true, t_hat, s_hat)
    dt, ds = loss_grad_outputs(t_true, t_hat, s_hat)
    dflat, grads = head_backward(params, dt, ds, hcache, need_dflat=not freeze_conv)
    if not freeze_conv:
        conv_features_backward(params, dflat, ccache, grads)
    return value, grads

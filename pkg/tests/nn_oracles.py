"""Finite-difference gradient check shared by unit and acceptance tests."""
import numpy as np

from amgtune.nn import ConvBlock, NetworkSpec, he_init, loss_and_grad

GRADCHECK_SPEC = NetworkSpec(m=8, conv_blocks=(ConvBlock(3, 2, 3),), cnn_output_size=6,
                             dense_widths=(5, 4), include_p=True)


def gradcheck_problem(seed, spec=GRADCHECK_SPEC):
    """Parameters and a small batch kept away from ReLU and clamp kinks.

    Biases get a random offset so no pre-activation sits exactly at zero, and
    the head is scaled down so the cost output stays inside (0, 1).
    """
    params = he_init(spec, seed)
    r = np.random.default_rng(seed + 7)
    for k in params.arrays:
        if k.endswith("/b"):
            params.arrays[k] = params.arrays[k] + r.normal(0, 0.1, params.arrays[k].shape)
    params.arrays["head/W"] *= 0.2
    rng = np.random.default_rng(100 + seed)
    images = rng.normal(size=(2, 4, spec.m, spec.m))
    idx = np.array([0, 1, 1, 0, 1])
    scal = np.column_stack([np.ones(5), rng.uniform(3, 6, 5), rng.uniform(0.05, 0.95, 5)])
    if not spec.include_p:
        scal = scal[:, 1:]
    targets = rng.uniform(0, 1, 5)
    return params, images, idx, scal, targets


def gradcheck(seed, h=1e-6, spec=GRADCHECK_SPEC):
    """Largest relative error ``|fd - g| / max(|fd|, |g|)`` over parameter
    groups, comparing analytic gradients with central differences."""
    params, images, idx, scal, t = gradcheck_problem(seed, spec)
    _, grads = loss_and_grad(params, images, idx, scal, t)
    worst = 0.0
    for name, a in params.arrays.items():
        fd = np.zeros_like(a)
        for i in np.ndindex(a.shape):
            old = a[i]
            a[i] = old + h
            lp, _ = loss_and_grad(params, images, idx, scal, t)
            a[i] = old - h
            lm, _ = loss_and_grad(params, images, idx, scal, t)
            a[i] = old
            fd[i] = (lp - lm) / (2 * h)
        g = grads[name]
        denom = max(np.linalg.norm(fd), np.linalg.norm(g))
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(fd - g) / denom))
    return worst

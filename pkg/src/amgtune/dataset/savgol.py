from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = ["savgol_smooth", "review_curve", "DEFAULT_WINDOW", "DEFAULT_DEGREE",
           "DEFAULT_REVIEW_THRESHOLD"]

DEFAULT_WINDOW = 21
DEFAULT_DEGREE = 7
DEFAULT_REVIEW_THRESHOLD = 0.05


def _fit_weights(offsets: NDArray[np.float64], degree: int) -> NDArray[np.float64]:
    # Row of the pseudo-inverse that returns the fitted value at offset 0.
    scale = max(np.abs(offsets).max(), 1.0)
    V = np.vander(offsets / scale, degree + 1, increasing=True)
    return np.linalg.pinv(V)[0]


def review_curve(raw, smoothed, threshold: float = DEFAULT_REVIEW_THRESHOLD) -> bool:
    """True when the smoothed curve leaves the positive half-line or moves
    the minimum by more than ``threshold`` times the raw range."""
    raw = np.asarray(raw, dtype=np.float64)
    smoothed = np.asarray(smoothed, dtype=np.float64)
    if np.any(smoothed <= 0):
        return True
    span = raw.max() - raw.min()
    # the filter's own roundoff must not trip the rule on flat curves
    slack = 64 * np.finfo(np.float64).eps * np.abs(raw).max()
    return bool(abs(smoothed.min() - raw.min()) > max(threshold * span, slack))


def savgol_smooth(curve: ArrayLike, window: int = DEFAULT_WINDOW, degree: int = DEFAULT_DEGREE,
                  review_threshold: float = DEFAULT_REVIEW_THRESHOLD
                  ) -> tuple[NDArray[np.float64], bool]:
    """Savitzky-Golay smoothing of a uniformly sampled curve.

    Every sample is replaced by the value at its own position of the
    least-squares polynomial of degree ``degree`` fitted over the centred
    window. Near the ends the window is truncated to the available samples
    and refitted (degree capped at points - 1); no padding is invented.

    Returns
    -------
    smoothed : ndarray
    review_flag : bool
        See :func:`review_curve`.
    """
    y = np.asarray(curve, dtype=np.float64)
    n = len(y)
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if degree >= window:
        raise ValueError("degree must be smaller than window")
    if window > n:
        raise ValueError(f"window {window} longer than curve ({n} samples)")
    half = window // 2
    out = np.empty(n)
    full = _fit_weights(np.arange(-half, half + 1, dtype=np.float64), degree)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        if hi - lo == window:
            out[i] = full @ y[lo:hi]
        else:
            offs = np.arange(lo - i, hi - i, dtype=np.float64)
            out[i] = _fit_weights(offs, min(degree, hi - lo - 1)) @ y[lo:hi]
    return out, review_curve(y, out, review_threshold)

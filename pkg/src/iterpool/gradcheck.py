"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

# f maps a flat float64 parameter vector to (scalar loss, flat analytic gradient)
LossAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def grad_check(f: LossAndGrad, x0: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Evaluates in float64; rel err per coordinate is |a - n| / max(|a|, |n|, 1e-8).
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    _, analytic = f(x0)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if analytic.shape != x0.shape:
        raise ValueError("analytic gradient length must match parameter vector")
    numeric = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xp[i] += eps
        fp, _ = f(xp)
        xm = x0.copy()
        xm[i] -= eps
        fm, _ = f(xm)
        numeric[i] = (fp - fm) / (2 * eps)
    if not (np.isfinite(analytic).all() and np.isfinite(numeric).all()):
        raise FloatingPointError("non-finite values encountered during grad check")
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def flatten_arrays(arrays: dict[str, np.ndarray]) -> tuple[np.ndarray, list[tuple[str, tuple, int]]]:
    """Pack named arrays into one float64 vector plus a layout for unpacking."""
    layout = [(name, a.shape, a.size) for name, a in arrays.items()]
    if not layout:
        return np.zeros(0), layout
    vec = np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays.values()])
    return vec, layout


def unflatten_arrays(vec: np.ndarray, layout) -> dict[str, np.ndarray]:
    out = {}
    pos = 0
    for name, shape, size in layout:
        out[name] = vec[pos : pos + size].reshape(shape)
        pos += size
    return out

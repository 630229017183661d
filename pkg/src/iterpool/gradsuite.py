"""The finite-difference verification suite run by `iterpool gradcheck`.

Every analytic gradient in the stack is checked against 64-bit central
differences (eps 1e-5) at a max relative error of 1e-5.
"""

from __future__ import annotations

import numpy as np

from .gradcheck import flatten_arrays, grad_check, unflatten_arrays
from .ops import (
    ConvParams,
    LinearParams,
    conv2d_backward,
    conv2d_forward,
    linear_backward,
    linear_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from .pooling import (
    IterPoolParams,
    iterative_pool_backward,
    iterative_pool_forward,
)

TOLERANCE = 1e-5
EPS = 1e-5


def _readout(shape, rng):
    return rng.normal(size=shape)


def conv_case(rng):
    x = rng.normal(size=(1, 2, 8, 8))
    w = rng.normal(size=(3, 2, 3, 3)) * 0.5
    b = rng.normal(size=3) * 0.1
    rr = _readout((1, 3, 4, 4), np.random.default_rng(99))
    vec, layout = flatten_arrays({"x": x, "w": w, "b": b})

    def f(v):
        parts = unflatten_arrays(v, layout)
        p = ConvParams(parts["w"], parts["b"], stride=2, pad=1)
        y = conv2d_forward(parts["x"], p)
        loss = float((y * rr).sum())
        dx, dw, db = conv2d_backward(parts["x"], p, rr)
        g, _ = flatten_arrays({"x": dx, "w": dw, "b": db})
        return loss, g

    return f, vec


def linear_case(rng):
    x = rng.normal(size=(3, 7))
    w = rng.normal(size=(4, 7))
    b = rng.normal(size=4)
    rr = _readout((3, 4), np.random.default_rng(98))
    vec, layout = flatten_arrays({"x": x, "w": w, "b": b})

    def f(v):
        parts = unflatten_arrays(v, layout)
        p = LinearParams(parts["w"], parts["b"])
        y = linear_forward(parts["x"], p)
        loss = float((y * rr).sum())
        dx, dw, db = linear_backward(parts["x"], p, rr)
        g, _ = flatten_arrays({"x": dx, "w": dw, "b": db})
        return loss, g

    return f, vec


def relu_case(rng):
    x = rng.normal(size=(1, 2, 4, 4))
    x[np.abs(x) < 1e-2] += 0.1  # keep coordinates away from the kink
    rr = _readout(x.shape, np.random.default_rng(97))
    vec, layout = flatten_arrays({"x": x})

    def f(v):
        parts = unflatten_arrays(v, layout)
        y = relu(parts["x"])
        loss = float((y * rr).sum())
        g, _ = flatten_arrays({"x": relu_backward(parts["x"], rr)})
        return loss, g

    return f, vec


def softmax_case(rng):
    logits = rng.normal(size=(4, 5))
    labels = np.array([0, 3, 1, 4])
    vec, layout = flatten_arrays({"logits": logits})

    def f(v):
        parts = unflatten_arrays(v, layout)
        loss, d = softmax_cross_entropy(parts["logits"], labels)
        g, _ = flatten_arrays({"logits": d})
        return loss, g

    return f, vec


def maxpool_case(rng):
    # distinct values with gaps far larger than eps, so the argmax is stable
    x = rng.permutation(128).astype(np.float64).reshape(1, 2, 8, 8) * 0.1
    rr = _readout((1, 2, 4, 4), np.random.default_rng(96))
    vec, layout = flatten_arrays({"x": x})

    def f(v):
        parts = unflatten_arrays(v, layout)
        y, argmax = maxpool2d_forward(parts["x"], window=2, stride=2)
        loss = float((y * rr).sum())
        g, _ = flatten_arrays({"x": maxpool2d_backward(argmax, rr, parts["x"].shape)})
        return loss, g

    return f, vec


def iterpool_case(rng, steps):
    size = 4 * (2**steps)
    c = 2
    x = rng.normal(size=(1, c, size, size))
    w = rng.normal(size=(c, c, 3, 3)) * 0.3
    b = rng.normal(size=c) * 0.1
    rr = _readout((1, c, 4, 4), np.random.default_rng(95))
    vec, layout = flatten_arrays({"x": x, "w": w, "b": b})

    def f(v):
        parts = unflatten_arrays(v, layout)
        p = IterPoolParams(c, ConvParams(parts["w"], parts["b"], stride=2, pad=1), target_h=4)
        y, saved = iterative_pool_forward(parts["x"], p)
        loss = float((y * rr).sum())
        dx, dw, db = iterative_pool_backward(saved, p, rr)
        g, _ = flatten_arrays({"x": dx, "w": dw, "b": db})
        return loss, g

    return f, vec


def cases():
    rng = np.random.default_rng(7)
    yield "conv2d", conv_case(rng)
    yield "linear", linear_case(rng)
    yield "relu", relu_case(rng)
    yield "softmax_xent", softmax_case(rng)
    yield "maxpool_routing", maxpool_case(rng)
    for steps in range(4):
        yield f"iterative_pool_k{steps}", iterpool_case(rng, steps)


def run(verbose: bool = False) -> int:
    """Run every case; returns the number of failures."""
    failures = 0
    for name, (f, vec) in cases():
        err = grad_check(f, vec, eps=EPS)
        ok = err <= TOLERANCE
        if not ok:
            failures += 1
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name:20s} max rel err {err:.3e}")
    return failures

"""Layer operations with hand-derived gradients.

All operations are pure functions over (n, c, h, w) numpy arrays and are
deterministic: reductions happen through numpy's fixed summation order and
ties in max-pooling resolve to the first (row-major) element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import check_nchw


@dataclass
class ConvParams:
    """Weights of one 2-D convolution: weight (out_ch, in_ch, k, k), bias (out_ch,)."""

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise ValueError(f"conv weight must be (out, in, k, k), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias length must equal out_ch")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.pad < 0:
            raise ValueError("pad must be >= 0")

    @property
    def out_ch(self) -> int:
        return self.weight.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weight.shape[1]

    @property
    def k(self) -> int:
        return self.weight.shape[2]


@dataclass
class LinearParams:
    """Fully connected layer: weight (out_dim, in_dim), bias (out_dim,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ValueError("linear weight must be 2-D")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias length must equal out_dim")

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


def conv_out_dim(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    check_nchw(x, "conv input")
    n, c, h, w = x.shape
    if c != p.in_ch:
        raise ValueError(f"channel mismatch: input has {c}, kernel expects {p.in_ch}")
    k, s, pad = p.k, p.stride, p.pad
    oh = conv_out_dim(h, k, s, pad)
    ow = conv_out_dim(w, k, s, pad)
    if oh < 1 or ow < 1:
        raise ValueError(f"non-positive conv output dims ({oh}, {ow})")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    # accumulate one channel contraction per kernel offset (fixed order)
    y = np.zeros((p.out_ch, n, oh, ow), dtype=x.dtype)
    for u in range(k):
        for v in range(k):
            xs = xp[:, :, u : u + (oh - 1) * s + 1 : s, v : v + (ow - 1) * s + 1 : s]
            y += np.tensordot(p.weight[:, :, u, v], xs, axes=([1], [1]))
    y += p.bias[:, None, None, None]
    return np.ascontiguousarray(y.transpose(1, 0, 2, 3))


def conv2d_backward(
    x: np.ndarray, p: ConvParams, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward; returns (dx, dweight, dbias)."""
    check_nchw(x, "conv input")
    n, c, h, w = x.shape
    k, s, pad = p.k, p.stride, p.pad
    oh = conv_out_dim(h, k, s, pad)
    ow = conv_out_dim(w, k, s, pad)
    if dy.shape != (n, p.out_ch, oh, ow):
        raise ValueError(f"dy shape {dy.shape} != expected {(n, p.out_ch, oh, ow)}")

    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    dxp = np.zeros_like(xp, dtype=dy.dtype)
    dweight = np.empty_like(p.weight, dtype=dy.dtype)
    for u in range(k):
        for v in range(k):
            sl = np.s_[:, :, u : u + (oh - 1) * s + 1 : s, v : v + (ow - 1) * s + 1 : s]
            dweight[:, :, u, v] = np.tensordot(dy, xp[sl], axes=([0, 2, 3], [0, 2, 3]))
            dxp[sl] += np.tensordot(p.weight[:, :, u, v], dy, axes=([0], [1])).transpose(
                1, 0, 2, 3
            )
    dbias = dy.sum(axis=(0, 2, 3))
    dx = np.ascontiguousarray(dxp[:, :, pad : pad + h, pad : pad + w]) if pad else dxp
    return dx, dweight, dbias


def maxpool2d_forward(
    x: np.ndarray, window: int, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    """Max pool; argmax holds the flat source index (first occurrence on ties)."""
    check_nchw(x, "pool input")
    n, c, h, w = x.shape
    if window > h or window > w:
        raise ValueError(f"pool window {window} exceeds spatial dims ({h}, {w})")
    win = sliding_window_view(x, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, oh, ow, window * window)
    local = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    rows = np.arange(oh)[None, None, :, None] * stride + local // window
    cols = np.arange(ow)[None, None, None, :] * stride + local % window
    base = (
        np.arange(n)[:, None, None, None] * c + np.arange(c)[None, :, None, None]
    ) * (h * w)
    argmax = base + rows * w + cols
    return np.ascontiguousarray(y), argmax


def maxpool2d_backward(
    argmax: np.ndarray, dy: np.ndarray, x_shape: tuple[int, int, int, int]
) -> np.ndarray:
    """Route dy to the stored argmax positions, zeros elsewhere."""
    if argmax.shape != dy.shape:
        raise ValueError(f"argmax shape {argmax.shape} != dy shape {dy.shape}")
    total = int(np.prod(x_shape))
    if argmax.size and int(argmax.max()) >= total:
        raise ValueError("argmax indices stale for the given input dims")
    dx = np.zeros(total, dtype=dy.dtype)
    np.add.at(dx, argmax.ravel(), dy.ravel())
    return dx.reshape(x_shape)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is 0
    return dy * (x > 0)


def linear_forward(x: np.ndarray, p: LinearParams) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != p.in_dim:
        raise ValueError(f"linear input shape {x.shape} incompatible with in_dim {p.in_dim}")
    return x @ p.weight.T + p.bias


def linear_backward(
    x: np.ndarray, p: LinearParams, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if dy.shape != (x.shape[0], p.out_dim):
        raise ValueError("dy shape mismatch")
    dx = dy @ p.weight
    dweight = dy.T @ x
    dbias = dy.sum(axis=0)
    return dx, dweight, dbias


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch; dlogits = (softmax - onehot) / n."""
    if logits.ndim != 2:
        raise ValueError("logits must be (n, classes)")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError("one label per row required")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    loss = float(-logp[np.arange(n), labels].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1
    dlogits /= n
    return loss, dlogits


def sgd_step(
    params: dict, grads: dict, velocity: dict, lr: float, momentum: float
) -> None:
    """In-place SGD with momentum: v <- momentum*v + g; p <- p - lr*v."""
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"grad shape mismatch for {name}")
        v = velocity.setdefault(name, np.zeros_like(p))
        v *= momentum
        v += g
        p -= lr * v

"""Size-reduction operators for variable-resolution inputs.

Iterative pooling repeatedly applies one shared stride-2 3x3 convolution,
halving the spatial dims each step until a fixed target size is reached; the
adaptive max-pool baseline collapses each (H/h)x(H/h) window to a single
value in one shot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ops import ConvParams, conv2d_backward, conv2d_forward, maxpool2d_forward
from .tensor import check_nchw


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class IterPoolParams:
    """One shared 3x3 stride-2 kernel used at every timestep and input size."""

    channels: int
    shared_kernel: ConvParams
    target_h: int = 4

    def __post_init__(self):
        sk = self.shared_kernel
        if sk.in_ch != self.channels or sk.out_ch != self.channels:
            raise ValueError("shared kernel must map C channels to C channels")
        if sk.k != 3 or sk.stride != 2 or sk.pad != 1:
            raise ValueError("shared kernel must be 3x3, stride 2, pad 1")
        if not _is_pow2(self.target_h):
            raise ValueError("target_h must be a power of two")


def init_iter_pool(channels: int, rng: np.random.Generator, target_h: int = 4,
                   dtype=np.float32) -> IterPoolParams:
    """Centered-delta kernel plus small uniform noise, so the initial operator
    approximates stride-2 subsampling regardless of how many times it runs."""
    w = rng.uniform(-0.01, 0.01, size=(channels, channels, 3, 3))
    w[np.arange(channels), np.arange(channels), 1, 1] += 1.0
    b = np.zeros(channels)
    return IterPoolParams(
        channels,
        ConvParams(w.astype(dtype), b.astype(dtype), stride=2, pad=1),
        target_h=target_h,
    )


def num_iterations(H: int, h: int) -> int:
    """Number of halvings taking an HxH input to hxh."""
    if not _is_pow2(H) or not _is_pow2(h):
        raise ValueError(f"dims must be powers of two, got H={H}, h={h}")
    if H < h:
        raise ValueError(f"input dim {H} smaller than target {h}")
    return H.bit_length() - h.bit_length()


def iterative_pool_forward(
    x: np.ndarray, p: IterPoolParams
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Apply the shared kernel log2(H/target_h) times; returns (y, intermediates).

    intermediates[i] is the input to timestep i; needed by the backward pass.
    The zero-iteration case returns x itself, untouched.
    """
    check_nchw(x, "pooling input")
    n, c, h, w = x.shape
    if h != w:
        raise ValueError(f"iterative pooling needs square input, got {h}x{w}")
    if c != p.channels:
        raise ValueError(f"channel mismatch: {c} != {p.channels}")
    k = num_iterations(h, p.target_h)
    intermediates: list[np.ndarray] = []
    y = x
    for _ in range(k):
        intermediates.append(y)
        y = conv2d_forward(y, p.shared_kernel)
    return y, intermediates


def iterative_pool_backward(
    intermediates: list[np.ndarray], p: IterPoolParams, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backprop through the unrolled chain; the shared-kernel gradient is the
    sum of the per-timestep gradients. Returns (dx, dweight, dbias)."""
    dweight = np.zeros_like(p.shared_kernel.weight, dtype=dy.dtype)
    dbias = np.zeros_like(p.shared_kernel.bias, dtype=dy.dtype)
    dx = dy
    for x_step in reversed(intermediates):
        expected = (x_step.shape[0], p.channels, x_step.shape[2] // 2, x_step.shape[3] // 2)
        if dx.shape != expected:
            raise ValueError("stale intermediates for the given upstream gradient")
        dx, dw, db = conv2d_backward(x_step, p.shared_kernel, dx)
        dweight += dw
        dbias += db
    return dx, dweight, dbias


def adaptive_max_pool(x: np.ndarray, h: int) -> np.ndarray:
    y, _ = adaptive_max_pool_with_argmax(x, h)
    return y


def adaptive_max_pool_with_argmax(x: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Single max-pool with window = stride = H/h; one value kept per window."""
    check_nchw(x, "pooling input")
    H = x.shape[2]
    if x.shape[3] != H:
        raise ValueError("adaptive max pool needs square input")
    if H % h != 0:
        raise ValueError(f"input dim {H} not divisible by target {h}")
    win = H // h
    return maxpool2d_forward(x, window=win, stride=win)


def discarded_point_count(H: int, h: int, C: int) -> int:
    """Data points dropped when an HxHxC tensor is max-pooled to hxhxC."""
    if h > H:
        raise ValueError(f"target {h} larger than input {H}")
    return (H * H - h * h) * C

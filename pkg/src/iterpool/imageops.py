"""Image-space operations for the data pipeline: seeded texture synthesis,
separable bicubic resampling with antialiasing, and bilinear rotation."""

from __future__ import annotations

import numpy as np


def cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Keys bicubic kernel, a = -0.5, support [-2, 2]."""
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = 1.5 * ax3 - 2.5 * ax2 + 1.0
    far = -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    return np.where(ax <= 1, near, np.where(ax < 2, far, 0.0))


def _resize_weights(in_len: int, out_len: int, scale: float):
    """Sample positions and normalized weights for one axis.

    When shrinking, the kernel is stretched by 1/scale so it acts as an
    antialiasing lowpass. Boundary samples replicate the edge pixel.
    """
    u = (np.arange(out_len) + 0.5) / scale - 0.5
    if scale < 1.0:
        width = 4.0 / scale
        kern = lambda t: scale * cubic_kernel(scale * t)
    else:
        width = 4.0
        kern = cubic_kernel
    p = int(np.ceil(width)) + 2
    left = np.floor(u - width / 2).astype(np.int64) + 1
    idx = left[:, None] + np.arange(p)[None, :]
    weights = kern(u[:, None] - idx)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_len - 1)
    return idx, weights


def resample(img: np.ndarray, factor: float) -> np.ndarray:
    """Bicubic resize by a scale factor; output dims are round(dim * factor)."""
    if img.ndim != 2:
        raise ValueError("resample expects a 2-D image")
    if factor <= 0:
        raise ValueError("resample factor must be positive")
    if factor == 1.0:
        return img.copy()
    h, w = img.shape
    oh, ow = int(round(h * factor)), int(round(w * factor))
    if oh < 8 or ow < 8:
        raise ValueError(f"degenerate output size ({oh}, {ow})")
    x = np.asarray(img, dtype=np.float64)
    ridx, rw = _resize_weights(h, oh, factor)
    x = np.einsum("op,opw->ow", rw, x[ridx, :])
    cidx, cw = _resize_weights(w, ow, factor)
    x = np.einsum("op,hop->ho", cw, x[:, cidx])
    return x.astype(np.float32)


def rotate(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate about the image center with bilinear interpolation; samples
    outside the support clamp to the nearest valid pixel. Same output dims."""
    if abs(angle_deg) > 45:
        raise ValueError("rotation angle limited to +/-45 degrees")
    if angle_deg == 0.0:
        return img.copy()
    h, w = img.shape
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # inverse map: output pixel -> source location
    sy = cos_t * yy - sin_t * xx + cy
    sx = sin_t * yy + cos_t * xx + cx
    sy = np.clip(sy, 0.0, h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.minimum(sy.astype(np.int64), h - 2) if h > 1 else np.zeros_like(sy, np.int64)
    x0 = np.minimum(sx.astype(np.int64), w - 2) if w > 1 else np.zeros_like(sx, np.int64)
    fy, fx = sy - y0, sx - x0
    x = np.asarray(img, dtype=np.float64)
    out = (
        x[y0, x0] * (1 - fy) * (1 - fx)
        + x[y0, x0 + 1] * (1 - fy) * fx
        + x[y0 + 1, x0] * fy * (1 - fx)
        + x[y0 + 1, x0 + 1] * fy * fx
    )
    return out.astype(np.float32)


def _bilinear_upsample(grid: np.ndarray, size: int) -> np.ndarray:
    """Stretch a coarse grid to size x size (used by the texture synthesizer)."""
    gh, gw = grid.shape
    u = np.linspace(0, gh - 1, size)
    v = np.linspace(0, gw - 1, size)
    i0 = np.minimum(u.astype(np.int64), gh - 2)
    j0 = np.minimum(v.astype(np.int64), gw - 2)
    fu = (u - i0)[:, None]
    fv = (v - j0)[None, :]
    a = grid[np.ix_(i0, j0)]
    b = grid[np.ix_(i0, j0 + 1)]
    c = grid[np.ix_(i0 + 1, j0)]
    d = grid[np.ix_(i0 + 1, j0 + 1)]
    return a * (1 - fu) * (1 - fv) + b * (1 - fu) * fv + c * fu * (1 - fv) + d * fu * fv


def synth_base_image(size: int, seed: int) -> np.ndarray:
    """Deterministic textured stand-in image: three octaves of smoothed noise
    plus a mild directional gradient, clamped to [0, 255]."""
    if size < 64:
        raise ValueError("base image size must be >= 64")
    rng = np.random.default_rng(seed)
    img = np.full((size, size), 128.0)
    for cells, amp in ((6, 55.0), (12, 30.0), (24, 15.0)):
        grid = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
        img += amp * _bilinear_upsample(grid, size)
    gdir = rng.uniform(0, 2 * np.pi)
    gamp = rng.uniform(5.0, 25.0)
    ramp = np.linspace(-1, 1, size)
    img += gamp * (np.cos(gdir) * ramp[:, None] + np.sin(gdir) * ramp[None, :])
    # fine grain so every 8x8 block carries some AC energy
    img += rng.normal(0.0, 3.0, size=(size, size))
    return np.clip(img, 0.0, 255.0).astype(np.float32)

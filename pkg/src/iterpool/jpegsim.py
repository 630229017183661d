"""Grayscale JPEG quantization simulator: 8x8 block DCT, IJG-style table
scaling, round-trip through the quantizer. No entropy coding; only the
quantization artifacts matter here."""

from __future__ import annotations

import numpy as np

# standard luminance quantization table (quality 50 baseline)
BASE_QUANT_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


def _dct_matrix() -> np.ndarray:
    n = np.arange(8)
    k = n[:, None]
    m = np.cos((2 * n[None, :] + 1) * k * np.pi / 16)
    m[0] *= np.sqrt(1.0 / 8.0)
    m[1:] *= np.sqrt(2.0 / 8.0)
    return m


_DCT = _dct_matrix()


def dct8(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D type-II DCT of an 8x8 block."""
    if block.shape != (8, 8):
        raise ValueError("dct8 expects an 8x8 block")
    return _DCT @ block @ _DCT.T


def idct8(coeff: np.ndarray) -> np.ndarray:
    if coeff.shape != (8, 8):
        raise ValueError("idct8 expects an 8x8 block")
    return _DCT.T @ coeff @ _DCT


def quant_table(qf: int) -> np.ndarray:
    """IJG scaling of the base table for quality factor 1..100."""
    if not 1 <= qf <= 100:
        raise ValueError(f"quality factor {qf} out of range 1..100")
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    table = (BASE_QUANT_TABLE * scale + 50) // 100
    return np.clip(table, 1, 255)


def jpeg_sim(img: np.ndarray, qf: int) -> np.ndarray:
    """Quantization round-trip: blockwise DCT, quantize, dequantize, inverse.

    Pads by reflection to a multiple of 8 and crops back afterwards.
    """
    if img.ndim != 2 or img.size == 0:
        raise ValueError("jpeg_sim expects a non-empty 2-D image")
    h, w = img.shape
    ph, pw = (-h) % 8, (-w) % 8
    x = np.asarray(img, dtype=np.float64)
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw)), mode="reflect")
    H, W = x.shape
    blocks = x.reshape(H // 8, 8, W // 8, 8).transpose(0, 2, 1, 3) - 128.0
    coeff = np.einsum("ij,abjk,lk->abil", _DCT, blocks, _DCT, optimize=True)
    qt = quant_table(qf).astype(np.float64)
    coeff = np.rint(coeff / qt) * qt
    blocks = np.einsum("ji,abjk,kl->abil", _DCT, coeff, _DCT, optimize=True) + 128.0
    out = blocks.transpose(0, 2, 1, 3).reshape(H, W)[:h, :w]
    return np.clip(out, 0.0, 255.0).astype(np.float32)

"""Dense tensor conventions and the .tns on-disk format.

Tensors are plain numpy arrays in (batch, channel, height, width) layout,
float32 for training and float64 for gradient verification only.
"""

from __future__ import annotations

import struct

import numpy as np

TNS_MAGIC = b"TNSR"
TNS_VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class TensorFormatError(ValueError):
    """Raised on malformed .tns or .ckpt payloads."""


def check_nchw(x: np.ndarray, name: str = "tensor") -> None:
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-D (n, c, h, w), got shape {x.shape}")


def tns_bytes(arr: np.ndarray) -> bytes:
    """Serialize an array: magic, version u32, dtype u8, ndims u8, dims u64, payload."""
    dt = np.dtype(arr.dtype)
    if dt not in _DTYPE_CODES:
        raise TensorFormatError(f"unsupported dtype {dt}")
    header = TNS_MAGIC + struct.pack("<IBB", TNS_VERSION, _DTYPE_CODES[dt], arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=dt.newbyteorder("<")).tobytes()
    return header + payload


def tns_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one .tns record; returns (array, offset past the record)."""
    if buf[offset : offset + 4] != TNS_MAGIC:
        raise TensorFormatError("bad .tns magic")
    offset += 4
    version, code, ndims = struct.unpack_from("<IBB", buf, offset)
    offset += 6
    if version != TNS_VERSION:
        raise TensorFormatError(f"unsupported .tns version {version}")
    if code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    dims = struct.unpack_from(f"<{ndims}Q", buf, offset)
    offset += 8 * ndims
    dt = _CODE_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if ndims else 1
    nbytes = count * dt.itemsize
    if offset + nbytes > len(buf):
        raise TensorFormatError("truncated .tns payload")
    arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset).reshape(dims)
    return arr.astype(dt.newbyteorder("=")), offset + nbytes


def save_tns(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(tns_bytes(arr))


def load_tns(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    arr, end = tns_from_bytes(buf)
    if end != len(buf):
        raise TensorFormatError("trailing bytes after .tns payload")
    return arr

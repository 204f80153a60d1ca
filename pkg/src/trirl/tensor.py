"""Image tensors, norms, deterministic RNG, and the TNSR file format.

Images are numpy float64 arrays of shape (height, width, channels) with values
in [0, 1]. The on-disk TNSR format is bit-exact: magic b"TNSR", one version
byte (1), three little-endian u32 (width, height, channels), then
width*height*channels IEEE-754 f32 little-endian values, row-major
channel-last (the C-order ravel of the (h, w, c) array). No padding.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from . import _kernels

TNSR_MAGIC = b"TNSR"
TNSR_VERSION = 1
_HEADER = struct.Struct("<4sBIII")


class TensorFormatError(ValueError):
    """Base class for TNSR parse failures."""


class BadMagicError(TensorFormatError):
    pass


class TruncatedTensorError(TensorFormatError):
    pass


class NonFiniteTensorError(TensorFormatError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based RNG stream; one per attack instance."""
    return np.random.Generator(np.random.Philox(seed))


def as_image(arr: np.ndarray) -> np.ndarray:
    """Coerce to the internal convention: C-contiguous float64 (h, w, c)."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"expected a (h, w, c) image, got shape {a.shape}")
    return np.ascontiguousarray(a)


def l2_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean norm of the elementwise difference over the flat arrays."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _kernels.l2_diff(a.ravel(), b.ravel())


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared elementwise difference: l2 / sqrt(num_components)."""
    return l2_distance(a, b) / math.sqrt(a.size)


def clip_unit(img: np.ndarray) -> np.ndarray:
    """Clamp every component to [0, 1]; idempotent."""
    return _kernels.clip01(img.ravel()).reshape(img.shape)


def write_tensor(path, img: np.ndarray) -> None:
    img = as_image(img)
    if not np.isfinite(img).all():
        raise NonFiniteTensorError("refusing to write non-finite values")
    h, w, c = img.shape
    payload = img.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TNSR_MAGIC, TNSR_VERSION, w, h, c))
        fh.write(payload)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    return decode_tensor(raw)


def decode_tensor(raw: bytes) -> np.ndarray:
    if len(raw) < _HEADER.size:
        raise TruncatedTensorError(f"file too short for header: {len(raw)} bytes")
    magic, version, w, h, c = _HEADER.unpack_from(raw)
    if magic != TNSR_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != TNSR_VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if w < 1 or h < 1 or c < 1:
        raise TensorFormatError(f"invalid dimensions {(w, h, c)}")
    n = w * h * c
    body = raw[_HEADER.size :]
    if len(body) != 4 * n:
        raise TruncatedTensorError(f"expected {4 * n} payload bytes, got {len(body)}")
    flat = np.frombuffer(body, dtype="<f4", count=n)
    if not np.isfinite(flat).all():
        raise NonFiniteTensorError("payload contains non-finite values")
    return flat.astype(np.float64).reshape(h, w, c)


def encode_tensor(img: np.ndarray) -> bytes:
    img = as_image(img)
    h, w, c = img.shape
    return _HEADER.pack(TNSR_MAGIC, TNSR_VERSION, w, h, c) + img.astype("<f4").tobytes(order="C")

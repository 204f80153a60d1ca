"""DCT transforms and sampling of the random low-frequency 2-D subspace.

Each triangle iteration works in a plane spanned by d1 (unit direction from
the benign image toward the current adversary) and d2, a random direction
whose DCT spectrum lives entirely in the top-left low-frequency block, then
Gram-Schmidt orthogonalized against d1 in the spatial domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from . import _kernels
from .tensor import l2_distance


class DegenerateDirectionError(ValueError):
    """x == x_adv, or the sampled direction collapsed under projection."""


@dataclass(frozen=True)
class FrequencySubspace:
    """Orthonormal 2-D frame: d1 toward the adversary, d2 a low-frequency direction."""

    d1: np.ndarray
    d2: np.ndarray
    freq_ratio: float


def dct2(img: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2-D DCT applied per channel."""
    return _fft.dctn(img, type=2, axes=(0, 1), norm="ortho")


def idct2(coef: np.ndarray) -> np.ndarray:
    return _fft.idctn(coef, type=2, axes=(0, 1), norm="ortho")


def low_frequency_direction(shape: tuple[int, int, int], freq_ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Unnormalized spatial-domain direction with only low-frequency DCT energy.

    Standard-normal draws fill the top-left ceil(freq_ratio*w) x ceil(freq_ratio*h)
    block of each channel's spectrum; everything else stays zero.
    """
    h, w, c = shape
    kh = math.ceil(freq_ratio * h)
    kw = math.ceil(freq_ratio * w)
    coef = np.zeros(shape, dtype=np.float64)
    coef[:kh, :kw, :] = rng.standard_normal((kh, kw, c))
    return idct2(coef)


def sample_subspace(
    x: np.ndarray,
    x_adv: np.ndarray,
    freq_ratio: float,
    rng: np.random.Generator,
    max_retries: int = 8,
) -> FrequencySubspace:
    """Sample the 2-D plane through x and x_adv used for one triangle pass."""
    if not 0.0 < freq_ratio <= 1.0:
        raise ValueError(f"freq_ratio must be in (0, 1], got {freq_ratio}")
    dist = l2_distance(x, x_adv)
    if dist < 1e-12:
        raise DegenerateDirectionError("x and x_adv coincide; no direction d1")
    d1 = ((x_adv - x) / dist).ravel()
    for _ in range(max_retries):
        d2 = low_frequency_direction(x.shape, freq_ratio, rng).ravel()
        norm = _kernels.project_normalize(d2, d1)
        if norm >= 1e-12:
            return FrequencySubspace(d1=d1.reshape(x.shape), d2=d2.reshape(x.shape), freq_ratio=freq_ratio)
    raise DegenerateDirectionError(f"no usable d2 after {max_retries} draws")

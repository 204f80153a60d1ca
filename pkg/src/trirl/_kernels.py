"""Hot per-query kernels with a numba fast path and a pure-numpy fallback.

The attack issues thousands of oracle queries per image and each query runs the
same handful of elementwise operations (candidate placement + box clip + norm,
Gram-Schmidt projection, l2 distance). Those are compiled with numba when it is
available. The env var TRIRL_KERNELS forces a backend:

    TRIRL_KERNELS=numpy   always use the numpy fallback
    TRIRL_KERNELS=numba   require numba (ImportError if missing)

unset: numba if importable, numpy otherwise. All kernels take flat float64
arrays; callers keep shape handling.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAS_NUMBA = False


def _np_l2_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


def _np_clip01(a: np.ndarray) -> np.ndarray:
    return np.clip(a, 0.0, 1.0)


def _np_place_candidate(
    x: np.ndarray, d1: np.ndarray, d2: np.ndarray, delta_new: float, alpha: float, side: float
) -> tuple[np.ndarray, float]:
    cand = x + delta_new * (math.cos(alpha) * d1 + side * math.sin(alpha) * d2)
    np.clip(cand, 0.0, 1.0, out=cand)
    return cand, float(np.linalg.norm(cand - x))


def _np_project_normalize(v: np.ndarray, d1: np.ndarray) -> float:
    v -= (v @ d1) * d1
    norm = float(np.linalg.norm(v))
    if norm > 0.0:
        v /= norm
    return norm


if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _nb_l2_diff(a, b):  # pragma: no cover - compiled
        acc = 0.0
        for i in range(a.shape[0]):
            d = a[i] - b[i]
            acc += d * d
        return math.sqrt(acc)

    @njit(cache=True, nogil=True)
    def _nb_clip01(a):  # pragma: no cover - compiled
        out = np.empty_like(a)
        for i in range(a.shape[0]):
            v = a[i]
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            out[i] = v
        return out

    @njit(cache=True, nogil=True)
    def _nb_place_candidate(x, d1, d2, delta_new, alpha, side):  # pragma: no cover - compiled
        ca = delta_new * math.cos(alpha)
        sa = delta_new * math.sin(alpha) * side
        cand = np.empty_like(x)
        acc = 0.0
        for i in range(x.shape[0]):
            v = x[i] + ca * d1[i] + sa * d2[i]
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            cand[i] = v
            d = v - x[i]
            acc += d * d
        return cand, math.sqrt(acc)

    @njit(cache=True, nogil=True)
    def _nb_project_normalize(v, d1):  # pragma: no cover - compiled
        dot = 0.0
        for i in range(v.shape[0]):
            dot += v[i] * d1[i]
        acc = 0.0
        for i in range(v.shape[0]):
            v[i] -= dot * d1[i]
            acc += v[i] * v[i]
        norm = math.sqrt(acc)
        if norm > 0.0:
            for i in range(v.shape[0]):
                v[i] /= norm
        return norm


def _pick_backend() -> str:
    forced = os.environ.get("TRIRL_KERNELS", "").strip().lower()
    if forced == "numpy":
        return "numpy"
    if forced == "numba":
        if not HAS_NUMBA:
            raise ImportError("TRIRL_KERNELS=numba but numba is not importable")
        return "numba"
    if forced:
        raise ValueError(f"TRIRL_KERNELS must be 'numba' or 'numpy', got {forced!r}")
    if HAS_NUMBA:
        return "numba"
    warnings.warn("numba not available, falling back to pure-numpy kernels")
    return "numpy"


BACKEND = _pick_backend()

if BACKEND == "numba":
    l2_diff = _nb_l2_diff
    clip01 = _nb_clip01
    place_candidate = _nb_place_candidate
    project_normalize = _nb_project_normalize
else:
    l2_diff = _np_l2_diff
    clip01 = _np_clip01
    place_candidate = _np_place_candidate
    project_normalize = _np_project_normalize

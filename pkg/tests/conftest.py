"""Shared test plumbing.

The kernel backend JIT-compiles on first call when numba is active; one
session-scoped warmup keeps per-test timing assertions honest.
"""

from __future__ import annotations

import numpy as np
import pytest

from trirl import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    rng = np.random.default_rng(0)
    x = rng.random(16)
    d1 = rng.random(16)
    d1 /= np.linalg.norm(d1)
    d2 = rng.random(16)
    _kernels.l2_diff(x, d2)
    _kernels.clip01(x)
    _kernels.place_candidate(x, d1, d2, 0.1, 0.5, 1.0)
    _kernels.project_normalize(d2.copy(), d1)
    yield

"""DCT round-trips and sampling of the low-frequency search plane."""

from __future__ import annotations

import math

import numpy as np
import pytest

from trirl.frequency import (
    DegenerateDirectionError,
    dct2,
    idct2,
    low_frequency_direction,
    sample_subspace,
)
from trirl.tensor import make_rng


@pytest.mark.parametrize("shape", [(4, 4, 1), (8, 8, 3), (5, 7, 2), (64, 64, 3)])
def test_dct_round_trip(shape):
    rng = make_rng(3)
    img = rng.random(shape)
    back = idct2(dct2(img))
    assert float(np.abs(back - img).max()) < 1e-6


@pytest.mark.parametrize("shape", [(4, 4, 1), (16, 16, 3), (64, 64, 3)])
def test_dct_preserves_energy(shape):
    # orthonormal transform: Parseval holds per channel
    rng = make_rng(7)
    img = rng.standard_normal(shape)
    e_spatial = float((img**2).sum())
    e_freq = float((dct2(img) ** 2).sum())
    assert abs(e_freq - e_spatial) < 1e-9 * e_spatial


def test_low_frequency_support():
    shape = (8, 8, 3)
    for ratio, k in ((0.1, 1), (0.25, 2), (0.5, 4)):
        d = low_frequency_direction(shape, ratio, make_rng(11))
        coef = dct2(d)
        assert np.abs(coef[k:, :, :]).max() < 1e-10
        assert np.abs(coef[:, k:, :]).max() < 1e-10
        assert np.abs(coef[:k, :k, :]).max() > 0.0


def test_low_frequency_block_size_rounds_up():
    # ceil(0.3 * 10) == 3
    d = low_frequency_direction((10, 10, 1), 0.3, make_rng(2))
    coef = dct2(d)
    assert np.abs(coef[3:, :, :]).max() < 1e-10
    assert np.abs(coef[2, 2, 0]) > 0.0


def test_sample_subspace_frame():
    rng = make_rng(5)
    x = rng.random((6, 6, 3))
    x_adv = np.clip(x + 0.3 * rng.standard_normal(x.shape), 0.0, 1.0)
    sub = sample_subspace(x, x_adv, 0.5, rng)
    d1, d2 = sub.d1.ravel(), sub.d2.ravel()
    dist = float(np.linalg.norm((x_adv - x).ravel()))
    np.testing.assert_allclose(d1, (x_adv - x).ravel() / dist, atol=1e-12)
    assert float(d1 @ d2) == pytest.approx(0.0, abs=1e-10)
    assert float(np.linalg.norm(d2)) == pytest.approx(1.0, abs=1e-12)
    assert sub.d1.shape == x.shape and sub.d2.shape == x.shape


def test_sample_subspace_rejects_coincident_points():
    x = np.full((4, 4, 1), 0.5)
    with pytest.raises(DegenerateDirectionError):
        sample_subspace(x, x.copy(), 0.5, make_rng(0))


def test_sample_subspace_rejects_bad_ratio():
    x = np.zeros((4, 4, 1))
    y = np.ones((4, 4, 1))
    for ratio in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            sample_subspace(x, y, ratio, make_rng(0))


def test_sample_subspace_degenerate_plane():
    # 1x1 low-frequency block means every draw is a multiple of the DC vector;
    # when d1 is also DC, projection annihilates every candidate d2.
    shape = (4, 4, 1)
    x = np.full(shape, 0.3)
    x_adv = np.full(shape, 0.7)
    with pytest.raises(DegenerateDirectionError, match="no usable d2"):
        sample_subspace(x, x_adv, 0.1, make_rng(0))

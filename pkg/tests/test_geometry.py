"""Triangle construction checked against trigonometric ground truth."""

from __future__ import annotations

import math

import numpy as np
import pytest

from trirl.frequency import FrequencySubspace, sample_subspace
from trirl.geometry import (
    DegenerateTriangleError,
    TriangleParams,
    beta_upper_bound,
    candidate,
    delta_new,
    initial_beta,
    place_candidate,
)
from trirl.tensor import make_rng


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(max(-1.0, min(1.0, c)))


def _plane(shape, seed):
    rng = make_rng(seed)
    x = np.full(shape, 0.5) + 0.02 * rng.standard_normal(shape)
    x_adv = np.clip(x + 0.05 * rng.standard_normal(shape), 0.0, 1.0)
    return x, x_adv, sample_subspace(x, x_adv, 0.5, rng)


def test_delta_new_right_angle():
    # beta = pi/2 collapses the law of sines to dist * cos(alpha)
    assert delta_new(1.0, math.pi / 3.0, math.pi / 2.0) == pytest.approx(0.5, abs=1e-15)
    assert delta_new(2.0, 0.7, math.pi / 2.0) == pytest.approx(2.0 * math.cos(0.7), rel=1e-15)


def test_delta_new_break_even():
    # |beta| = (pi - alpha) / 2 makes the triangle isoceles: no shrink at all
    alpha = 0.7
    assert delta_new(2.0, alpha, (math.pi - alpha) / 2.0) == pytest.approx(2.0, rel=1e-12)


def test_delta_new_matches_law_of_sines():
    rng = make_rng(19)
    for _ in range(500):
        alpha = rng.uniform(0.05, 1.5)
        beta = rng.uniform(0.05, min(math.pi / 2, math.pi - alpha - 0.05))
        dist = rng.uniform(0.1, 10.0)
        expect = dist * math.sin(alpha + beta) / math.sin(beta)
        assert delta_new(dist, alpha, beta) == pytest.approx(expect, rel=1e-12)
        assert delta_new(dist, alpha, -beta) == pytest.approx(expect, rel=1e-12)


def test_delta_new_decreasing_in_beta():
    alpha = 0.8
    betas = np.linspace(0.1, beta_upper_bound(alpha) - 1e-6, 200)
    vals = [delta_new(1.0, alpha, b) for b in betas]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_delta_new_degenerate():
    with pytest.raises(DegenerateTriangleError):
        delta_new(1.0, 1.0, math.pi - 1.0)


def test_initial_beta():
    assert initial_beta(math.pi / 4.0, math.pi / 16.0) == pytest.approx(math.pi / 2.0, abs=1e-15)
    # once alpha passes pi/2 the probe would go negative; floor kicks in
    assert initial_beta(1.8, math.pi / 16.0) == math.pi / 16.0


def test_beta_upper_bound():
    assert beta_upper_bound(0.3) == pytest.approx(math.pi / 2.0)
    assert beta_upper_bound(2.0) == pytest.approx(math.pi - 2.0, rel=1e-15)


def test_params_validate():
    TriangleParams(0.8, 0.5, 0.1, 1.5).validate()
    TriangleParams(0.8, -0.5, 0.1, 1.5).validate()
    with pytest.raises(ValueError):
        TriangleParams(0.0, 0.5, 0.1, 1.5).validate()
    with pytest.raises(ValueError):
        TriangleParams(0.8, 0.0, 0.1, 1.5).validate()
    with pytest.raises(DegenerateTriangleError):
        TriangleParams(2.0, math.pi - 2.0, 0.1, 1.5).validate()


def test_candidate_angles_close_under_clip_free_placement():
    # with a deep interior x and small radius, clipping never triggers, so the
    # realized triangle must show exactly the requested angles
    rng = make_rng(31)
    x, x_adv, sub = _plane((6, 6, 3), 23)
    checked = 0
    for _ in range(200):
        alpha = rng.uniform(0.2, 1.4)
        beta = rng.uniform(0.2, min(math.pi / 2, math.pi - alpha - 0.2))
        if rng.random() < 0.5:
            beta = -beta
        params = TriangleParams(alpha, beta, 0.1, beta_upper_bound(alpha))
        cand = candidate(x, x_adv, params, sub)
        u = (x_adv - x).ravel()
        w = (cand - x).ravel()
        v = (cand - x_adv).ravel()
        if np.any(cand <= 0.0) or np.any(cand >= 1.0):
            continue
        a = _angle(u, w)  # at x
        b = _angle(-w, -v + 0.0)  # at candidate: between candidate->x and candidate->x_adv
        c = _angle(-u, v)  # at x_adv
        assert a + b + c == pytest.approx(math.pi, abs=1e-9)
        assert a == pytest.approx(alpha, abs=1e-9)
        assert b == pytest.approx(abs(beta), abs=1e-9)
        checked += 1
    assert checked > 150


def test_candidate_side_selection():
    x, x_adv, sub = _plane((4, 4, 1), 5)
    pos = candidate(x, x_adv, TriangleParams(0.6, 0.9, 0.1, 1.5), sub)
    neg = candidate(x, x_adv, TriangleParams(0.6, -0.9, 0.1, 1.5), sub)
    d2 = sub.d2.ravel()
    assert float((pos - x).ravel() @ d2) > 0.0
    assert float((neg - x).ravel() @ d2) < 0.0
    # mirror images about the d1 axis
    assert float((pos - x).ravel() @ d2) == pytest.approx(-float((neg - x).ravel() @ d2), rel=1e-10)


def test_place_candidate_clips():
    shape = (4, 4, 1)
    x = np.full(shape, 0.95)
    rng = make_rng(9)
    x_adv = np.clip(x + 0.1 * rng.standard_normal(shape), 0.0, 1.0)
    sub = sample_subspace(x, x_adv, 0.5, rng)
    img, dist = place_candidate(x, sub, 5.0, 0.4, 1.0)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert dist == pytest.approx(float(np.linalg.norm((img - x).ravel())), rel=1e-12)


def test_angle_sum_is_pi_for_raw_triangle():
    # pure vector check, independent of the image machinery
    rng = make_rng(77)
    for _ in range(1000):
        p = rng.standard_normal(5)
        q = rng.standard_normal(5)
        r = rng.standard_normal(5)
        a = _angle(q - p, r - p)
        b = _angle(p - q, r - q)
        c = _angle(p - r, q - r)
        assert a + b + c == pytest.approx(math.pi, abs=1e-9)

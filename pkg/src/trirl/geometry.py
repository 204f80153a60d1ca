"""Triangle candidate construction and the beta schedule bounds.

A candidate is the third vertex of a triangle with the benign image x and the
current adversary x_adv: angle alpha at x, angle |beta| at the candidate
vertex (so pi - alpha - |beta| at x_adv). The law of sines then gives the new
perturbation radius

    delta_new = ||x_adv - x|| * sin(alpha + |beta|) / sin(|beta|)

which is strictly decreasing in |beta|: pushing beta toward its upper bound
min(pi/2, pi - alpha) pulls the candidate toward x (at beta = pi/2 this is the
familiar delta*cos(alpha) placement). The sign of beta picks the side of the
d1 axis within the sampled plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .frequency import FrequencySubspace
from .tensor import l2_distance

DEGENERACY_MARGIN = 1e-6


class DegenerateTriangleError(ValueError):
    """alpha + |beta| too close to pi: the three vertices collapse."""


@dataclass(frozen=True)
class TriangleParams:
    alpha: float
    beta: float  # signed; |beta| is the angle at the candidate vertex
    beta_lower: float
    beta_upper: float

    def validate(self) -> None:
        if not 0.0 < self.alpha < math.pi:
            raise ValueError(f"alpha out of range: {self.alpha}")
        ab = abs(self.beta)
        if not 0.0 < ab < math.pi:
            raise ValueError(f"|beta| out of range: {ab}")
        if self.alpha + ab >= math.pi - DEGENERACY_MARGIN:
            raise DegenerateTriangleError(f"alpha + |beta| = {self.alpha + ab:.9f} too close to pi")


def initial_beta(alpha: float, beta_lower: float) -> float:
    """First probe angle of a subspace pass: max(pi - 2*alpha, beta_lower)."""
    return max(math.pi - 2.0 * alpha, beta_lower)


def beta_upper_bound(alpha: float) -> float:
    """Running upper bound of the beta binary search: min(pi/2, pi - alpha)."""
    return min(math.pi / 2.0, math.pi - alpha)


def delta_new(dist: float, alpha: float, beta: float) -> float:
    """Pre-clip distance from x to the candidate vertex (law of sines)."""
    ab = abs(beta)
    s = math.sin(alpha + ab)
    if abs(s) < 1e-12 or alpha + ab >= math.pi - DEGENERACY_MARGIN:
        raise DegenerateTriangleError(f"sin(alpha+|beta|) ~ 0 at alpha={alpha}, beta={beta}")
    return dist * s / math.sin(ab)


def place_candidate(
    x: np.ndarray, subspace: FrequencySubspace, radius: float, alpha: float, side: float
) -> tuple[np.ndarray, float]:
    """clip_unit(x + radius*(cos(alpha)*d1 + side*sin(alpha)*d2)) and its l2 from x."""
    flat, dist = _kernels.place_candidate(
        x.ravel(), subspace.d1.ravel(), subspace.d2.ravel(), radius, alpha, side
    )
    return flat.reshape(x.shape), dist


def candidate(
    x: np.ndarray, x_adv: np.ndarray, params: TriangleParams, subspace: FrequencySubspace
) -> np.ndarray:
    """Candidate image at the third triangle vertex, clipped to [0, 1]."""
    params.validate()
    radius = delta_new(l2_distance(x, x_adv), params.alpha, params.beta)
    side = 1.0 if params.beta >= 0.0 else -1.0
    img, _ = place_candidate(x, subspace, radius, params.alpha, side)
    return img

"""Hard-label oracles: the query-counting boundary and synthetic targets.

Synthetic oracles have closed-form optimal perturbations so attack convergence
can be checked against an analytic answer instead of a real model. Attacks
never call an oracle directly; they go through CountingOracle, which enforces
the query budget Q and hands out 1-based query indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import l2_distance


class BudgetExhausted(Exception):
    """Raised instead of issuing a query once used == max_queries."""


@dataclass(frozen=True)
class OracleVerdict:
    label: int
    query_index: int


@dataclass
class QueryBudget:
    max_queries: int
    used: int = 0

    def __post_init__(self) -> None:
        if self.max_queries < 1:
            raise ValueError("max_queries must be positive")

    @property
    def remaining(self) -> int:
        return self.max_queries - self.used


class Oracle:
    """Abstract hard-label classifier: deterministic label per image."""

    num_classes: int
    shape: tuple[int, int, int]  # (h, w, c)

    def label(self, img: np.ndarray) -> int:
        raise NotImplementedError

    def check_shape(self, img: np.ndarray) -> None:
        if tuple(img.shape) != tuple(self.shape):
            raise ValueError(f"oracle expects shape {self.shape}, got {img.shape}")

    def close(self) -> None:
        pass


class CountingOracle:
    """Budget-enforcing wrapper; the only classify() the attack loop sees.

    The counter increments after the underlying call succeeds, so a transport
    failure from a remote oracle consumes no budget.
    """

    def __init__(self, oracle: Oracle, budget: QueryBudget):
        self.oracle = oracle
        self.budget = budget

    def classify(self, img: np.ndarray) -> OracleVerdict:
        if self.budget.used >= self.budget.max_queries:
            raise BudgetExhausted(f"query budget {self.budget.max_queries} exhausted")
        self.oracle.check_shape(img)
        label = self.oracle.label(img)
        self.budget.used += 1
        return OracleVerdict(label=label, query_index=self.budget.used)


@dataclass
class HalfspaceOracle(Oracle):
    """label = 1 iff <w, img> + b > 0. Optimal delta from x: |<w,x>+b| / ||w||."""

    normal: np.ndarray
    bias: float
    num_classes: int = 2

    def __post_init__(self) -> None:
        self.normal = np.asarray(self.normal, dtype=np.float64)
        if self.normal.ndim != 3:
            raise ValueError("normal must have image shape (h, w, c)")
        self._w_norm = float(np.linalg.norm(self.normal))
        if self._w_norm <= 0.0 or not np.isfinite(self.normal).all() or not math.isfinite(self.bias):
            raise ValueError("halfspace parameters must be finite with ||w|| > 0")
        self.shape = self.normal.shape

    def label(self, img: np.ndarray) -> int:
        return int(float(np.vdot(self.normal, img)) + self.bias > 0.0)

    def signed_value(self, img: np.ndarray) -> float:
        return float(np.vdot(self.normal, img)) + self.bias

    def optimal_l2(self, x: np.ndarray) -> float:
        return abs(self.signed_value(x)) / self._w_norm


@dataclass
class SphereOracle(Oracle):
    """label = 1 iff ||img - c|| < r (inside). Optimal delta from x: |r - ||x-c|||."""

    center: np.ndarray
    radius: float
    num_classes: int = 2

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.center.ndim != 3:
            raise ValueError("center must have image shape (h, w, c)")
        if self.radius <= 0.0 or not np.isfinite(self.center).all():
            raise ValueError("sphere parameters must be finite with r > 0")
        self.shape = self.center.shape

    def label(self, img: np.ndarray) -> int:
        return int(l2_distance(img, self.center) < self.radius)

    def optimal_l2(self, x: np.ndarray) -> float:
        return abs(self.radius - l2_distance(x, self.center))


@dataclass
class PolytopeOracle(Oracle):
    """Benign region = intersection of halfspaces {<w_i, z> + b_i <= 0}.

    label = 0 inside, 1 once any face is crossed. For an interior x the
    optimal delta is the smallest face distance.
    """

    faces: list[tuple[np.ndarray, float]]
    num_classes: int = 2

    def __post_init__(self) -> None:
        if not self.faces:
            raise ValueError("polytope needs at least one face")
        norm_faces = []
        for w, b in self.faces:
            w = np.asarray(w, dtype=np.float64)
            if w.ndim != 3:
                raise ValueError("face normal must have image shape (h, w, c)")
            if float(np.linalg.norm(w)) <= 0.0:
                raise ValueError("face normal must be nonzero")
            norm_faces.append((w, float(b)))
        self.faces = norm_faces
        self.shape = self.faces[0][0].shape

    def label(self, img: np.ndarray) -> int:
        for w, b in self.faces:
            if float(np.vdot(w, img)) + b > 0.0:
                return 1
        return 0

    def optimal_l2(self, x: np.ndarray) -> float:
        dists = []
        for w, b in self.faces:
            value = float(np.vdot(w, x)) + b
            if value > 0.0:
                raise ValueError("optimal_l2 expects x inside the benign polytope")
            dists.append(-value / float(np.linalg.norm(w)))
        return min(dists)

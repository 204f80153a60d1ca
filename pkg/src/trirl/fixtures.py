"""Committed synthetic oracles on which the fixed-step alpha rule stalls.

Each fixture is a solid of revolution about a unit axis u anchored at the
benign image x (a constant 0.5 fill). Writing a point p as an axial coordinate
a = <p - x, u> and a radial one rho = ||p - x - a*u||, so that r = ||p - x||
and theta = atan2(rho, a), the misclassified region is

    wedge:  theta_lo <= theta <= theta_hi  and  r_lo <= r <= r_hi   (scaled by delta0)
    blob:   rho <= rho_axis and a_min <= a <= a_max                 (holds x_adv)

Rotational symmetry about u means every 2-D search plane through (x, x_adv)
sees the identical footprint, so the fixture behaves canonically no matter
which low-frequency direction gets sampled. The starting adversary
x_adv = x + delta0*u sits in the blob. Triangle candidates land at polar angle
theta = alpha, so a controller whose alpha only shrinks after failures keeps
querying below theta_lo forever, while one that can climb reaches the wedge
(alpha three grid steps above the pi/4 start) where candidates are both
misclassified and strictly closer than delta0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .attack import AttackConfig, AttackResult, run_attack
from .oracle import Oracle
from .tensor import as_image

FIXTURE_IDS = ("wedge-01", "wedge-02", "wedge-03", "wedge-04", "wedge-05")


@dataclass(frozen=True)
class TaFailureFixture:
    fixture_id: str
    shape: tuple[int, int, int]  # (h, w, c)
    delta0: float
    axis: str  # "dc" or "cos:<k>"
    theta_lo: float
    theta_hi: float
    r_lo: float  # wedge radii, in units of delta0
    r_hi: float
    rho_axis: float  # blob half-width, units of delta0
    a_min: float  # blob axial extent, units of delta0
    a_max: float
    seed: int

    def axis_vector(self) -> np.ndarray:
        h, w, c = self.shape
        if self.axis == "dc":
            u = np.ones(self.shape)
        elif self.axis.startswith("cos:"):
            k = int(self.axis.split(":", 1)[1])
            ramp = np.cos(math.pi * k * (np.arange(h) + 0.5) / h)
            u = np.broadcast_to(ramp[:, None, None], self.shape).copy()
        else:
            raise ValueError(f"unknown axis kind {self.axis!r}")
        return u / np.linalg.norm(u)

    def benign(self) -> np.ndarray:
        return np.full(self.shape, 0.5)

    def start_adv(self) -> np.ndarray:
        return self.benign() + self.delta0 * self.axis_vector()


class TaFailureOracle(Oracle):
    """Binary oracle: label 1 inside the revolved wedge-plus-blob region."""

    def __init__(self, fixture: TaFailureFixture):
        self.num_classes = 2
        self.shape = fixture.shape
        self.fixture = fixture
        self._x = fixture.benign().ravel()
        self._u = fixture.axis_vector().ravel()

    def label(self, img: np.ndarray) -> int:
        f = self.fixture
        d = as_image(img).ravel() - self._x
        a = float(d @ self._u)
        rho = float(np.linalg.norm(d - a * self._u))
        r = math.hypot(a, rho)
        theta = math.atan2(rho, a)
        in_wedge = (
            f.theta_lo <= theta <= f.theta_hi
            and f.r_lo * f.delta0 <= r <= f.r_hi * f.delta0
        )
        in_blob = rho <= f.rho_axis * f.delta0 and f.a_min * f.delta0 <= a <= f.a_max * f.delta0
        return 1 if (in_wedge or in_blob) else 0


def fixture_from_dict(raw: dict) -> TaFailureFixture:
    return TaFailureFixture(
        fixture_id=raw["fixture_id"],
        shape=tuple(raw["shape"]),
        delta0=raw["delta0"],
        axis=raw["axis"],
        theta_lo=raw["theta_lo"],
        theta_hi=raw["theta_hi"],
        r_lo=raw["r_lo"],
        r_hi=raw["r_hi"],
        rho_axis=raw["rho_axis"],
        a_min=raw["a_min"],
        a_max=raw["a_max"],
        seed=raw["seed"],
    )


def load_fixture(fixture_id: str) -> TaFailureFixture:
    if fixture_id not in FIXTURE_IDS:
        raise KeyError(f"unknown fixture {fixture_id!r}; have {', '.join(FIXTURE_IDS)}")
    text = resources.files("trirl").joinpath(f"fixtures/{fixture_id}.json").read_text()
    return fixture_from_dict(json.loads(text))


def load_all_fixtures() -> list[TaFailureFixture]:
    return [load_fixture(fid) for fid in FIXTURE_IDS]


def plane_point(fixture: TaFailureFixture, r: float, theta: float) -> np.ndarray:
    """Point at polar (r, theta) in one fixed plane through the axis.

    By the rotational symmetry the choice of in-plane normal direction is
    immaterial; audits use the first coordinate axis projected off u.
    """
    u = fixture.axis_vector().ravel()
    e = np.zeros(u.size)
    e[0] = 1.0
    v = e - (e @ u) * u
    if np.linalg.norm(v) < 1e-9:
        e[:] = 0.0
        e[1] = 1.0
        v = e - (e @ u) * u
    v /= np.linalg.norm(v)
    p = fixture.benign().ravel() + r * (math.cos(theta) * u + math.sin(theta) * v)
    return p.reshape(fixture.shape)


@dataclass
class AuditReport:
    fixture_id: str
    wedge_hits: int
    blob_hits: int
    start_adv_ok: bool
    benign_ok: bool
    ta_trajectory_clean: bool
    productive_alphas: list[float]

    @property
    def ok(self) -> bool:
        return (
            self.wedge_hits > 0
            and self.blob_hits > 0
            and self.start_adv_ok
            and self.benign_ok
            and self.ta_trajectory_clean
            and len(self.productive_alphas) >= 1
        )


def audit_fixture(
    fixture: TaFailureFixture,
    grid_points: int = 10_000,
    alpha_start: float = math.pi / 4,
    ta_gamma: float = 0.01,
    ta_lambda: float = 2.0,
    alpha_min: float = math.pi / 16,
    grid_step: float = math.pi / 64,
    queries: int = 500,
) -> AuditReport:
    """Brute-force region audit on a polar grid, plus trajectory checks.

    Simulates the failing alpha rule exactly (two probes per subspace pass at
    beta0 = pi - 2*alpha_pass, alpha shrinking by lambda*gamma per failure) and
    verifies none of those probe points is misclassified, and that candidates
    at alpha three-plus grid steps above the start are misclassified and
    strictly closer than delta0.
    """
    oracle = TaFailureOracle(fixture)
    d0 = fixture.delta0
    side = max(2, int(math.isqrt(grid_points)))
    thetas = np.linspace(0.0, math.pi, side)
    radii = np.linspace(1e-4 * d0, 1.5 * d0, side)
    wedge_hits = 0
    blob_hits = 0
    for th in thetas:
        for r in radii:
            if oracle.label(plane_point(fixture, r, th)) == 1:
                if th <= math.atan2(fixture.rho_axis, fixture.a_min) + 1e-9:
                    blob_hits += 1
                else:
                    wedge_hits += 1

    start_adv_ok = oracle.label(fixture.start_adv()) == 1
    benign_ok = oracle.label(fixture.benign()) == 0

    # exact replay of the shrinking-alpha probe sequence (all probes fail,
    # which the loop asserts by construction of the region)
    ta_clean = True
    alpha = min(max(alpha_start, alpha_min), math.pi / 2)
    q = 0
    while q < queries and ta_clean:
        alpha_pass = alpha
        beta0 = max(math.pi - 2.0 * alpha_pass, math.pi / 16)
        for _ in range(2):  # +beta0 side then -beta0 side; sign is immaterial here
            if q >= queries:
                break
            if alpha + beta0 < math.pi - 1e-6:
                r = d0 * math.sin(alpha + beta0) / math.sin(beta0)
                if oracle.label(plane_point(fixture, r, alpha)) == 1:
                    ta_clean = False
                q += 1
            alpha = max(alpha - ta_lambda * ta_gamma, alpha_min)

    productive = []
    for k in (3, 4, 5):
        a = alpha_start + k * grid_step
        beta0 = max(math.pi - 2.0 * a, math.pi / 16)
        r = d0 * math.sin(a + beta0) / math.sin(beta0)
        if r < d0 and oracle.label(plane_point(fixture, r, a)) == 1:
            productive.append(a)

    return AuditReport(
        fixture_id=fixture.fixture_id,
        wedge_hits=wedge_hits,
        blob_hits=blob_hits,
        start_adv_ok=start_adv_ok,
        benign_ok=benign_ok,
        ta_trajectory_clean=ta_clean,
        productive_alphas=productive,
    )


def run_fixture(fixture: TaFailureFixture, controller: str, max_queries: int = 500) -> AttackResult:
    """Attack the fixture from its committed starting adversary.

    freq_ratio 0.25 keeps the low-frequency cone at least two-dimensional on
    every fixture shape; with the default 0.1 an axis equal to the cone's only
    basis vector (the dc fixtures) would leave no orthogonal in-cone direction
    to build a search plane from. The revolved region looks the same in every
    plane through the axis, so the particular d2 drawn is immaterial.
    """
    oracle = TaFailureOracle(fixture)
    cfg = AttackConfig(
        controller=controller, max_queries=max_queries, freq_ratio=0.25, seed=fixture.seed
    )
    return run_attack(fixture.benign(), 0, oracle, cfg, start_adv=fixture.start_adv())


def improved(result: AttackResult) -> bool:
    """Did the attack beat the distance it started from?"""
    return (
        result.best_l2 is not None
        and result.init_l2 is not None
        and result.best_l2 < result.init_l2 - 1e-12
    )

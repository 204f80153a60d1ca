"""Attack drivers: initialization binary search, the TA alpha rule, and the
main triangle loop with its per-subspace beta binary search.

Control flow per subspace pass, with the incumbent adversary as the pass
anchor: probe beta0 = max(pi - 2*alpha, beta_lower) at +beta0 then (only if
that failed) at -beta0; if both fail, resample the subspace. Otherwise run N
midpoint iterations on [min(beta0, beta_ub), beta_ub]: a midpoint that is
adversarial on either side raises the feasible bound (candidates improve as
beta grows), a failed midpoint lowers the upper bound. Every query is traced
and fed to the controller (TA rule or Q-learning), every adversarial candidate
strictly closer than the incumbent is adopted, and every oracle call consumes
budget. Exhaustion terminates cleanly with the best incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rl
from .frequency import DegenerateDirectionError, sample_subspace
from .geometry import (
    DEGENERACY_MARGIN,
    beta_upper_bound,
    delta_new,
    initial_beta,
    place_candidate,
)
from .oracle import BudgetExhausted, CountingOracle, Oracle, QueryBudget
from .rl import AlphaGrid, AttackTrace, QTable, RlHyperparams
from .tensor import as_image, l2_distance, make_rng, rmse

CONTROLLER_TA = "ta"
CONTROLLER_TARL = "tarl"

DEFAULT_RMSE_CONSTANTS = (0.01, 0.05, 0.1, 0.5)


def default_grid() -> AlphaGrid:
    return AlphaGrid(alpha_min=math.pi / 16, alpha_max=math.pi / 2, step=math.pi / 64)


@dataclass
class AttackConfig:
    controller: str = CONTROLLER_TARL
    max_queries: int = 500
    iters_per_subspace: int = 2  # N midpoint iterations per sampled subspace
    beta_lower: float = math.pi / 16
    freq_ratio: float = 0.1
    alpha_start: float = math.pi / 4
    ta_gamma: float = 0.01
    ta_lambda: float = 2.0
    grid: AlphaGrid = field(default_factory=default_grid)
    hp: RlHyperparams = field(default_factory=RlHyperparams)
    reward_mode: str = rl.REWARD_NEG_L2
    explore_increase_only: bool = False
    seed: int = 0
    init_tol: float = 1e-3
    init_max_draws: int = 100
    init_max_bisect: int = 30
    count_init_queries: bool = True  # sensitivity flag; budgets include init by default
    rmse_constants: tuple[float, ...] = DEFAULT_RMSE_CONSTANTS
    initial_qtable: QTable | None = None  # persistence across images / harness fixtures

    def __post_init__(self) -> None:
        if self.controller not in (CONTROLLER_TA, CONTROLLER_TARL):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.max_queries < 1 or self.iters_per_subspace < 1:
            raise ValueError("max_queries and iters_per_subspace must be positive")
        if not 0.0 < self.beta_lower < math.pi:
            raise ValueError("beta_lower must be in (0, pi)")


@dataclass
class AttackResult:
    best_adv: np.ndarray | None
    best_l2: float | None
    queries_used: int
    trace: AttackTrace
    success_flags: dict[float, bool]
    init_l2: float | None
    init_queries: int
    qtable: QTable | None


def ta_alpha_step(
    alpha: float, was_adversarial: bool, gamma: float, lam: float, alpha_min: float, alpha_max: float
) -> float:
    """TA's rule: success -> alpha + gamma, failure -> alpha - lam*gamma, clipped."""
    alpha = alpha + gamma if was_adversarial else alpha - lam * gamma
    return min(max(alpha, alpha_min), alpha_max)


class _TaController:
    def __init__(self, cfg: AttackConfig):
        g = cfg.grid
        self.alpha = min(max(cfg.alpha_start, g.alpha_min), g.alpha_max)
        self._cfg = cfg
        self.qtable = None

    def observe(self, l2: float, adversarial: bool) -> None:
        g = self._cfg.grid
        self.alpha = ta_alpha_step(
            self.alpha, adversarial, self._cfg.ta_gamma, self._cfg.ta_lambda, g.alpha_min, g.alpha_max
        )


class _RlController:
    """One Q-learning transition per query: the previous action is credited
    with this query's reward, then the next action is selected (the first
    observation only selects, per the empty-table branch)."""

    def __init__(self, cfg: AttackConfig, rng: np.random.Generator):
        self._cfg = cfg
        self._rng = rng
        self.qtable = cfg.initial_qtable if cfg.initial_qtable is not None else rl.build_qtable(cfg.grid)
        self.alpha = cfg.grid.alpha_of(cfg.grid.state_of(cfg.alpha_start))
        self._last: tuple[int, int] | None = None

    def observe(self, l2: float, adversarial: bool) -> None:
        cfg = self._cfg
        state = cfg.grid.state_of(self.alpha)
        if self._last is not None:
            r = rl.reward(l2, adversarial, cfg.reward_mode)
            rl.update(self.qtable, self._last[0], self._last[1], r, state, cfg.hp)
        action, _, next_alpha = rl.select_action(
            state, self.qtable, cfg.hp, self._rng, cfg.explore_increase_only
        )
        self._last = (state, action)
        self.alpha = next_alpha


def initialize_adversary(
    x: np.ndarray,
    y: int,
    counting: CountingOracle,
    rng: np.random.Generator,
    tol: float = 1e-3,
    max_draws: int = 100,
    max_bisect: int = 30,
    on_query=None,
) -> tuple[np.ndarray | None, float | None]:
    """Find a first adversary: uniform draws until misclassified, then bisect
    [x, draw] keeping the misclassified endpoint until the segment is <= tol.

    Returns (adversary, l2) or (None, None) when no misclassified draw shows up
    within the draw bound. BudgetExhausted mid-bisection returns the current
    misclassified endpoint via the exception handler in run_attack.
    """
    found = None
    for _ in range(max_draws):
        img = rng.uniform(0.0, 1.0, size=x.shape)
        verdict = counting.classify(img)
        dist = l2_distance(x, img)
        adv = verdict.label != y
        if on_query is not None:
            on_query(dist, adv, verdict.query_index)
        if adv:
            found = (img, dist)
            break
    if found is None:
        return None, None
    hi, hi_dist = found
    lo = x
    for _ in range(max_bisect):
        if l2_distance(lo, hi) <= tol:
            break
        mid = 0.5 * (lo + hi)
        try:
            verdict = counting.classify(mid)
        except BudgetExhausted:
            break
        dist = l2_distance(x, mid)
        adv = verdict.label != y
        if on_query is not None:
            on_query(dist, adv, verdict.query_index)
        if adv:
            hi, hi_dist = mid, dist
        else:
            lo = mid
    return hi, hi_dist


def run_attack(
    x: np.ndarray,
    y: int,
    oracle: Oracle,
    cfg: AttackConfig,
    start_adv: np.ndarray | None = None,
) -> AttackResult:
    """Attack one image under a hard query budget; see the module docstring."""
    x = as_image(x)
    if oracle.label(x) != y:  # verification query, not budgeted
        raise ValueError("precondition violation: x is already misclassified")

    rng = make_rng(cfg.seed)
    budget = QueryBudget(cfg.max_queries)
    counting = CountingOracle(oracle, budget)
    trace = AttackTrace()
    controller = _TaController(cfg) if cfg.controller == CONTROLLER_TA else _RlController(cfg, rng)

    best: np.ndarray | None = None
    best_l2 = math.inf

    def record(dist: float, adv: bool, query_index: int) -> None:
        trace.append(controller.alpha, dist, adv, query_index)

    def query(img: np.ndarray, dist: float) -> bool:
        verdict = counting.classify(img)
        adv = verdict.label != y
        record(dist, adv, verdict.query_index)
        controller.observe(dist, adv)
        return adv

    def probe(anchor_l2: float, subspace, beta_mag: float, side: float) -> bool:
        nonlocal best, best_l2
        alpha = controller.alpha
        if beta_mag <= 0.0 or alpha + beta_mag >= math.pi - DEGENERACY_MARGIN:
            return False  # degenerate triangle: skip without spending a query
        radius = delta_new(anchor_l2, alpha, beta_mag)
        cand, dist = place_candidate(x, subspace, radius, alpha, side)
        adv = query(cand, dist)
        if adv and dist < best_l2:
            best, best_l2 = cand, dist
        return adv

    init_queries = 0
    init_l2: float | None = None
    try:
        if start_adv is not None:
            start_adv = as_image(start_adv)
            verdict = counting.classify(start_adv)
            dist = l2_distance(x, start_adv)
            adv = verdict.label != y
            record(dist, adv, verdict.query_index)
            if not adv:
                raise ValueError("start_adv is not adversarial for this oracle")
            best, best_l2 = start_adv, dist
        else:
            found, found_l2 = initialize_adversary(
                x, y, counting, rng,
                tol=cfg.init_tol, max_draws=cfg.init_max_draws, max_bisect=cfg.init_max_bisect,
                on_query=record,
            )
            if found is None:
                return AttackResult(None, None, budget.used, trace, _flags(cfg, None), None, len(trace),
                                    getattr(controller, "qtable", None))
            best, best_l2 = found, found_l2

        init_queries = len(trace)
        init_l2 = best_l2
        if not cfg.count_init_queries:
            budget.max_queries += budget.used  # sensitivity mode: budget starts after init

        while True:
            try:
                subspace = sample_subspace(x, best, cfg.freq_ratio, rng)
            except DegenerateDirectionError:
                break
            anchor_l2 = best_l2
            beta0 = initial_beta(controller.alpha, cfg.beta_lower)
            if not (probe(anchor_l2, subspace, beta0, 1.0) or probe(anchor_l2, subspace, beta0, -1.0)):
                continue  # both beta0 sides failed: resample subspace
            beta_hi = beta_upper_bound(controller.alpha)
            if beta_hi < cfg.beta_lower:
                continue  # no valid search window at this alpha
            beta_lo = min(beta0, beta_hi)
            for _ in range(cfg.iters_per_subspace):
                beta_hi = min(beta_hi, beta_upper_bound(controller.alpha))
                beta_lo = min(beta_lo, beta_hi)
                if beta_hi < cfg.beta_lower:
                    break
                assert cfg.beta_lower - 1e-12 <= beta_lo <= beta_hi <= beta_upper_bound(controller.alpha) + 1e-12
                beta_mid = 0.5 * (beta_lo + beta_hi)
                if probe(anchor_l2, subspace, beta_mid, 1.0) or probe(anchor_l2, subspace, beta_mid, -1.0):
                    beta_lo = beta_mid
                else:
                    beta_hi = beta_mid
    except BudgetExhausted:
        pass

    if best is None:
        return AttackResult(None, None, budget.used, trace, _flags(cfg, None), init_l2, init_queries,
                            getattr(controller, "qtable", None))
    return AttackResult(
        best_adv=best,
        best_l2=best_l2,
        queries_used=budget.used,
        trace=trace,
        success_flags=_flags(cfg, rmse(x, best) if best is not None else None),
        init_l2=init_l2,
        init_queries=init_queries,
        qtable=getattr(controller, "qtable", None),
    )


def _flags(cfg: AttackConfig, rmse_value: float | None) -> dict[float, bool]:
    return {c: (rmse_value is not None and rmse_value <= c) for c in cfg.rmse_constants}

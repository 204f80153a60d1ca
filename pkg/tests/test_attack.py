"""Attack loop invariants: budget accounting, determinism, controller rules."""

from __future__ import annotations

import math

import numpy as np
import pytest

from trirl.attack import AttackConfig, initialize_adversary, run_attack, ta_alpha_step
from trirl.oracle import CountingOracle, HalfspaceOracle, Oracle, QueryBudget
from trirl.rl import AlphaGrid, RlHyperparams, build_qtable
from trirl.tensor import make_rng, rmse

SHAPE = (4, 4, 1)


def _halfspace(seed=0, offset=0.3):
    rng = make_rng(seed)
    w = rng.standard_normal(SHAPE)
    w /= np.linalg.norm(w)
    x = np.clip(rng.random(SHAPE), 0.2, 0.8)
    b = -float(np.vdot(w, x)) - offset
    return x, HalfspaceOracle(w, b)


class TestTaAlphaStep:
    def test_frozen_values(self):
        assert ta_alpha_step(0.5, True, 0.01, 2.0, 0.1, 1.5) == pytest.approx(0.51, abs=1e-15)
        assert ta_alpha_step(0.5, False, 0.01, 2.0, 0.1, 1.5) == pytest.approx(0.48, abs=1e-15)

    def test_clipping(self):
        assert ta_alpha_step(1.5, True, 0.01, 2.0, 0.1, 1.5) == 1.5
        assert ta_alpha_step(0.1, False, 0.01, 2.0, 0.1, 1.5) == 0.1


class TestBudget:
    def test_trace_matches_used_and_caps_at_q(self):
        x, oracle = _halfspace(3)
        for q in (5, 17, 60):
            for controller in ("ta", "tarl"):
                cfg = AttackConfig(controller=controller, max_queries=q, seed=7, freq_ratio=0.5)
                res = run_attack(x, 0, oracle, cfg)
                assert res.queries_used == len(res.trace) <= q
                indices = [e.query_index for e in res.trace]
                assert indices == list(range(1, len(res.trace) + 1))

    def test_saturates_exactly(self):
        x, oracle = _halfspace(5)
        cfg = AttackConfig(controller="tarl", max_queries=80, seed=1, freq_ratio=0.5)
        res = run_attack(x, 0, oracle, cfg)
        assert res.queries_used == 80

    def test_free_init_extends_budget(self):
        x, oracle = _halfspace(5)
        base = dict(controller="tarl", max_queries=80, seed=1, freq_ratio=0.5)
        counted = run_attack(x, 0, oracle, AttackConfig(**base))
        free = run_attack(x, 0, oracle, AttackConfig(**base, count_init_queries=False))
        assert free.init_queries == counted.init_queries
        assert free.queries_used == 80 + free.init_queries
        assert free.queries_used == len(free.trace)

    def test_tiny_budget_returns_cleanly(self):
        x, oracle = _halfspace(9)
        res = run_attack(x, 0, oracle, AttackConfig(max_queries=3, seed=2, freq_ratio=0.5))
        assert res.queries_used == len(res.trace) <= 3


class TestDeterminism:
    def test_byte_identical_replay(self):
        x, oracle = _halfspace(11)
        cfg = AttackConfig(controller="tarl", max_queries=120, seed=42, freq_ratio=0.5)
        a = run_attack(x, 0, oracle, cfg)
        b = run_attack(x, 0, oracle, cfg)
        assert a.trace.as_rows() == b.trace.as_rows()
        assert a.best_adv.tobytes() == b.best_adv.tobytes()
        assert a.best_l2 == b.best_l2
        np.testing.assert_array_equal(a.qtable.values, b.qtable.values)

    def test_seed_changes_trajectory(self):
        x, oracle = _halfspace(11)
        base = dict(controller="tarl", max_queries=120, freq_ratio=0.5)
        a = run_attack(x, 0, oracle, AttackConfig(**base, seed=1))
        b = run_attack(x, 0, oracle, AttackConfig(**base, seed=2))
        assert a.trace.as_rows() != b.trace.as_rows()


class _PointOracle(Oracle):
    """Adversarial at exactly one committed image, benign everywhere else."""

    def __init__(self, adv: np.ndarray):
        self.num_classes = 2
        self.shape = tuple(adv.shape)
        self._adv = adv.copy()

    def label(self, img: np.ndarray) -> int:
        return int(np.array_equal(img, self._adv))


class TestControllerEquivalence:
    def test_ta_and_tarl_walk_identically_on_all_failures(self):
        # On a dyadic grid with lambda = 1 and gamma = one grid step, the TA
        # rule and a greedy Q-walk seeded to prefer "decrease" take the same
        # alpha path when every triangle query fails, so the whole trajectory
        # (and therefore the trace) must match query for query.
        x = np.full(SHAPE, 0.5)
        start = x.copy()
        start[0, 0, 0] = 0.9
        oracle = _PointOracle(start)
        grid = AlphaGrid(0.25, 2.0, 0.25)
        qtable = build_qtable(grid)
        qtable.values[:, 1] = 1.0  # prefer decrease everywhere
        common = dict(
            max_queries=41, seed=5, freq_ratio=0.5, alpha_start=1.0, grid=grid,
            ta_gamma=0.25, ta_lambda=1.0,
        )
        res_ta = run_attack(x, 0, oracle, AttackConfig(controller="ta", **common), start_adv=start)
        res_rl = run_attack(
            x, 0, oracle,
            AttackConfig(
                controller="tarl", hp=RlHyperparams(exploration=0.0), initial_qtable=qtable, **common
            ),
            start_adv=start,
        )
        assert res_ta.trace.as_rows() == res_rl.trace.as_rows()
        assert res_ta.best_l2 == res_rl.best_l2
        assert res_ta.queries_used == res_rl.queries_used == 41
        # nothing ever improved on the committed point
        assert res_ta.best_adv.tobytes() == start.tobytes()


class TestPreconditions:
    def test_misclassified_input_rejected(self):
        x, oracle = _halfspace(3)
        with pytest.raises(ValueError, match="already misclassified"):
            run_attack(x, 1, oracle, AttackConfig(seed=0))

    def test_benign_start_adv_rejected(self):
        x, oracle = _halfspace(3)
        with pytest.raises(ValueError, match="not adversarial"):
            run_attack(x, 0, oracle, AttackConfig(seed=0), start_adv=x.copy())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AttackConfig(controller="sign-opt")
        with pytest.raises(ValueError):
            AttackConfig(max_queries=0)
        with pytest.raises(ValueError):
            AttackConfig(iters_per_subspace=0)
        with pytest.raises(ValueError):
            AttackConfig(beta_lower=0.0)


class TestInitialization:
    def test_bisection_lands_near_boundary(self):
        x, oracle = _halfspace(21)
        counting = CountingOracle(oracle, QueryBudget(200))
        adv, dist = initialize_adversary(x, 0, counting, make_rng(1), tol=1e-3)
        assert adv is not None
        assert oracle.label(adv) == 1
        # misclassified end of a segment narrower than tol straddling the plane
        assert oracle.signed_value(adv) <= float(np.linalg.norm(oracle.normal)) * 1e-3
        assert dist == pytest.approx(float(np.linalg.norm((adv - x).ravel())), rel=1e-12)

    def test_unreachable_class_returns_none(self):
        rng = make_rng(2)
        w = np.ones(SHAPE)
        x = np.full(SHAPE, 0.5)
        oracle = HalfspaceOracle(w, -100.0)  # plane far outside the unit box
        counting = CountingOracle(oracle, QueryBudget(500))
        adv, dist = initialize_adversary(x, 0, counting, rng, max_draws=50)
        assert adv is None and dist is None
        assert counting.budget.used == 50

    def test_run_attack_reports_failure(self):
        x = np.full(SHAPE, 0.5)
        oracle = HalfspaceOracle(np.ones(SHAPE), -100.0)
        res = run_attack(x, 0, oracle, AttackConfig(max_queries=120, seed=3, freq_ratio=0.5))
        assert res.best_adv is None and res.best_l2 is None
        assert not any(res.success_flags.values())
        assert res.queries_used == len(res.trace)


class TestResultContract:
    def test_improvement_and_flags(self):
        x, oracle = _halfspace(13)
        cfg = AttackConfig(controller="tarl", max_queries=200, seed=4, freq_ratio=0.5)
        res = run_attack(x, 0, oracle, cfg)
        assert res.best_l2 <= res.init_l2 + 1e-12
        assert oracle.label(res.best_adv) == 1
        assert res.best_adv.min() >= 0.0 and res.best_adv.max() <= 1.0
        value = rmse(x, res.best_adv)
        assert res.success_flags == {c: value <= c for c in cfg.rmse_constants}

    def test_best_l2_matches_trace_minimum(self):
        x, oracle = _halfspace(17)
        res = run_attack(x, 0, oracle, AttackConfig(max_queries=150, seed=6, freq_ratio=0.5))
        adv_dists = [e.l2 for e in res.trace if e.adversarial]
        assert res.best_l2 == pytest.approx(min(adv_dists), rel=1e-12)

    def test_alpha_stays_on_grid_range(self):
        x, oracle = _halfspace(19)
        cfg = AttackConfig(controller="tarl", max_queries=150, seed=8, freq_ratio=0.5)
        res = run_attack(x, 0, oracle, cfg)
        for e in res.trace:
            assert cfg.grid.alpha_min - 1e-12 <= e.alpha <= cfg.grid.alpha_max + 1e-12

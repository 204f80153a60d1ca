"""Tabular Q-learning controller for the learned angle alpha.

States discretize alpha on a fixed grid; the two actions move one grid step up
or down (0 = increase, 1 = decrease). Rewards come from query outcomes: the
default mode pays -l2 for an adversarial candidate and 0 otherwise, the
alternate mode pays 1/l2 instead (both appear in the source material; the
choice is logged with results).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

ACTION_INCREASE = 0
ACTION_DECREASE = 1
NUM_ACTIONS = 2

REWARD_NEG_L2 = "neg-l2"
REWARD_INV_L2 = "inv-l2"
INV_L2_CAP = 1e9


@dataclass(frozen=True)
class AlphaGrid:
    alpha_min: float
    alpha_max: float
    step: float

    def __post_init__(self) -> None:
        if not self.alpha_min < self.alpha_max:
            raise ValueError(f"need alpha_min < alpha_max, got [{self.alpha_min}, {self.alpha_max}]")
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.num_states < 1:
            raise ValueError("degenerate grid: zero states")

    @property
    def num_states(self) -> int:
        # Literal construction loop: start at alpha_min, add step while < alpha_max.
        count = 0
        a = self.alpha_min
        while a < self.alpha_max:
            count += 1
            a += self.step
        return count

    def alpha_of(self, state: int) -> float:
        return self.alpha_min + state * self.step

    def state_of(self, alpha: float) -> int:
        i = int(round((alpha - self.alpha_min) / self.step))
        return min(max(i, 0), self.num_states - 1)


@dataclass
class RlHyperparams:
    learning_rate: float = 0.1
    discount: float = 0.9
    exploration: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0, 1)")
        if not 0.0 <= self.exploration <= 1.0:
            raise ValueError("exploration must be in [0, 1]")


@dataclass
class QTable:
    grid: AlphaGrid
    num_actions: int
    values: np.ndarray

    def dump_json(self) -> str:
        return json.dumps(
            {
                "alpha_min": self.grid.alpha_min,
                "alpha_max": self.grid.alpha_max,
                "step": self.grid.step,
                "values": [float(v) for v in self.values.ravel()],
            }
        )


def build_qtable(grid: AlphaGrid, num_actions: int = NUM_ACTIONS) -> QTable:
    """All-zero table with one row per grid state (strict-< construction loop)."""
    if num_actions < 2:
        raise ValueError("num_actions must be >= 2")
    return QTable(grid=grid, num_actions=num_actions, values=np.zeros((grid.num_states, num_actions)))


def select_action(
    state: int,
    table: QTable,
    hp: RlHyperparams,
    rng: np.random.Generator,
    explore_increase_only: bool = False,
) -> tuple[int, int, float]:
    """Epsilon-greedy step on the alpha grid.

    Exploration takes a uniform-random action, or always the increase action
    when explore_increase_only is set. Exploitation takes the row argmax
    (ties -> lowest index). Returns (action, next_state, next_alpha) with the
    state move clipped at the grid ends.
    """
    grid = table.grid
    if not 0 <= state < grid.num_states:
        raise ValueError(f"state {state} out of range")
    if hp.exploration > 0.0 and rng.random() < hp.exploration:
        action = ACTION_INCREASE if explore_increase_only else int(rng.integers(table.num_actions))
    else:
        action = int(np.argmax(table.values[state]))
    move = 1 if action == ACTION_INCREASE else -1
    next_state = min(max(state + move, 0), grid.num_states - 1)
    return action, next_state, grid.alpha_of(next_state)


def reward(l2: float, adversarial: bool, mode: str = REWARD_NEG_L2) -> float:
    """Query-outcome reward: -l2 (default) or 1/l2 (alternate) when adversarial, else 0."""
    if not adversarial:
        return 0.0
    if mode == REWARD_NEG_L2:
        return -l2
    if mode == REWARD_INV_L2:
        if l2 <= 1.0 / INV_L2_CAP:
            return INV_L2_CAP
        return 1.0 / l2
    raise ValueError(f"unknown reward mode {mode!r}")


def update(table: QTable, state: int, action: int, r: float, next_state: int, hp: RlHyperparams) -> None:
    """One Bellman step: Q[s,a] += lr * (r + discount * max Q[s'] - Q[s,a])."""
    q = table.values
    q[state, action] += hp.learning_rate * (r + hp.discount * float(np.max(q[next_state])) - q[state, action])


@dataclass
class TraceEntry:
    alpha: float
    l2: float
    adversarial: bool
    query_index: int


@dataclass
class AttackTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def append(self, alpha: float, l2: float, adversarial: bool, query_index: int) -> None:
        if self.entries and query_index <= self.entries[-1].query_index:
            raise ValueError("query_index must strictly increase")
        self.entries.append(TraceEntry(alpha, l2, adversarial, query_index))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def as_rows(self) -> list[list]:
        return [[e.alpha, e.l2, e.adversarial, e.query_index] for e in self.entries]

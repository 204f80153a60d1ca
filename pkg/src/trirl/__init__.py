"""Query-budgeted hard-label adversarial attack engine.

Triangle-geometry candidate search in a random low-frequency plane, driven by
either a fixed-step angle rule (`ta`) or a tabular Q-learning controller
(`tarl`), against synthetic analytically-solvable oracles or a remote model
bridge speaking newline-delimited JSON.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .attack import AttackConfig, AttackResult, run_attack
from .evaluate import compute_asr, is_success, make_oracle, run_benchmark
from .geometry import TriangleParams, candidate, delta_new
from .oracle import (
    BudgetExhausted,
    CountingOracle,
    HalfspaceOracle,
    Oracle,
    OracleVerdict,
    PolytopeOracle,
    QueryBudget,
    SphereOracle,
)
from .tensor import l2_distance, read_tensor, rmse, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "BudgetExhausted",
    "CountingOracle",
    "HalfspaceOracle",
    "KERNEL_BACKEND",
    "Oracle",
    "OracleVerdict",
    "PolytopeOracle",
    "QueryBudget",
    "SphereOracle",
    "TriangleParams",
    "candidate",
    "compute_asr",
    "delta_new",
    "is_success",
    "l2_distance",
    "make_oracle",
    "read_tensor",
    "rmse",
    "run_attack",
    "run_benchmark",
    "write_tensor",
    "__version__",
]

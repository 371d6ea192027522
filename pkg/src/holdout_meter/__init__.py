"""Budget manager for the statistical power of reused ML test sets.

Plans the minimum number of sealed test labels needed to support T adaptive
development iterations with (epsilon, delta) guarantees, and runs live
metering sessions that return banded overfitting signals while enforcing
submission, revert, and tenant budgets.
"""

from .engine import Session, SignalReport, SubmissionRecord
from .errors import MeterError
from .oracle import enumerate_tree
from .planner import (
    PlanReport,
    SubmissionCounts,
    count_incremental,
    count_multitenant,
    count_regular,
    count_time_travel,
    log_survival,
    plan,
    size_independent,
    size_resampling,
    size_single,
    solve_size,
)
from .registry import LabeledDataset, Principal, Registry, Role
from .service import MeterService
from .simulator import (
    BranchingStrategy,
    ObliviousStrategy,
    SimulationResult,
    WorstCaseTreeStrategy,
    replay_trace,
    run_trials,
)
from .specs import EpsilonSchedule, MeterSpec, Mode, equal_bands, uniform_spec

__version__ = "0.1.0"

__all__ = [
    "BranchingStrategy",
    "EpsilonSchedule",
    "LabeledDataset",
    "MeterError",
    "MeterService",
    "MeterSpec",
    "Mode",
    "ObliviousStrategy",
    "PlanReport",
    "Principal",
    "Registry",
    "Role",
    "Session",
    "SignalReport",
    "SimulationResult",
    "SubmissionCounts",
    "SubmissionRecord",
    "WorstCaseTreeStrategy",
    "count_incremental",
    "count_multitenant",
    "count_regular",
    "count_time_travel",
    "enumerate_tree",
    "equal_bands",
    "log_survival",
    "plan",
    "replay_trace",
    "run_trials",
    "size_independent",
    "size_resampling",
    "size_single",
    "solve_size",
    "uniform_spec",
]

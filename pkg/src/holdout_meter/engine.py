"""Live metering sessions.

A session holds the budgets a plan paid for and turns prediction uploads
into banded overfitting signals. All state transitions are pure functions
of (session, event payload), so replaying a persisted event log reproduces
the exact same reports the live path returned.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .errors import (
    ClosedSessionError,
    CoverageError,
    EmptyHistoryError,
    ExhaustedSessionError,
    IdentityReuseError,
    NoRemainingTenantError,
    NoRevertBudgetError,
    NotExhaustedError,
    PrematureHandoffError,
    TenantBudgetError,
    UndersizedTestSetError,
    UnsealedTestSetError,
    ValidationError,
)
from .planner import PlanReport, SubmissionCounts
from .registry import LabeledDataset
from .specs import EpsilonSchedule, MeterSpec, Mode


class SessionState(str, Enum):
    ACTIVE = "active"
    EXHAUSTED = "exhausted"
    CLOSED = "closed"


@dataclass(frozen=True)
class SubmissionRecord:
    """One accepted submission; loss counts are kept as exact integers."""

    step: int
    digest: str
    val_errors: int
    val_size: int
    test_errors: int
    test_size: int
    signal: int
    timestamp: str

    @property
    def val_loss(self) -> float:
        return self.val_errors / self.val_size

    @property
    def test_loss(self) -> float:
        return self.test_errors / self.test_size

    @property
    def empirical_overfitting(self) -> float:
        return abs(self.val_loss - self.test_loss)

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "digest": self.digest,
            "val_errors": self.val_errors,
            "val_size": self.val_size,
            "test_errors": self.test_errors,
            "test_size": self.test_size,
            "signal": self.signal,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SubmissionRecord":
        return cls(**d)


@dataclass(frozen=True)
class SignalReport:
    """What a developer learns from one mutation.

    Incremental sessions expose only the running-max signal: the raw
    per-step band and the exact overfitting value stay hidden, because the
    size guarantee is budgeted over the running-max alphabet alone.
    """

    mode: Mode
    step: int
    signal: int | None
    incremental_signal: int
    band: tuple[float, float] | None
    epsilon_bound: float | None
    delta: float
    empirical_overfitting: float | None
    remaining_submissions: int
    remaining_reverts: int
    interval: tuple[float, float] | None
    state: SessionState

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "step": self.step,
            "signal": self.signal,
            "incremental_signal": self.incremental_signal,
            "band": list(self.band) if self.band else None,
            "epsilon_bound": self.epsilon_bound,
            "delta": self.delta,
            "empirical_overfitting": self.empirical_overfitting,
            "remaining_submissions": self.remaining_submissions,
            "remaining_reverts": self.remaining_reverts,
            "interval": list(self.interval) if self.interval else None,
            "state": self.state.value,
        }


def ovft_interval(spec: MeterSpec, signal: int) -> tuple[float, float]:
    """Bound on |overfitting vs the true distribution| given a signal.

    The band holds the empirical gap and the tolerance bounds the test
    set's own drift, so the combined interval is the band widened by the
    signal's epsilon, clamped at 0.
    """
    lo, hi = spec.bands[signal - 1]
    eps = spec.schedule[signal - 1]
    # band edges and tolerances are human-entered decimals; rounding the
    # endpoint sums keeps the wire form exact (0.05 + 0.01 -> 0.06)
    return (round(max(0.0, lo - eps), 12), round(hi + eps, 12))


def predictions_digest(predictions: Mapping[str, int]) -> str:
    canonical = json.dumps(sorted(predictions.items()), separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class Session:
    """Single-writer state machine for one development cycle."""

    id: str
    spec: MeterSpec
    plan: PlanReport
    val_ref: str
    test_ref: str
    history: list[SubmissionRecord] = field(default_factory=list)
    archived: list[list[SubmissionRecord]] = field(default_factory=list)
    used_test_refs: list[str] = field(default_factory=list)
    high_water: int = 0
    remaining_submissions: int = 0
    remaining_reverts: int = 0
    tenant_cursor: int = 0
    tenant_used: int = 0
    tenant_starts: list[int] = field(default_factory=lambda: [0])
    steps_taken: int = 0
    state: SessionState = SessionState.ACTIVE
    seq: int = 0

    @property
    def tenant_start(self) -> int:
        return self.tenant_starts[-1]

    @property
    def required_size(self) -> int:
        return self.plan.required_size

    def summary(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "state": self.state.value,
            "mode": self.spec.mode.value,
            "m": self.spec.m,
            "T": self.spec.T,
            "required_size": self.plan.required_size,
            "val_ref": self.val_ref,
            "test_ref": self.test_ref,
            "high_water": self.high_water,
            "remaining_submissions": self.remaining_submissions,
            "remaining_reverts": self.remaining_reverts,
            "tenant_cursor": self.tenant_cursor,
            "tenant_used": self.tenant_used,
            "tenancy": list(self.spec.tenancy),
            "submissions": len(self.history),
            "rotations": len(self.archived),
            "seq": self.seq,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "spec": self.spec.to_dict(),
            "plan": self.plan.to_dict(),
            "val_ref": self.val_ref,
            "test_ref": self.test_ref,
            "history": [r.to_dict() for r in self.history],
            "archived": [[r.to_dict() for r in rot] for rot in self.archived],
            "used_test_refs": list(self.used_test_refs),
            "high_water": self.high_water,
            "remaining_submissions": self.remaining_submissions,
            "remaining_reverts": self.remaining_reverts,
            "tenant_cursor": self.tenant_cursor,
            "tenant_used": self.tenant_used,
            "tenant_starts": list(self.tenant_starts),
            "steps_taken": self.steps_taken,
            "state": self.state.value,
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Session":
        plan_d = d["plan"]
        plan = PlanReport(
            required_size=plan_d["required_size"],
            counts=SubmissionCounts(
                tuple(int(c) for c in plan_d["counts"]["per_signal"]),
                variant=plan_d["counts"]["variant"],
            ),
            schedule=EpsilonSchedule(tuple(plan_d["epsilons"])),
            delta=plan_d["delta"],
            log_survival_at_n=plan_d["log_survival_at_n"],
            baseline_resampling=plan_d["baselines"]["resampling"],
            baseline_independent=plan_d["baselines"]["independent"],
            baseline_single=plan_d["baselines"]["single_use"],
        )
        return cls(
            id=d["id"],
            spec=MeterSpec.from_dict(d["spec"]),
            plan=plan,
            val_ref=d["val_ref"],
            test_ref=d["test_ref"],
            history=[SubmissionRecord.from_dict(r) for r in d["history"]],
            archived=[[SubmissionRecord.from_dict(r) for r in rot] for rot in d["archived"]],
            used_test_refs=list(d["used_test_refs"]),
            high_water=d["high_water"],
            remaining_submissions=d["remaining_submissions"],
            remaining_reverts=d["remaining_reverts"],
            tenant_cursor=d["tenant_cursor"],
            tenant_used=d["tenant_used"],
            tenant_starts=list(d["tenant_starts"]),
            steps_taken=d["steps_taken"],
            state=SessionState(d["state"]),
            seq=d["seq"],
        )


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------


def create_session(
    session_id: str,
    spec: MeterSpec,
    plan: PlanReport,
    val_dataset: LabeledDataset,
    test_dataset: LabeledDataset,
    timestamp: str,
    enforce_size: bool = True,
) -> Session:
    """Open a session against a sealed test set of planned size.

    ``enforce_size`` exists for the simulator's deliberately undersized
    sanity runs; production callers always leave it on.
    """
    if not test_dataset.sealed:
        raise UnsealedTestSetError(
            f"test dataset {test_dataset.id!r} must be sealed before metering"
        )
    if enforce_size and test_dataset.size < plan.required_size:
        raise UndersizedTestSetError(plan.required_size, test_dataset.size)
    return Session(
        id=session_id,
        spec=spec,
        plan=plan,
        val_ref=val_dataset.id,
        test_ref=test_dataset.id,
        used_test_refs=[test_dataset.id],
        remaining_submissions=spec.T,
        remaining_reverts=spec.revert_budget,
        seq=0,
    )


def _require_active(session: Session) -> None:
    if session.state is SessionState.CLOSED:
        raise ClosedSessionError(f"session {session.id} is closed")
    if session.state is SessionState.EXHAUSTED:
        raise ExhaustedSessionError(
            f"session {session.id} has no submissions left; rotate the test set"
        )


def report_from_state(session: Session) -> SignalReport:
    """Report reflecting the latest retained record (or the empty state)."""
    last = session.history[-1] if session.history else None
    incremental = session.high_water
    if session.spec.mode is Mode.INCREMENTAL:
        shown: int | None = incremental if incremental else None
        delta_val: float | None = None
        raw_signal: int | None = None
    else:
        shown = last.signal if last else None
        delta_val = last.empirical_overfitting if last else None
        raw_signal = last.signal if last else None
    band = session.spec.bands[shown - 1] if shown else None
    eps = session.spec.schedule[shown - 1] if shown else None
    interval = ovft_interval(session.spec, shown) if shown else None
    return SignalReport(
        mode=session.spec.mode,
        step=last.step if last else 0,
        signal=raw_signal,
        incremental_signal=incremental,
        band=band,
        epsilon_bound=eps,
        delta=session.spec.delta,
        empirical_overfitting=delta_val,
        remaining_submissions=session.remaining_submissions,
        remaining_reverts=session.remaining_reverts,
        interval=interval,
        state=session.state,
    )


def compute_losses(
    predictions: Mapping[str, int],
    val_dataset: LabeledDataset,
    test_dataset: LabeledDataset,
) -> tuple[int, int, int, int]:
    """Exact-match 0-1 error counts on both datasets.

    Predictions must cover the union of both id sets exactly; losses are
    computed server-side so labels never leave the registry.
    """
    expected = set(val_dataset.items) | set(test_dataset.items)
    supplied = set(predictions)
    missing = len(expected - supplied)
    extra = len(supplied - expected)
    if missing or extra:
        raise CoverageError(
            f"predictions must cover validation and test ids exactly: "
            f"{missing} missing, {extra} unknown",
            missing=missing,
            extra=extra,
        )
    for ex_id, pred in predictions.items():
        if isinstance(pred, bool) or not isinstance(pred, int):
            raise ValidationError(f"prediction for {ex_id!r} must be an integer")
    val_errors = sum(1 for i, y in val_dataset.items.items() if predictions[i] != y)
    test_errors = sum(1 for i, y in test_dataset.items.items() if predictions[i] != y)
    return val_errors, val_dataset.size, test_errors, test_dataset.size


def apply_submission(
    session: Session,
    digest: str,
    val_errors: int,
    val_size: int,
    test_errors: int,
    test_size: int,
    timestamp: str,
) -> SignalReport:
    """Accept one submission: band the gap, advance budgets and high water."""
    _require_active(session)
    tenancy = session.spec.tenancy
    if session.tenant_used >= tenancy[session.tenant_cursor]:
        raise TenantBudgetError(
            f"tenant {session.tenant_cursor + 1} used its {tenancy[session.tenant_cursor]}"
            f" steps; hand off before submitting again"
        )
    gap = abs(val_errors / val_size - test_errors / test_size)
    signal = session.spec.signal_for(gap)
    record = SubmissionRecord(
        step=session.steps_taken + 1,
        digest=digest,
        val_errors=val_errors,
        val_size=val_size,
        test_errors=test_errors,
        test_size=test_size,
        signal=signal,
        timestamp=timestamp,
    )
    session.history.append(record)
    session.steps_taken += 1
    session.tenant_used += 1
    session.high_water = max(session.high_water, signal)
    session.remaining_submissions -= 1
    if session.remaining_submissions == 0:
        session.state = SessionState.EXHAUSTED
    return report_from_state(session)


def submit(
    session: Session,
    predictions: Mapping[str, int],
    val_dataset: LabeledDataset,
    test_dataset: LabeledDataset,
    timestamp: str,
) -> tuple[SignalReport, dict[str, Any]]:
    """Live submission path; returns the report and the replayable payload."""
    _require_active(session)
    val_errors, val_size, test_errors, test_size = compute_losses(
        predictions, val_dataset, test_dataset
    )
    digest = predictions_digest(predictions)
    payload = {
        "digest": digest,
        "val_errors": val_errors,
        "val_size": val_size,
        "test_errors": test_errors,
        "test_size": test_size,
    }
    report = apply_submission(session, timestamp=timestamp, **payload)
    return report, payload


def apply_revert(session: Session, timestamp: str) -> SignalReport:
    """Pop the last submission; the spent submission slot is not refunded."""
    if session.state is SessionState.CLOSED:
        raise ClosedSessionError(f"session {session.id} is closed")
    if session.spec.revert_budget == 0 or session.remaining_reverts <= 0:
        raise NoRevertBudgetError("no revert budget remaining")
    if not session.history:
        raise EmptyHistoryError("no submission to revert")
    session.history.pop()
    session.remaining_reverts -= 1
    session.high_water = max(
        (r.signal for r in session.history[session.tenant_start :]), default=0
    )
    return report_from_state(session)


def apply_handoff(session: Session, timestamp: str) -> Session:
    """Advance to the next tenant; the newcomer starts with a clean slate."""
    if session.state is SessionState.CLOSED:
        raise ClosedSessionError(f"session {session.id} is closed")
    if session.tenant_cursor + 1 >= session.spec.tenants:
        raise NoRemainingTenantError("no further tenant to hand off to")
    quota = session.spec.tenancy[session.tenant_cursor]
    if session.tenant_used < quota:
        raise PrematureHandoffError(
            f"tenant {session.tenant_cursor + 1} has used {session.tenant_used}"
            f" of {quota} steps"
        )
    session.tenant_cursor += 1
    session.tenant_used = 0
    session.tenant_starts.append(len(session.history))
    if session.spec.mode is Mode.INCREMENTAL:
        # the new tenant's signals are budgeted against a fresh history
        session.high_water = 0
    return session


def ensure_rotatable(session: Session) -> None:
    """State preconditions for rotation; checked before dataset lookup so a
    wrong-phase call is reported as such even if the replacement ref is bad."""
    if session.state is SessionState.CLOSED:
        raise ClosedSessionError(f"session {session.id} is closed")
    if session.state is not SessionState.EXHAUSTED:
        raise NotExhaustedError(
            f"session {session.id} still has {session.remaining_submissions}"
            f" submissions; rotation applies to exhausted sessions only"
        )


def apply_rotation(
    session: Session,
    new_test_dataset: LabeledDataset,
    timestamp: str,
) -> str:
    """Swap in a fresh sealed test set and restore full budgets.

    Returns the outgoing test ref so the caller can release it to the
    developer role. Only exhausted sessions may rotate, and a dataset
    identity never serves twice.
    """
    ensure_rotatable(session)
    if new_test_dataset.id in session.used_test_refs:
        raise IdentityReuseError(
            f"dataset {new_test_dataset.id!r} already served this session"
        )
    if not new_test_dataset.sealed:
        raise UnsealedTestSetError(
            f"replacement test dataset {new_test_dataset.id!r} must be sealed"
        )
    if new_test_dataset.size < session.plan.required_size:
        raise UndersizedTestSetError(session.plan.required_size, new_test_dataset.size)
    old_ref = session.test_ref
    session.archived.append(list(session.history))
    session.history = []
    session.test_ref = new_test_dataset.id
    session.used_test_refs.append(new_test_dataset.id)
    session.high_water = 0
    session.remaining_submissions = session.spec.T
    session.remaining_reverts = session.spec.revert_budget
    session.tenant_cursor = 0
    session.tenant_used = 0
    session.tenant_starts = [0]
    session.steps_taken = 0
    session.state = SessionState.ACTIVE
    return old_ref


def apply_close(session: Session, timestamp: str) -> Session:
    session.state = SessionState.CLOSED
    return session

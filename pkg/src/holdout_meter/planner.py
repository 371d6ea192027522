"""Test-set size planning for adaptive development sessions.

Everything here reduces to one union bound: over all model submissions a
developer could possibly make in ``T`` adaptive steps, each submission's
empirical test loss concentrates around its true loss by Hoeffding's
inequality with failure mass ``2 exp(-2 n eps^2)``. The number of possible
submissions depends on how much the returned signals can steer development,
so each meter variant contributes its own per-signal submission count. The
minimum test-set size is then the least ``n`` whose total failure mass drops
below ``delta``, found by binary search over a monotone predicate.

Counts are exact arbitrary-precision integers (they overflow 64-bit already
at moderate budgets); the failure mass is evaluated in log space so neither
huge counts nor tiny exponentials lose precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import (
    IncompatibleSpecError,
    InvalidRevertScheduleError,
    ParameterRangeError,
    ValidationError,
)
from .specs import EpsilonSchedule, MeterSpec, Mode

LN2 = math.log(2.0)


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 < epsilon <= 1.0) or math.isnan(epsilon):
        raise ParameterRangeError(f"epsilon {epsilon!r} outside (0, 1]")


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0) or math.isnan(delta):
        raise ParameterRangeError(f"delta {delta!r} outside (0, 1)")


def _check_steps(T: int) -> None:
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ParameterRangeError(f"step count T must be a positive integer, got {T!r}")


def _adjust_minimal(n: int, ln_mass_at: Any) -> int:
    """Nudge a candidate to the least integer n with ln_mass_at(n) < 0.

    ``ln_mass_at`` must be strictly decreasing. The float closed form can
    land one unit off near integer boundaries; this repairs it exactly.
    """
    n = max(1, n)
    while ln_mass_at(n) >= 0.0:
        n += 1
    while n > 1 and ln_mass_at(n - 1) < 0.0:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# Baseline sizes (single use, independent submissions, fresh resampling)
# ---------------------------------------------------------------------------


def size_single(epsilon: float, delta: float) -> int:
    """Least n with 2 exp(-2 n eps^2) < delta: a one-shot holdout."""
    _check_epsilon(epsilon)
    _check_delta(delta)
    guess = int(math.log(2.0 / delta) / (2.0 * epsilon * epsilon)) + 1
    return _adjust_minimal(
        guess, lambda n: LN2 - math.log(delta) - 2.0 * n * epsilon * epsilon
    )


def size_independent(epsilon: float, delta: float, T: int) -> int:
    """Least n with 2 T exp(-2 n eps^2) < delta: T non-adaptive submissions."""
    _check_epsilon(epsilon)
    _check_delta(delta)
    _check_steps(T)
    guess = int(math.log(2.0 * T / delta) / (2.0 * epsilon * epsilon)) + 1
    return _adjust_minimal(
        guess,
        lambda n: LN2 + math.log(T) - math.log(delta) - 2.0 * n * epsilon * epsilon,
    )


def size_resampling(epsilon: float, delta: float, T: int) -> int:
    """Total labels when every submission gets a fresh test set.

    Each of the T draws must individually support the union bound, so the
    total is T times the independent size. Nonuniform schedules budget
    against their tightest tolerance.
    """
    return T * size_independent(epsilon, delta, T)


# ---------------------------------------------------------------------------
# Submission counts (dependency-tree sizes), exact integers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubmissionCounts:
    """Per-signal counts of possible submissions, plus their total."""

    per_signal: tuple[int, ...]
    variant: str = "custom"

    def __post_init__(self) -> None:
        if not self.per_signal:
            raise ValidationError("at least one per-signal count required")
        if any(c < 0 for c in self.per_signal):
            raise ValidationError("submission counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.per_signal)

    @property
    def m(self) -> int:
        return len(self.per_signal)

    def to_dict(self) -> dict[str, Any]:
        # decimal strings: counts routinely exceed 64-bit integers
        return {
            "variant": self.variant,
            "per_signal": [str(c) for c in self.per_signal],
            "total": str(self.total),
        }


def _regular_per_signal(m: int, T: int) -> int:
    # sum of m^(t-1) over t=1..T; the m=1 chain is the T-step limit
    return T if m == 1 else (m**T - 1) // (m - 1)


def _incremental_per_signal(k: int, T: int) -> int:
    return math.comb(k + T - 1, k)


def count_regular(m: int, T: int) -> SubmissionCounts:
    """Submission counts when every step can branch on all m signals.

    The possibilities form a perfect m-ary tree with T levels below the
    root; by symmetry each signal owns exactly 1/m of the nodes.
    """
    _check_steps(T)
    if not isinstance(m, int) or m < 1:
        raise ParameterRangeError(f"signal count m must be a positive integer, got {m!r}")
    per = _regular_per_signal(m, T)
    return SubmissionCounts(tuple([per] * m), variant="regular")


def count_incremental(m: int, T: int) -> SubmissionCounts:
    """Submission counts when only the running-max signal is reported.

    Reported signals can never decrease along a development path, which
    prunes the tree to nondecreasing signal sequences: C(k+T-1, k) nodes
    end at signal k, and C(m+T, m) - 1 nodes in total.
    """
    _check_steps(T)
    if not isinstance(m, int) or m < 1:
        raise ParameterRangeError(f"signal count m must be a positive integer, got {m!r}")
    per = tuple(_incremental_per_signal(k, T) for k in range(1, m + 1))
    return SubmissionCounts(per, variant="incremental")


def count_time_travel(
    m: int,
    T: int,
    B: int,
    reverts: Sequence[int],
    mode: Mode | str = Mode.REGULAR,
) -> SubmissionCounts:
    """Submission counts with B budgeted step-backs at planned steps.

    Each revert at (shifted) step t' wastes one submission made at depth
    t', and the never-reverted submissions form a tree of depth T - B.
    With B = 0 this degenerates to the plain counts.
    """
    _check_steps(T)
    mode = Mode(mode)
    if B == 0:
        if reverts:
            raise InvalidRevertScheduleError("revert steps given with zero budget")
        base = count_regular(m, T) if mode is Mode.REGULAR else count_incremental(m, T)
        return SubmissionCounts(base.per_signal, variant=f"{mode.value}+reverts")
    if B < 0 or B >= T:
        raise InvalidRevertScheduleError(f"revert budget {B} must satisfy 0 <= B < T")
    if len(reverts) != B:
        raise InvalidRevertScheduleError(f"expected {B} revert steps, got {len(reverts)}")
    shifted = []
    prev = 0
    for i, t in enumerate(reverts, start=1):
        if not (1 <= t <= T):
            raise InvalidRevertScheduleError(f"revert step {t} outside [1, T]")
        if t < prev:
            raise InvalidRevertScheduleError("revert steps must be nondecreasing")
        prev = t
        tp = t - (i - 1)
        if tp < 1:
            raise InvalidRevertScheduleError(
                f"revert step {t} at position {i} shifts below step 1"
            )
        shifted.append(tp)

    if mode is Mode.REGULAR:
        per = _regular_per_signal(m, T - B) + sum(m ** (tp - 1) for tp in shifted)
        per_signal = tuple([per] * m)
    else:
        per_signal = tuple(
            _incremental_per_signal(k, T - B)
            + sum(math.comb(k + tp - 2, k - 1) for tp in shifted)
            for k in range(1, m + 1)
        )
    return SubmissionCounts(per_signal, variant=f"{mode.value}+reverts")


def count_multitenant(
    m: int,
    tenancy: Sequence[int],
    mode: Mode | str = Mode.REGULAR,
    conservative: bool = False,
) -> SubmissionCounts:
    """Submission counts when the budget is split across tenants.

    Each tenant starts from a fresh development history, so the counts are
    the per-tenant counts summed over tenants. ``conservative`` multiplies
    regular-mode counts by m, the cautious reading of the two-tenant bound
    (see the planner's open-questions notes in the README).
    """
    mode = Mode(mode)
    if not tenancy:
        raise ValidationError("tenancy list must not be empty")
    for t in tenancy:
        _check_steps(t)
    per = []
    for k in range(1, m + 1):
        if mode is Mode.REGULAR:
            c = sum(_regular_per_signal(m, Ti) for Ti in tenancy)
            if conservative:
                c *= m
        else:
            c = sum(_incremental_per_signal(k, Ti) for Ti in tenancy)
        per.append(c)
    return SubmissionCounts(tuple(per), variant=f"{mode.value}+tenants")


# ---------------------------------------------------------------------------
# Log-space twins (float accumulation, no big integers)
# ---------------------------------------------------------------------------


def log_binomial(n: int, k: int) -> float:
    """ln C(n, k) via lgamma; float twin of math.comb for huge arguments."""
    if k < 0 or k > n:
        return float("-inf")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_count_regular_per_signal(m: int, T: int) -> float:
    """ln of the regular per-signal count without forming the integer."""
    if m == 1:
        return math.log(T)
    # ln((m^T - 1)/(m - 1)) = T ln m + ln(1 - m^-T) - ln(m - 1)
    return T * math.log(m) + math.log1p(-(m ** -float(T))) - math.log(m - 1)


def log_count_incremental_per_signal(k: int, T: int) -> float:
    return log_binomial(k + T - 1, k)


# ---------------------------------------------------------------------------
# Survival mass and the size solver
# ---------------------------------------------------------------------------


def log_survival(n: int, counts: SubmissionCounts, schedule: EpsilonSchedule) -> float:
    """ln( sum_k 2 C_k exp(-2 n eps_k^2) ), the union-bound failure mass.

    Evaluated by log-sum-exp over ln2 + ln C_k - 2 n eps_k^2 so counts with
    thousands of digits and deeply negative exponents stay finite. Strictly
    decreasing in n.
    """
    if n < 0:
        raise ParameterRangeError(f"candidate size must be >= 0, got {n}")
    if counts.m != len(schedule):
        raise ValidationError(
            f"{counts.m} counts but {len(schedule)} tolerances"
        )
    terms = [
        LN2 + math.log(c) - 2.0 * n * e * e
        for c, e in zip(counts.per_signal, schedule.epsilons)
        if c > 0
    ]
    if not terms:
        return float("-inf")
    peak = max(terms)
    return peak + math.log(sum(math.exp(t - peak) for t in terms))


@dataclass(frozen=True)
class PlanReport:
    """Solver output: minimal test-set size plus audit material."""

    required_size: int
    counts: SubmissionCounts
    schedule: EpsilonSchedule
    delta: float
    log_survival_at_n: float
    baseline_resampling: int
    baseline_independent: int
    baseline_single: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "required_size": self.required_size,
            "counts": self.counts.to_dict(),
            "epsilons": list(self.schedule.epsilons),
            "delta": self.delta,
            "log_survival_at_n": self.log_survival_at_n,
            "baselines": {
                "resampling": self.baseline_resampling,
                "independent": self.baseline_independent,
                "single_use": self.baseline_single,
            },
        }


def solve_size(
    counts: SubmissionCounts,
    schedule: EpsilonSchedule,
    delta: float,
    T: int | None = None,
) -> PlanReport:
    """Least n whose survival mass drops strictly below delta.

    The bracket starts at twice the closed-form size the tightest
    tolerance alone would demand and doubles until the predicate holds;
    bisection then pins the minimum, verified against n - 1.
    """
    _check_delta(delta)
    ln_delta = math.log(delta)

    def ok(n: int) -> bool:
        return log_survival(n, counts, schedule) < ln_delta

    e1 = schedule.epsilons[0]
    c1 = max(counts.per_signal[0], 1)
    dominant = (LN2 + math.log(c1) - ln_delta) / (2.0 * e1 * e1)
    hi = max(2, 2 * math.ceil(dominant))
    while not ok(hi):
        hi *= 2
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    n = lo
    assert ok(n) and (n == 1 or not ok(n - 1)), "solver lost minimality"

    effective_T = T if T is not None else max(counts.total, 1)
    return PlanReport(
        required_size=n,
        counts=counts,
        schedule=schedule,
        delta=delta,
        log_survival_at_n=log_survival(n, counts, schedule),
        baseline_resampling=size_resampling(e1, delta, effective_T),
        baseline_independent=size_independent(e1, delta, effective_T),
        baseline_single=size_single(e1, delta),
    )


def counts_for_spec(spec: MeterSpec) -> SubmissionCounts:
    """Dispatch to the counting rule matching mode, tenancy, and reverts."""
    if spec.tenants > 1 and spec.revert_budget > 0:
        raise IncompatibleSpecError(
            "revert budgets cannot be combined with multiple tenants"
        )
    if spec.tenants > 1:
        return count_multitenant(
            spec.m, spec.tenancy, spec.mode, conservative=spec.conservative_multitenant
        )
    if spec.revert_budget > 0:
        return count_time_travel(
            spec.m, spec.T, spec.revert_budget, spec.revert_steps, spec.mode
        )
    if spec.mode is Mode.INCREMENTAL:
        return count_incremental(spec.m, spec.T)
    return count_regular(spec.m, spec.T)


def plan(spec: MeterSpec) -> PlanReport:
    """Plan the test-set size for a full meter specification."""
    counts = counts_for_spec(spec)
    return solve_size(counts, spec.schedule, spec.delta, T=spec.T)

"""Monte-Carlo validation of the size guarantee.

The synthetic test distribution is a per-example uniform draw u ~ U[0, 1]:
a model with true expected loss p errs exactly on the examples with u < p,
so its true loss is p by construction and its empirical loss is the
empirical CDF of the drawn test set at p. One fixed realization table per
trial is reused across all steps, making the test set a genuine fixed
holdout that an adaptive adversary can probe through the returned signals.

Randomness follows a counter-based generator contract: the Philox stream
keyed by (seed, trial index) drives each trial's draws, and adversary
branching tables hash (seed, signal history) so the same strategy is
replayed identically across trials and runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import beta as beta_dist

from .engine import apply_submission, create_session
from .errors import ParameterRangeError, ScaleCapError, ValidationError
from .planner import plan as plan_spec
from .registry import LabeledDataset, Role
from .specs import MeterSpec, Mode, uniform_spec

LOSS_SAMPLE_CAP = 10**9
DEFAULT_VAL_SIZE = 400


# ---------------------------------------------------------------------------
# Adversary strategies
# ---------------------------------------------------------------------------


class Strategy:
    """Deterministic developer model: signal history -> next true loss."""

    kind = "abstract"

    def next_loss(self, signals: tuple[int, ...]) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ObliviousStrategy(Strategy):
    """Fixed probe sequence; returned signals are ignored."""

    profile: tuple[float, ...]
    kind = "oblivious"

    def __post_init__(self) -> None:
        for p in self.profile:
            if not (0.0 <= p <= 1.0):
                raise ParameterRangeError(f"true loss {p!r} outside [0, 1]")

    def next_loss(self, signals: tuple[int, ...]) -> float:
        return self.profile[len(signals) % len(self.profile)]


@dataclass(frozen=True)
class BranchingStrategy(Strategy):
    """Explicit table from signal-history prefixes to the next true loss."""

    table: Mapping[tuple[int, ...], float]
    kind = "signal-branching"

    def next_loss(self, signals: tuple[int, ...]) -> float:
        try:
            return self.table[signals]
        except KeyError:
            raise ValidationError(
                f"strategy table missing branch for history {list(signals)}"
            ) from None


@dataclass(frozen=True)
class WorstCaseTreeStrategy(Strategy):
    """Full branching tree: every signal history gets its own model.

    Probe losses are hashed from (seed, history), so the tree is fixed for
    the whole run; structurally this realizes the maximal dependency tree
    the planner budgets for. Keeping probes near 1/2 maximizes the
    empirical-CDF variance the adversary can exploit.
    """

    seed: int
    low: float = 0.2
    high: float = 0.8
    kind = "worst-case-tree"

    def next_loss(self, signals: tuple[int, ...]) -> float:
        key = f"{self.seed}:{','.join(map(str, signals))}".encode()
        digest = hashlib.sha256(key).digest()
        unit = int.from_bytes(digest[:8], "big") / 2**64
        return self.low + unit * (self.high - self.low)


def strategy_from_dict(data: dict[str, Any]) -> Strategy:
    """Build a strategy from its structured-text form."""
    kind = data.get("kind")
    if kind == "oblivious":
        return ObliviousStrategy(tuple(float(p) for p in data["profile"]))
    if kind == "signal-branching":
        table = {}
        for entry in data["table"]:
            history = tuple(int(s) for s in entry["history"])
            table[history] = float(entry["loss"])
        return BranchingStrategy(table)
    if kind == "worst-case-tree":
        return WorstCaseTreeStrategy(
            seed=int(data.get("seed", 0)),
            low=float(data.get("low", 0.2)),
            high=float(data.get("high", 0.8)),
        )
    raise ValidationError(f"unknown strategy kind {kind!r}")


# ---------------------------------------------------------------------------
# Trial harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialOutcome:
    violated: bool
    max_deviation: float
    deviations: tuple[float, ...]


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    violations: int
    rate: float
    ci_low: float
    ci_high: float
    max_deviation: float
    test_size: int
    required_size: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "violations": self.violations,
            "violation_rate": self.rate,
            "ci95": [self.ci_low, self.ci_high],
            "max_deviation": self.max_deviation,
            "test_size": self.test_size,
            "required_size": self.required_size,
        }


def binomial_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact two-sided (Clopper-Pearson) interval for a binomial proportion."""
    if trials < 1:
        raise ParameterRangeError("trials must be >= 1")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(beta_dist.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta_dist.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


def _make_dataset(prefix: str, size: int) -> LabeledDataset:
    return LabeledDataset(
        id=f"{prefix}-{size}",
        items={f"{prefix}{i}": 0 for i in range(size)},
        sealed=True,
        owner_role=Role.LABELER,
        created_at="simulated",
    )


def predictions_for(u: np.ndarray, p: float, val_size: int) -> dict[str, int]:
    """Prediction upload matching the fast path, for engine cross-checks."""
    k = round(p * val_size)
    preds = {f"x{i}": int(ui < p) for i, ui in enumerate(u)}
    preds.update({f"v{i}": 1 if i < k else 0 for i in range(val_size)})
    return preds


def run_trials(
    spec: MeterSpec,
    strategy: Strategy,
    trials: int,
    seed: int,
    test_size: int | None = None,
    val_size: int = DEFAULT_VAL_SIZE,
) -> SimulationResult:
    """Measure how often any step's true-loss deviation beats its tolerance.

    Each trial draws one realization table, then drives a real engine
    session for T adaptive submissions, the strategy branching on exactly
    the signals a developer would see. ``test_size`` overrides the planned
    size for deliberate undersizing experiments.
    """
    if trials < 1:
        raise ParameterRangeError("trials must be >= 1")
    report = plan_spec(spec)
    n = test_size if test_size is not None else report.required_size
    if n < 1:
        raise ParameterRangeError("test size must be >= 1")
    if max(n, report.required_size) * trials > LOSS_SAMPLE_CAP:
        raise ScaleCapError(
            f"{max(n, report.required_size)} examples x {trials} trials exceeds the"
            f" {LOSS_SAMPLE_CAP} sampled-loss cap"
        )

    test_ds = _make_dataset("x", n)
    val_ds = _make_dataset("v", val_size)
    incremental = spec.mode is Mode.INCREMENTAL

    violations = 0
    max_dev = 0.0
    for trial in range(trials):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, trial))))
        u = rng.random(n)
        session = create_session(
            f"trial-{trial}", spec, report, val_ds, test_ds, "simulated",
            enforce_size=test_size is None,
        )
        signals: tuple[int, ...] = ()
        violated = False
        for step in range(spec.T):
            p = strategy.next_loss(signals)
            # model with true loss p errs exactly where u < p; labels are all
            # zero, so the error counts equal what compute_losses would give
            # for the corresponding prediction upload (see the tests)
            test_errors = int((u < p).sum())
            k = round(p * val_size)
            digest = f"trial{trial}-step{step}"
            rep = apply_submission(
                session, digest, k, val_size, test_errors, n, "simulated"
            )
            reported = rep.incremental_signal if incremental else rep.signal
            assert reported is not None
            signals = signals + (reported,)
            deviation = abs(test_errors / n - p)
            max_dev = max(max_dev, deviation)
            if deviation > spec.schedule[reported - 1]:
                violated = True
        if violated:
            violations += 1

    rate = violations / trials
    lo, hi = binomial_interval(violations, trials)
    return SimulationResult(
        trials=trials,
        violations=violations,
        rate=rate,
        ci_low=lo,
        ci_high=hi,
        max_deviation=max_dev,
        test_size=n,
        required_size=report.required_size,
    )


# ---------------------------------------------------------------------------
# Trace rendering
# ---------------------------------------------------------------------------


def replay_trace(
    trace: Sequence[tuple[float, float]] | Sequence[Mapping[str, float]],
    spec: MeterSpec,
) -> list[dict[str, Any]]:
    """Render the signal sequences a recorded accuracy trace would earn.

    ``trace`` holds per-step validation and test accuracies in [0, 1],
    either as (val, test) pairs or as {"val": ..., "test": ...} records.
    """
    out: list[dict[str, Any]] = []
    running = 0
    for step, entry in enumerate(trace, start=1):
        if isinstance(entry, Mapping):
            val_acc, test_acc = entry["val"], entry["test"]
        else:
            val_acc, test_acc = entry
        for name, acc in (("validation", val_acc), ("test", test_acc)):
            if not (0.0 <= acc <= 1.0) or math.isnan(acc):
                raise ParameterRangeError(
                    f"step {step}: {name} accuracy {acc!r} outside [0, 1]"
                )
        gap = abs(val_acc - test_acc)
        signal = spec.signal_for(gap)
        running = max(running, signal)
        out.append(
            {
                "step": step,
                "empirical_overfitting": gap,
                "regular_signal": signal,
                "incremental_signal": running,
            }
        )
    return out


def load_trace(text: str) -> list[dict[str, float]]:
    """Parse a JSONL trace of {"val": ..., "test": ...} records."""
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            entries.append({"val": float(obj["val"]), "test": float(obj["test"])})
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"trace line {line_no}: {exc}") from exc
    if not entries:
        raise ValidationError("empty trace")
    return entries


def desk_preset(
    m: int = 2,
    T: int = 5,
    epsilon: float = 0.1,
    delta: float = 0.1,
    mode: Mode | str = Mode.REGULAR,
) -> MeterSpec:
    """Desk-scale spec whose planned size stays in the hundreds."""
    return uniform_spec(m=m, T=T, epsilon=epsilon, delta=delta, mode=mode)


def save_trace_plot(rows: Sequence[Mapping[str, Any]], spec: MeterSpec, path: str) -> None:
    """Timeline of per-step and running-max signals for a rendered trace."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = [r["step"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.step(steps, [r["regular_signal"] for r in rows], where="mid", label="per-step signal")
    ax.step(
        steps,
        [r["incremental_signal"] for r in rows],
        where="mid",
        linestyle="--",
        label="running max",
    )
    ax.set_xlabel("development step")
    ax.set_ylabel("signal")
    ax.set_yticks(range(1, spec.m + 1))
    ax.set_ylim(0.5, spec.m + 0.5)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_trials_plot(result: SimulationResult, delta: float, path: str) -> None:
    """Violation rate with its exact interval against the budgeted delta."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 3))
    ax.bar(
        [0],
        [result.rate],
        yerr=[[result.rate - result.ci_low], [result.ci_high - result.rate]],
        capsize=6,
        width=0.4,
    )
    ax.axhline(delta, color="tab:red", linestyle="--", label="budgeted failure mass")
    ax.set_xticks([])
    ax.set_ylabel("violation rate")
    ax.set_title(f"{result.trials} trials, n={result.test_size}")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

"""Monte-Carlo harness tests (desk-scale trial counts; the 10k-trial
guarantee check lives in the acceptance suite)."""

from __future__ import annotations

import numpy as np
import pytest

from holdout_meter.engine import create_session, submit
from holdout_meter.errors import ParameterRangeError, ScaleCapError, ValidationError
from holdout_meter.planner import plan
from holdout_meter.registry import LabeledDataset, Role
from holdout_meter.simulator import (
    BranchingStrategy,
    ObliviousStrategy,
    WorstCaseTreeStrategy,
    binomial_interval,
    desk_preset,
    load_trace,
    predictions_for,
    replay_trace,
    run_trials,
    strategy_from_dict,
)
from conftest import fig2_spec

OBLIVIOUS = ObliviousStrategy((0.3, 0.45, 0.5, 0.55, 0.7))


class TestReplayTrace:
    def test_worked_eight_step_trace(self):
        spec = fig2_spec()
        gaps = (0.01, 0.03, 0.02, 0.06, 0.04, 0.02, 0.07, 0.05)
        trace = [(g, 0.0) for g in gaps]
        rows = replay_trace(trace, spec)
        assert [r["regular_signal"] for r in rows] == [1, 1, 1, 2, 1, 1, 2, 2]
        assert [r["incremental_signal"] for r in rows] == [1, 1, 1, 2, 2, 2, 2, 2]

    def test_zero_gap_trace(self):
        rows = replay_trace([(0.5, 0.5)] * 4, fig2_spec())
        assert all(r["regular_signal"] == 1 for r in rows)

    def test_full_gap_hits_last_band(self):
        rows = replay_trace([(1.0, 0.0)], fig2_spec())
        assert rows[0]["regular_signal"] == fig2_spec().m

    def test_out_of_range_accuracy_rejected(self):
        with pytest.raises(ParameterRangeError):
            replay_trace([(1.2, 0.5)], fig2_spec())

    def test_load_trace_roundtrip(self):
        text = '{"val": 0.9, "test": 0.87}\n{"val": 0.8, "test": 0.84}\n'
        entries = load_trace(text)
        rows = replay_trace(entries, fig2_spec())
        assert [r["regular_signal"] for r in rows] == [1, 1]

    def test_load_trace_rejects_garbage(self):
        with pytest.raises(ValidationError):
            load_trace("not json\n")
        with pytest.raises(ValidationError):
            load_trace("")


class TestStrategies:
    def test_oblivious_ignores_signals(self):
        assert OBLIVIOUS.next_loss(()) == 0.3
        assert OBLIVIOUS.next_loss((1, 2)) == 0.5

    def test_branching_missing_branch_is_an_error(self):
        strat = BranchingStrategy({(): 0.4, (1,): 0.5})
        assert strat.next_loss((1,)) == 0.5
        with pytest.raises(ValidationError):
            strat.next_loss((2,))

    def test_worst_case_tree_is_deterministic_per_history(self):
        strat = WorstCaseTreeStrategy(seed=7)
        a = strat.next_loss((1, 2))
        assert a == strat.next_loss((1, 2))
        assert a != strat.next_loss((2, 1))
        assert strat.low <= a <= strat.high

    def test_strategy_from_dict(self):
        s = strategy_from_dict({"kind": "oblivious", "profile": [0.2, 0.8]})
        assert isinstance(s, ObliviousStrategy)
        s = strategy_from_dict(
            {"kind": "signal-branching", "table": [{"history": [], "loss": 0.5}]}
        )
        assert isinstance(s, BranchingStrategy)
        s = strategy_from_dict({"kind": "worst-case-tree", "seed": 3})
        assert isinstance(s, WorstCaseTreeStrategy)
        with pytest.raises(ValidationError):
            strategy_from_dict({"kind": "psychic"})


class TestBinomialInterval:
    def test_degenerate_endpoints(self):
        lo, hi = binomial_interval(0, 100)
        assert lo == 0.0 and 0.0 < hi < 0.05
        lo, hi = binomial_interval(100, 100)
        assert hi == 1.0 and lo > 0.95

    def test_contains_point_estimate(self):
        lo, hi = binomial_interval(13, 200)
        assert lo < 13 / 200 < hi


class TestRunTrials:
    def test_seed_determinism(self):
        spec = desk_preset()
        a = run_trials(spec, OBLIVIOUS, trials=200, seed=11)
        b = run_trials(spec, OBLIVIOUS, trials=200, seed=11)
        assert a == b

    def test_oblivious_within_guarantee(self):
        spec = desk_preset()  # m=2, T=5, eps=0.1, delta=0.1
        result = run_trials(spec, OBLIVIOUS, trials=2000, seed=5)
        assert result.ci_high <= spec.delta

    def test_adaptivity_only_hurts(self):
        spec = desk_preset()
        oblivious = run_trials(spec, OBLIVIOUS, trials=1500, seed=9)
        adaptive = run_trials(spec, WorstCaseTreeStrategy(seed=9), trials=1500, seed=9)
        assert oblivious.rate <= adaptive.ci_high

    def test_undersized_holdout_violates_more(self):
        spec = desk_preset()
        aggressive = WorstCaseTreeStrategy(seed=3, low=0.4, high=0.6)
        sized = run_trials(spec, aggressive, trials=1500, seed=21)
        half = run_trials(
            spec, aggressive, trials=1500, seed=21, test_size=sized.required_size // 2
        )
        assert half.rate > sized.rate

    def test_scale_cap(self):
        with pytest.raises(ScaleCapError):
            run_trials(desk_preset(), OBLIVIOUS, trials=3_000_000, seed=0)

    def test_fast_path_matches_full_engine(self):
        """The vectorized loss path must agree with real prediction uploads."""
        spec = desk_preset(m=2, T=3)
        report = plan(spec)
        n = report.required_size
        val_size = 400
        result = run_trials(spec, OBLIVIOUS, trials=1, seed=42, val_size=val_size)

        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((42, 0))))
        u = rng.random(n)
        val = LabeledDataset("val", {f"v{i}": 0 for i in range(val_size)}, False, Role.DEVELOPER, "t")
        test = LabeledDataset("tst", {f"x{i}": 0 for i in range(n)}, True, Role.LABELER, "t")
        session = create_session("cross", spec, report, val, test, "t")
        max_dev = 0.0
        signals: tuple[int, ...] = ()
        for _ in range(spec.T):
            p = OBLIVIOUS.next_loss(signals)
            preds = predictions_for(u, p, val_size)
            rep, payload = submit(session, preds, val, test, "t")
            assert payload["val_errors"] == round(p * val_size)
            signals = signals + (rep.signal,)
            max_dev = max(max_dev, abs(payload["test_errors"] / n - p))
        assert max_dev == pytest.approx(result.max_deviation)

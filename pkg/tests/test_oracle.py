"""Brute-force enumerator tests, and its agreement with the closed forms."""

from __future__ import annotations

import math

import pytest

from holdout_meter.errors import EnumerationCapError, IncompatibleSpecError
from holdout_meter.oracle import enumerate_tree
from holdout_meter.planner import (
    count_incremental,
    count_multitenant,
    count_regular,
    count_time_travel,
)
from holdout_meter.specs import Mode


class TestWorkedExamples:
    def test_regular_two_by_two(self):
        result = enumerate_tree(2, 2, Mode.REGULAR)
        assert result.h == ((1, 2), (1, 2))
        assert result.total == 6

    def test_incremental_two_by_two_prunes_one_node(self):
        result = enumerate_tree(2, 2, Mode.INCREMENTAL)
        assert result.total == 5
        assert result.cell(1, 2) == 1

    def test_incremental_cells_follow_binomials(self):
        result = enumerate_tree(3, 3, Mode.INCREMENTAL)
        for k in range(1, 4):
            for t in range(1, 4):
                assert result.cell(k, t) == math.comb(k + t - 2, t - 1)
        assert result.cell(2, 3) == 3


class TestClosedFormAgreement:
    @pytest.mark.parametrize("m", range(1, 5))
    @pytest.mark.parametrize("T", range(1, 7))
    def test_regular_counts(self, m, T):
        result = enumerate_tree(m, T, Mode.REGULAR)
        assert result.per_signal == count_regular(m, T).per_signal
        assert result.total == count_regular(m, T).total
        for k in range(1, m + 1):
            for t in range(1, T + 1):
                assert result.cell(k, t) == m ** (t - 1)

    @pytest.mark.parametrize("m", range(1, 5))
    @pytest.mark.parametrize("T", range(1, 7))
    def test_incremental_counts(self, m, T):
        result = enumerate_tree(m, T, Mode.INCREMENTAL)
        assert result.per_signal == count_incremental(m, T).per_signal
        assert result.total == count_incremental(m, T).total
        for k in range(1, m + 1):
            for t in range(1, T + 1):
                assert result.cell(k, t) == math.comb(k + t - 2, t - 1)

    @pytest.mark.parametrize("mode", list(Mode))
    @pytest.mark.parametrize("m", range(1, 4))
    def test_revert_counts(self, mode, m):
        for T in range(2, 6):
            for B in (1, 2):
                if B >= T:
                    continue
                for reverts in _revert_schedules(T, B):
                    expected = count_time_travel(m, T, B, reverts, mode)
                    result = enumerate_tree(m, T, mode, reverts=reverts)
                    assert result.per_signal == expected.per_signal, (m, T, reverts)
                    assert result.total == expected.total

    @pytest.mark.parametrize("mode", list(Mode))
    def test_multitenant_counts(self, mode):
        for tenancy in [(2, 2), (1, 3), (2, 2, 2), (4,)]:
            m = 3
            expected = count_multitenant(m, tenancy, mode)
            result = enumerate_tree(m, sum(tenancy), mode, tenancy=tenancy)
            assert result.per_signal == expected.per_signal
            assert result.total == expected.total


def _revert_schedules(T, B):
    """All valid nondecreasing schedules with positive shifted steps."""
    if B == 1:
        return [(t,) for t in range(1, T + 1)]
    out = []
    for t1 in range(1, T + 1):
        for t2 in range(t1, T + 1):
            if t2 - 1 >= 1:
                out.append((t1, t2))
    return out


class TestHarnessBehavior:
    def test_deterministic(self):
        a = enumerate_tree(3, 4, Mode.INCREMENTAL)
        b = enumerate_tree(3, 4, Mode.INCREMENTAL)
        assert a == b

    def test_cap_enforced_with_named_limit(self):
        with pytest.raises(EnumerationCapError) as err:
            enumerate_tree(10, 8, Mode.REGULAR)
        assert "10000000" in str(err.value)

    def test_reverts_and_tenancy_rejected_together(self):
        with pytest.raises(IncompatibleSpecError):
            enumerate_tree(2, 4, Mode.REGULAR, reverts=(1,), tenancy=(2, 2))

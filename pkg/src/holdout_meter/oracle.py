"""Brute-force enumeration of signal-history trees.

The planner's counting formulas all claim to equal the number of reachable
submission histories under some constraint. This module actually generates
those histories for small parameters and tallies nodes by (signal value,
depth), giving the test suite an independent ground truth that shares no
code with the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence

from .errors import EnumerationCapError, IncompatibleSpecError, InvalidRevertScheduleError
from .specs import Mode

STATE_CAP = 10**7


@dataclass(frozen=True)
class EnumerationResult:
    """Tally of enumerated tree nodes.

    ``h[k-1][t-1]`` counts nodes with signal value k at depth t; rows sum to
    the per-signal counts the planner predicts.
    """

    h: tuple[tuple[int, ...], ...]
    total: int

    @property
    def per_signal(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.h)

    def cell(self, k: int, t: int) -> int:
        return self.h[k - 1][t - 1]


def _check_cap(m: int, T: int) -> None:
    if m**T > STATE_CAP:
        raise EnumerationCapError(
            f"m^T = {m**T} exceeds the enumeration cap of {STATE_CAP}"
        )


def _regular_level(m: int, t: int) -> Iterator[tuple[int, ...]]:
    return product(range(1, m + 1), repeat=t)


def _incremental_level(m: int, t: int, lowest: int = 1) -> Iterator[tuple[int, ...]]:
    """All nondecreasing length-t signal sequences over [lowest, m]."""
    if t == 0:
        yield ()
        return
    for first in range(lowest, m + 1):
        for rest in _incremental_level(m, t - 1, first):
            yield (first, *rest)


def _tally_tree(m: int, depth: int, mode: Mode, h: list[list[int]]) -> int:
    """Generate every history of length 1..depth; tally each by (last, len)."""
    nodes = 0
    for t in range(1, depth + 1):
        level = _regular_level(m, t) if mode is Mode.REGULAR else _incremental_level(m, t)
        for seq in level:
            h[seq[-1] - 1][t - 1] += 1
            nodes += 1
            if nodes > 2 * STATE_CAP:
                raise EnumerationCapError(
                    f"enumeration exceeded {2 * STATE_CAP} generated nodes"
                )
    return nodes


def _tally_layer(m: int, depth: int, mode: Mode, h: list[list[int]]) -> int:
    """Tally only the histories of length exactly ``depth``."""
    nodes = 0
    level = _regular_level(m, depth) if mode is Mode.REGULAR else _incremental_level(m, depth)
    for seq in level:
        h[seq[-1] - 1][depth - 1] += 1
        nodes += 1
    return nodes


def enumerate_tree(
    m: int,
    T: int,
    mode: Mode | str = Mode.REGULAR,
    reverts: Sequence[int] | None = None,
    tenancy: Sequence[int] | None = None,
) -> EnumerationResult:
    """Exhaustively tally reachable submissions for a small meter.

    With ``reverts``, histories follow the three-phase shape of a budgeted
    step-back schedule: the never-reverted submissions form a tree of depth
    T - B, and each revert additionally spends one submission at its
    shifted depth. With ``tenancy``, every tenant grows a fresh tree of
    their own depth. The two options cannot be combined.
    """
    mode = Mode(mode)
    if m < 1 or T < 1:
        raise EnumerationCapError("m and T must be positive")
    if reverts and tenancy:
        raise IncompatibleSpecError("reverts and tenancy cannot be enumerated together")
    _check_cap(m, T)

    if tenancy:
        if sum(tenancy) != T:
            raise InvalidRevertScheduleError("tenancy must sum to T")
        depth = max(tenancy)
        h = [[0] * depth for _ in range(m)]
        total = 0
        for Ti in tenancy:
            total += _tally_tree(m, Ti, mode, h)
        return EnumerationResult(tuple(tuple(row) for row in h), total)

    if reverts:
        B = len(reverts)
        if B >= T:
            raise InvalidRevertScheduleError(f"revert budget {B} must be < T={T}")
        shifted = []
        prev = 0
        for i, t in enumerate(reverts, start=1):
            if not (1 <= t <= T) or t < prev:
                raise InvalidRevertScheduleError(f"bad revert step {t}")
            prev = t
            if t - (i - 1) < 1:
                raise InvalidRevertScheduleError(f"revert step {t} shifts below 1")
            shifted.append(t - (i - 1))
        depth = max([T - B, *shifted])
        h = [[0] * depth for _ in range(m)]
        total = _tally_tree(m, T - B, mode, h)
        for tp in shifted:
            total += _tally_layer(m, tp, mode, h)
        return EnumerationResult(tuple(tuple(row) for row in h), total)

    h = [[0] * T for _ in range(m)]
    total = _tally_tree(m, T, mode, h)
    return EnumerationResult(tuple(tuple(row) for row in h), total)

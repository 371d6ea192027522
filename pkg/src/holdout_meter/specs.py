"""Meter specifications: signal bands, tolerance schedules, and budgets.

A meter partitions the empirical-overfitting range [0, 1] into ``m`` bands,
pairs each band with a distributional tolerance, and fixes the confidence
``delta`` together with the submission budget ``T``. Everything downstream
(planning, live sessions, simulation) is parameterized by a single
:class:`MeterSpec`.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from .errors import (
    IncompatibleSpecError,
    InvalidRevertScheduleError,
    ParameterRangeError,
    ValidationError,
)


class Mode(str, Enum):
    REGULAR = "regular"
    INCREMENTAL = "incremental"


@dataclass(frozen=True)
class EpsilonSchedule:
    """Ordered distributional tolerances, one per signal band.

    Entries must be nondecreasing and lie in (0, 1]. Uniform schedules are
    simply ``m`` equal entries.
    """

    epsilons: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.epsilons:
            raise ParameterRangeError("schedule must contain at least one tolerance")
        for e in self.epsilons:
            if not (0.0 < e <= 1.0) or math.isnan(e):
                raise ParameterRangeError(f"tolerance {e!r} outside (0, 1]")
        for a, b in zip(self.epsilons, self.epsilons[1:]):
            if b < a:
                raise ParameterRangeError(
                    f"tolerances must be nondecreasing, got {a} then {b}"
                )

    @classmethod
    def uniform(cls, epsilon: float, m: int) -> "EpsilonSchedule":
        return cls(tuple([epsilon] * m))

    def __len__(self) -> int:
        return len(self.epsilons)

    def __getitem__(self, k: int) -> float:
        return self.epsilons[k]

    @property
    def is_uniform(self) -> bool:
        return len(set(self.epsilons)) == 1


def equal_bands(m: int) -> tuple[tuple[float, float], ...]:
    """Default band layout: m equal-width slices of [0, 1]."""
    if m < 1:
        raise ParameterRangeError("band count must be >= 1")
    edges = [i / m for i in range(m)] + [1.0]
    return tuple((edges[i], edges[i + 1]) for i in range(m))


def bands_from_edges(edges: Sequence[float]) -> tuple[tuple[float, float], ...]:
    return tuple((edges[i], edges[i + 1]) for i in range(len(edges) - 1))


@dataclass(frozen=True)
class MeterSpec:
    """Full contract a metering session is planned and run against.

    ``bands`` are half-open ``[lower, upper)`` ranges partitioning [0, 1];
    the last band is closed at 1 so every value has exactly one signal.
    ``tenancy`` lists per-tenant step counts summing to ``T`` (a singleton
    for a single developer). ``revert_steps`` are the planned revert
    positions for a budget of ``revert_budget`` step-backs.
    """

    bands: tuple[tuple[float, float], ...]
    schedule: EpsilonSchedule
    delta: float
    T: int
    mode: Mode = Mode.REGULAR
    tenancy: tuple[int, ...] = ()
    revert_budget: int = 0
    revert_steps: tuple[int, ...] = ()
    conservative_multitenant: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        if not isinstance(self.T, int) or isinstance(self.T, bool) or self.T < 1:
            raise ParameterRangeError(f"budget T must be a positive integer, got {self.T!r}")
        if not (0.0 < self.delta < 1.0):
            raise ParameterRangeError(f"delta {self.delta!r} outside (0, 1)")
        if len(self.bands) != len(self.schedule):
            raise ValidationError(
                f"{len(self.bands)} bands but {len(self.schedule)} tolerances"
            )
        self._check_bands()
        if not self.tenancy:
            object.__setattr__(self, "tenancy", (self.T,))
        self._check_tenancy()
        self._check_reverts()
        if self.tenants > 1 and self.revert_budget > 0:
            raise IncompatibleSpecError(
                "revert budgets cannot be combined with multiple tenants; "
                "no guarantee is known for the combination"
            )

    def _check_bands(self) -> None:
        if not self.bands:
            raise ValidationError("at least one band required")
        if self.bands[0][0] != 0.0:
            raise ValidationError("first band must start at 0")
        if self.bands[-1][1] != 1.0:
            raise ValidationError("last band must end at 1")
        for (lo, hi), (nlo, _) in zip(self.bands, self.bands[1:]):
            if hi != nlo:
                raise ValidationError(f"bands must be contiguous at {hi} vs {nlo}")
        for lo, hi in self.bands:
            if not (0.0 <= lo < hi <= 1.0):
                raise ValidationError(f"band [{lo}, {hi}) is not a valid slice of [0, 1]")

    def _check_tenancy(self) -> None:
        if any((not isinstance(t, int)) or t < 1 for t in self.tenancy):
            raise ParameterRangeError("tenant step counts must be positive integers")
        if sum(self.tenancy) != self.T:
            raise ValidationError(
                f"tenant step counts {self.tenancy} must sum to T={self.T}"
            )

    def _check_reverts(self) -> None:
        B = self.revert_budget
        if B < 0:
            raise InvalidRevertScheduleError("revert budget must be >= 0")
        if B == 0:
            if self.revert_steps:
                raise InvalidRevertScheduleError("revert steps given with zero budget")
            return
        if B >= self.T:
            raise InvalidRevertScheduleError(f"revert budget {B} must be < T={self.T}")
        if len(self.revert_steps) != B:
            raise InvalidRevertScheduleError(
                f"expected {B} revert steps, got {len(self.revert_steps)}"
            )
        prev = 0
        for i, t in enumerate(self.revert_steps, start=1):
            if not isinstance(t, int) or not (1 <= t <= self.T):
                raise InvalidRevertScheduleError(f"revert step {t!r} outside [1, T]")
            if t < prev:
                raise InvalidRevertScheduleError("revert steps must be nondecreasing")
            if t - (i - 1) < 1:
                raise InvalidRevertScheduleError(
                    f"revert step {t} at position {i} shifts below step 1"
                )
            prev = t

    @property
    def m(self) -> int:
        return len(self.bands)

    @property
    def tenants(self) -> int:
        return len(self.tenancy)

    @property
    def band_edges(self) -> list[float]:
        return [lo for lo, _ in self.bands] + [1.0]

    def signal_for(self, value: float) -> int:
        """1-based band index of an empirical-overfitting value.

        Bands are half-open; a value equal to a shared edge belongs to the
        upper band, and 1.0 belongs to the last band.
        """
        if not (0.0 <= value <= 1.0):
            raise ParameterRangeError(f"overfitting value {value!r} outside [0, 1]")
        lowers = [lo for lo, _ in self.bands]
        return min(bisect.bisect_right(lowers, value), self.m)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "bands": [[lo, hi] for lo, hi in self.bands],
            "epsilons": list(self.schedule.epsilons),
            "delta": self.delta,
            "T": self.T,
            "tenancy": list(self.tenancy),
            "revert_budget": self.revert_budget,
            "revert_steps": list(self.revert_steps),
            "conservative_multitenant": self.conservative_multitenant,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MeterSpec":
        try:
            epsilons = [float(e) for e in data["epsilons"]]
            bands = data.get("bands")
            if bands is None:
                band_tuple = equal_bands(len(epsilons))
            else:
                band_tuple = tuple((float(lo), float(hi)) for lo, hi in bands)
            T = data["T"]
            if isinstance(T, bool) or not isinstance(T, int):
                raise ParameterRangeError(f"budget T must be an integer, got {T!r}")
            return cls(
                bands=band_tuple,
                schedule=EpsilonSchedule(tuple(epsilons)),
                delta=float(data["delta"]),
                T=T,
                mode=Mode(data.get("mode", "regular")),
                tenancy=tuple(int(t) for t in data.get("tenancy", []) or []),
                revert_budget=int(data.get("revert_budget", 0)),
                revert_steps=tuple(int(t) for t in data.get("revert_steps", []) or []),
                conservative_multitenant=bool(data.get("conservative_multitenant", False)),
            )
        except KeyError as exc:
            raise ValidationError(f"missing spec field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed spec: {exc}") from exc


def uniform_spec(
    m: int,
    T: int,
    epsilon: float,
    delta: float,
    mode: Mode | str = Mode.REGULAR,
    **kwargs: Any,
) -> MeterSpec:
    """Convenience constructor: equal bands, uniform tolerance."""
    return MeterSpec(
        bands=equal_bands(m),
        schedule=EpsilonSchedule.uniform(epsilon, m),
        delta=delta,
        T=T,
        mode=Mode(mode),
        **kwargs,
    )

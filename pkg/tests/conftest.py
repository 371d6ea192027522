from __future__ import annotations

import pytest

from holdout_meter.service import MeterService
from holdout_meter.specs import EpsilonSchedule, MeterSpec, bands_from_edges


@pytest.fixture
def service(tmp_path):
    return MeterService(storage=tmp_path / "store")


@pytest.fixture
def memory_service():
    return MeterService()


@pytest.fixture
def developer(memory_service):
    return memory_service.authenticate("dev-token")


@pytest.fixture
def labeler(memory_service):
    return memory_service.authenticate("labeler-token")


def fig2_spec(T: int = 8, delta: float = 0.1, mode: str = "regular") -> MeterSpec:
    """Four-band layout with the worked-example geometry: signal 1 covers
    [0, 0.05) with tolerance 0.01."""
    return MeterSpec(
        bands=bands_from_edges([0.0, 0.05, 0.1, 0.2, 1.0]),
        schedule=EpsilonSchedule((0.01, 0.02, 0.05, 0.1)),
        delta=delta,
        T=T,
        mode=mode,
    )


def make_labels(prefix: str, size: int, label: int = 0) -> dict[str, int]:
    return {f"{prefix}{i}": label for i in range(size)}

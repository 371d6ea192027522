"""Dataset registry with role-based sealing.

Sealed datasets stand in for an encrypted test set: their labels are
readable only by labeler/admin principals and by the metering engine
itself. Developers see example ids only, until a rotation releases the
dataset back to them. Datasets are immutable once registered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from .errors import (
    FormatError,
    ImmutableDatasetError,
    NotFoundError,
    RoleViolationError,
    ValidationError,
)


class Role(str, Enum):
    DEVELOPER = "developer"
    LABELER = "labeler"
    ADMIN = "admin"


@dataclass(frozen=True)
class Principal:
    name: str
    role: Role
    token: str = ""


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable id -> integer-label map with a sealing flag."""

    id: str
    items: Mapping[str, int]
    sealed: bool
    owner_role: Role
    created_at: str

    def __post_init__(self) -> None:
        if not self.items:
            raise ValidationError("dataset must contain at least one example")
        for ex_id, label in self.items.items():
            if not isinstance(ex_id, str) or not ex_id:
                raise ValidationError(f"example id {ex_id!r} must be a nonempty string")
            if isinstance(label, bool) or not isinstance(label, int):
                raise ValidationError(f"label for {ex_id!r} must be an integer")

    @property
    def size(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return sorted(self.items)


@dataclass
class DatasetView:
    """What a principal may see of a dataset."""

    id: str
    size: int
    sealed: bool
    labels: dict[str, int] | None  # None when the principal gets ids only
    ids: list[str]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "size": self.size, "sealed": self.sealed}
        if self.labels is None:
            out["ids"] = self.ids
        else:
            out["labels"] = self.labels
        return out


class Registry:
    """In-memory dataset store; persistence is layered on by the service."""

    def __init__(self) -> None:
        self._datasets: dict[str, LabeledDataset] = {}

    def __contains__(self, dataset_id: str) -> bool:
        return dataset_id in self._datasets

    def ids(self) -> list[str]:
        return sorted(self._datasets)

    def add(
        self,
        principal: Principal,
        dataset_id: str,
        items: Mapping[str, int],
        sealed: bool,
        created_at: str,
    ) -> LabeledDataset:
        if sealed and principal.role is Role.DEVELOPER:
            raise RoleViolationError(
                "only labeler or admin principals may register sealed datasets"
            )
        if dataset_id in self._datasets:
            raise ImmutableDatasetError(
                f"dataset {dataset_id!r} already exists and cannot be replaced"
            )
        ds = LabeledDataset(
            id=dataset_id,
            items=dict(items),
            sealed=sealed,
            owner_role=Role.LABELER if sealed else principal.role,
            created_at=created_at,
        )
        self._datasets[dataset_id] = ds
        return ds

    def put(self, dataset: LabeledDataset) -> None:
        """Restore-path insert preserving ownership exactly; not role-checked."""
        self._datasets[dataset.id] = dataset

    def get(self, dataset_id: str) -> LabeledDataset:
        """Engine-side access: full labels, no role filtering."""
        try:
            return self._datasets[dataset_id]
        except KeyError:
            raise NotFoundError(f"dataset {dataset_id!r} not found") from None

    def unseal(self, dataset_id: str) -> LabeledDataset:
        """Release a rotated-out test set to the developer role."""
        ds = self.get(dataset_id)
        released = LabeledDataset(
            id=ds.id,
            items=ds.items,
            sealed=False,
            owner_role=Role.DEVELOPER,
            created_at=ds.created_at,
        )
        self._datasets[dataset_id] = released
        return released

    def view(self, principal: Principal, dataset_id: str) -> DatasetView:
        """Role-filtered read: sealed labels never reach developers."""
        ds = self.get(dataset_id)
        if ds.sealed and principal.role is Role.DEVELOPER:
            return DatasetView(ds.id, ds.size, ds.sealed, labels=None, ids=ds.ids)
        return DatasetView(ds.id, ds.size, ds.sealed, labels=dict(ds.items), ids=ds.ids)


# ---------------------------------------------------------------------------
# Structured-text upload formats
# ---------------------------------------------------------------------------


def _parse_records(text: str, value_field: str) -> dict[str, int]:
    records: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {line_no}: invalid JSON ({exc.msg})", line=line_no)
        if not isinstance(obj, dict):
            raise FormatError(f"line {line_no}: expected an object", line=line_no)
        ex_id = obj.get("id")
        value = obj.get(value_field)
        if not isinstance(ex_id, str) or not ex_id:
            raise FormatError(
                f"line {line_no}: field 'id' must be a nonempty string", line=line_no
            )
        if isinstance(value, bool) or not isinstance(value, int):
            raise FormatError(
                f"line {line_no}: field {value_field!r} must be an integer", line=line_no
            )
        if ex_id in records:
            raise FormatError(f"line {line_no}: duplicate id {ex_id!r}", line=line_no)
        records[ex_id] = value
    if not records:
        raise FormatError("no records found", line=None)
    return records


def parse_label_records(text: str) -> dict[str, int]:
    """Dataset upload: one ``{"id": ..., "label": ...}`` object per line."""
    return _parse_records(text, "label")


def parse_prediction_records(text: str) -> dict[str, int]:
    """Prediction upload: one ``{"id": ..., "pred": ...}`` object per line."""
    return _parse_records(text, "pred")


def dump_label_records(items: Mapping[str, int]) -> str:
    return "\n".join(
        json.dumps({"id": k, "label": v}) for k, v in sorted(items.items())
    ) + "\n"


def dump_prediction_records(preds: Mapping[str, int]) -> str:
    return "\n".join(
        json.dumps({"id": k, "pred": v}) for k, v in sorted(preds.items())
    ) + "\n"

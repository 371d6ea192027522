"""Dataset registry, upload formats, and durable persistence."""

from __future__ import annotations

import json

import pytest

from holdout_meter.errors import (
    CorruptLogError,
    FormatError,
    ImmutableDatasetError,
    NotFoundError,
    RoleViolationError,
    ValidationError,
)
from holdout_meter.registry import (
    Principal,
    Registry,
    Role,
    dump_label_records,
    dump_prediction_records,
    parse_label_records,
    parse_prediction_records,
)
from holdout_meter.service import MeterService
from holdout_meter.specs import uniform_spec

from conftest import make_labels

DEV = Principal("d", Role.DEVELOPER, "t1")
LAB = Principal("l", Role.LABELER, "t2")
ADM = Principal("a", Role.ADMIN, "t3")


class TestRegistration:
    def test_labeler_registers_sealed(self):
        reg = Registry()
        ds = reg.add(LAB, "test", make_labels("x", 50), sealed=True, created_at="t0")
        assert ds.sealed and ds.owner_role is Role.LABELER

    def test_developer_cannot_seal(self):
        reg = Registry()
        with pytest.raises(RoleViolationError):
            reg.add(DEV, "test", make_labels("x", 5), sealed=True, created_at="t0")

    def test_developer_registers_unsealed_any_size(self):
        reg = Registry()
        ds = reg.add(DEV, "val", make_labels("v", 3), sealed=False, created_at="t0")
        assert not ds.sealed and ds.size == 3

    def test_empty_dataset_rejected(self):
        reg = Registry()
        with pytest.raises(ValidationError):
            reg.add(DEV, "val", {}, sealed=False, created_at="t0")

    def test_non_integer_labels_rejected(self):
        reg = Registry()
        with pytest.raises(ValidationError):
            reg.add(DEV, "val", {"a": "cat"}, sealed=False, created_at="t0")
        with pytest.raises(ValidationError):
            reg.add(DEV, "val", {"a": True}, sealed=False, created_at="t0")

    def test_datasets_are_immutable(self):
        reg = Registry()
        reg.add(DEV, "val", make_labels("v", 3), sealed=False, created_at="t0")
        with pytest.raises(ImmutableDatasetError):
            reg.add(DEV, "val", make_labels("w", 3), sealed=False, created_at="t1")

    def test_missing_dataset(self):
        with pytest.raises(NotFoundError):
            Registry().get("ghost")


class TestAccessMatrix:
    """No code path may return a sealed label to a developer."""

    @pytest.mark.parametrize("role,principal", [(r, Principal("p", r, "t")) for r in Role])
    @pytest.mark.parametrize("sealed", [True, False])
    def test_label_visibility(self, role, principal, sealed):
        reg = Registry()
        owner = LAB if sealed else DEV
        reg.add(owner, "ds", {"e1": 7, "e2": 9}, sealed=sealed, created_at="t0")
        view = reg.view(principal, "ds")
        if sealed and role is Role.DEVELOPER:
            assert view.labels is None
            assert view.ids == ["e1", "e2"]  # ids stay visible
        else:
            assert view.labels == {"e1": 7, "e2": 9}

    def test_unsealing_releases_labels_to_developers(self):
        reg = Registry()
        reg.add(LAB, "ds", {"e1": 7}, sealed=True, created_at="t0")
        assert reg.view(DEV, "ds").labels is None
        reg.unseal("ds")
        view = reg.view(DEV, "ds")
        assert view.labels == {"e1": 7}
        assert reg.get("ds").owner_role is Role.DEVELOPER


class TestUploadFormats:
    def test_label_records_roundtrip(self):
        items = {"a": 1, "b": 0}
        assert parse_label_records(dump_label_records(items)) == items

    def test_prediction_records_roundtrip(self):
        preds = {"a": 2, "b": 5}
        assert parse_prediction_records(dump_prediction_records(preds)) == preds

    def test_duplicate_id_reports_line_number(self):
        text = '{"id": "a", "label": 1}\n{"id": "b", "label": 0}\n{"id": "a", "label": 2}\n'
        with pytest.raises(FormatError) as err:
            parse_label_records(text)
        assert err.value.line == 3
        assert "duplicate" in str(err.value)

    def test_malformed_json_reports_line_number(self):
        with pytest.raises(FormatError) as err:
            parse_label_records('{"id": "a", "label": 1}\nnot json\n')
        assert err.value.line == 2

    def test_wrong_field_types_rejected(self):
        with pytest.raises(FormatError):
            parse_label_records('{"id": "a", "label": "one"}\n')
        with pytest.raises(FormatError):
            parse_label_records('{"id": 3, "label": 1}\n')
        with pytest.raises(FormatError):
            parse_prediction_records('{"id": "a", "pred": 0.5}\n')

    def test_empty_upload_rejected(self):
        with pytest.raises(FormatError):
            parse_label_records("\n\n")


def run_sample_workload(svc: MeterService) -> list[dict]:
    """A short session against a tiny plan; returns the live report dicts."""
    lab = svc.authenticate("labeler-token")
    dev = svc.authenticate("dev-token")
    spec = uniform_spec(3, 4, 0.2, 0.2, revert_budget=1, revert_steps=(2,))
    required = svc.plan(spec).required_size
    svc.register_dataset(lab, make_labels("x", required), sealed=True, dataset_id="test")
    svc.register_dataset(dev, make_labels("v", 20), sealed=False, dataset_id="val")
    svc.create_session(dev, spec, "val", "test", session_id="s1")
    preds_all = {**make_labels("x", required), **make_labels("v", 20)}
    reports = []
    wrong = dict(preds_all, **{f"v{i}": 1 for i in range(12)})  # val loss 0.6
    reports.append(svc.submit(dev, "s1", wrong).to_dict())
    reports.append(svc.submit(dev, "s1", preds_all).to_dict())
    reports.append(svc.revert(dev, "s1").to_dict())
    reports.append(svc.submit(dev, "s1", preds_all).to_dict())
    return reports


class TestPersistence:
    def test_restart_restores_identical_state(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store)
        live_reports = run_sample_workload(svc)
        digest = svc.state_digest()

        restored = MeterService(storage=store)
        assert restored.state_digest() == digest
        session = restored.get_session("s1")
        assert session.remaining_submissions == 4 - 3
        assert session.remaining_reverts == 0
        assert session.high_water == 2  # val gap 0.6 lands in the middle band

    def test_replay_reproduces_byte_identical_reports(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store)
        live_reports = run_sample_workload(svc)

        restored = MeterService(storage=store)
        replayed = [r["report"] for r in restored.replayed_reports]
        live_bytes = json.dumps(live_reports, sort_keys=True).encode()
        replay_bytes = json.dumps(replayed, sort_keys=True).encode()
        assert live_bytes == replay_bytes

    def test_empty_store_restores_empty(self, tmp_path):
        svc = MeterService(storage=tmp_path / "fresh")
        assert svc.registry.ids() == []
        assert svc.sessions == {}

    def test_truncated_record_names_offset(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store)
        run_sample_workload(svc)
        log_path = store / "events.jsonl"
        lines = log_path.read_text().splitlines()
        log_path.write_text("\n".join(lines[:-1] + [lines[-1][: len(lines[-1]) // 2]]) + "\n")
        with pytest.raises(CorruptLogError) as err:
            MeterService(storage=store)
        assert err.value.record == len(lines)

    def test_snapshot_then_tail_replay(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store)
        run_sample_workload(svc)
        svc.snapshot()
        dev = svc.authenticate("dev-token")
        required = svc.get_session("s1").plan.required_size
        preds_all = {**make_labels("x", required), **make_labels("v", 20)}
        svc.submit(dev, "s1", preds_all)
        digest = svc.state_digest()

        restored = MeterService(storage=store)
        assert restored.state_digest() == digest
        # only the post-snapshot tail was replayed
        assert len(restored.replayed_reports) == 1

    def test_periodic_snapshots(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store, snapshot_every=2)
        run_sample_workload(svc)
        assert (store / "snapshot.json").exists()
        restored = MeterService(storage=store, snapshot_every=2)
        assert restored.state_digest() == svc.state_digest()

    def test_rotation_unseals_via_replay(self, tmp_path):
        store = tmp_path / "store"
        svc = MeterService(storage=store)
        lab = svc.authenticate("labeler-token")
        dev = svc.authenticate("dev-token")
        spec = uniform_spec(2, 2, 0.25, 0.25)
        required = svc.plan(spec).required_size
        svc.register_dataset(lab, make_labels("x", required), sealed=True, dataset_id="t1")
        svc.register_dataset(lab, make_labels("y", required), sealed=True, dataset_id="t2")
        svc.register_dataset(dev, make_labels("v", 10), sealed=False, dataset_id="val")
        svc.create_session(dev, spec, "val", "t1", session_id="s1")
        preds = {**make_labels("x", required), **make_labels("v", 10)}
        svc.submit(dev, "s1", preds)
        svc.submit(dev, "s1", preds)
        svc.rotate(dev, "s1", "t2")
        assert not svc.registry.get("t1").sealed

        restored = MeterService(storage=store)
        assert not restored.registry.get("t1").sealed
        assert restored.registry.get("t2").sealed
        assert restored.state_digest() == svc.state_digest()

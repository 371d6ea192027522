"""Orchestration facade: registry + engine + durable event log.

Both the CLI and the HTTP API run through this class, so both surfaces
produce identical reports for identical inputs. Every mutation appends one
event; restoring a service from its storage directory replays the log
through the same transitions and must land on a digest-identical state.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Mapping

from .engine import (
    Session,
    SignalReport,
    apply_close,
    apply_handoff,
    apply_revert,
    apply_rotation,
    apply_submission,
    create_session,
    ensure_rotatable,
    report_from_state,
)
from .engine import submit as engine_submit
from .errors import AuthenticationError, ConflictError, NotFoundError, ValidationError
from .eventlog import EventLog
from .planner import plan as plan_spec
from .planner import PlanReport
from .registry import DatasetView, LabeledDataset, Principal, Registry, Role
from .specs import MeterSpec, Mode

DEFAULT_PRINCIPALS = (
    Principal("dev", Role.DEVELOPER, token="dev-token"),
    Principal("labeler", Role.LABELER, token="labeler-token"),
    Principal("admin", Role.ADMIN, token="admin-token"),
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class MeterService:
    """Single-process service state; per-session mutations are serialized."""

    def __init__(
        self,
        storage: str | os.PathLike[str] | None = None,
        principals: tuple[Principal, ...] = DEFAULT_PRINCIPALS,
        snapshot_every: int = 0,
        clock=None,
        log: EventLog | None = None,
    ):
        self.registry = Registry()
        self.sessions: dict[str, Session] = {}
        self.log = log if log is not None else EventLog(storage)
        self.principals = {p.token: p for p in principals}
        self.snapshot_every = snapshot_every
        self._idempotent: dict[str, dict[str, Any]] = {}
        self._clock = clock or _now
        # per-session writer locks: mutations serialize per session while
        # distinct sessions proceed in parallel
        self._session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        # reports regenerated while replaying the log; lets tests verify
        # that replay reproduces byte-identical output
        self.replayed_reports: list[dict[str, Any]] = []
        self._restore()

    @contextmanager
    def _writer(self, session_id: str):
        lock = self._session_locks.setdefault(session_id, threading.Lock())
        with lock:
            yield

    # -- authentication ----------------------------------------------------

    def authenticate(self, token: str | None) -> Principal:
        if not token or token not in self.principals:
            raise AuthenticationError("unknown or missing credential")
        return self.principals[token]

    # -- pure queries --------------------------------------------------

    def plan(self, spec: MeterSpec) -> PlanReport:
        return plan_spec(spec)

    def read_dataset(self, principal: Principal, dataset_id: str) -> DatasetView:
        return self.registry.view(principal, dataset_id)

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise NotFoundError(f"session {session_id!r} not found") from None

    def session_report(self, session_id: str) -> SignalReport:
        return report_from_state(self.get_session(session_id))

    def session_history(self, session_id: str) -> list[dict[str, Any]]:
        """Timeline of accepted submissions, filtered per the meter mode."""
        session = self.get_session(session_id)
        hidden = session.spec.mode is Mode.INCREMENTAL
        out = []
        running = 0
        starts = set(session.tenant_starts)
        for idx, rec in enumerate(session.history):
            if idx in starts:
                running = 0
            running = max(running, rec.signal)
            out.append(
                {
                    "step": rec.step,
                    "signal": None if hidden else rec.signal,
                    "incremental_signal": running,
                    "empirical_overfitting": None if hidden else rec.empirical_overfitting,
                    "digest": rec.digest,
                    "timestamp": rec.timestamp,
                }
            )
        return out

    def meter_view(self, session_id: str) -> dict[str, Any]:
        """Everything a gauge needs: geometry, needle, budgets, timeline."""
        session = self.get_session(session_id)
        report = report_from_state(session)
        return {
            "session": session.summary(),
            "bands": [
                {"lower": lo, "upper": hi, "epsilon": eps}
                for (lo, hi), eps in zip(session.spec.bands, session.spec.schedule.epsilons)
            ],
            "report": report.to_dict(),
            "timeline": self.session_history(session_id),
            "seq": session.seq,
        }

    def state_digest(self) -> str:
        state = self._state_dict()
        canonical = json.dumps(state, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    # -- mutations -----------------------------------------------------

    def register_dataset(
        self,
        principal: Principal,
        items: Mapping[str, int],
        sealed: bool,
        dataset_id: str | None = None,
        idempotency_key: str | None = None,
    ) -> LabeledDataset:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self.registry.get(cached["dataset_id"])
        dataset_id = dataset_id or f"ds-{uuid.uuid4().hex[:12]}"
        ts = self._clock()
        with self._registry_lock:
            ds = self.registry.add(principal, dataset_id, items, sealed, ts)
        self._record(
            {
                "op": "register_dataset",
                "ts": ts,
                "principal": principal.name,
                "role": principal.role.value,
                "dataset_id": dataset_id,
                "sealed": sealed,
                "items": dict(items),
            },
            idempotency_key,
            {"dataset_id": dataset_id},
        )
        return ds

    def create_session(
        self,
        principal: Principal,
        spec: MeterSpec,
        val_ref: str,
        test_ref: str,
        session_id: str | None = None,
        idempotency_key: str | None = None,
    ) -> Session:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self.get_session(cached["session_id"])
        val_ds = self.registry.get(val_ref)
        test_ds = self.registry.get(test_ref)
        session_id = session_id or f"sess-{uuid.uuid4().hex[:12]}"
        with self._writer(session_id):
            if session_id in self.sessions:
                raise ValidationError(f"session id {session_id!r} already in use")
            report = plan_spec(spec)
            ts = self._clock()
            session = create_session(session_id, spec, report, val_ds, test_ds, ts)
            session.seq = 1
            self.sessions[session_id] = session
        self._record(
            {
                "op": "create_session",
                "ts": ts,
                "session_id": session_id,
                "spec": spec.to_dict(),
                "plan": report.to_dict(),
                "val_ref": val_ref,
                "test_ref": test_ref,
            },
            idempotency_key,
            {"session_id": session_id},
        )
        return session

    def submit(
        self,
        principal: Principal,
        session_id: str,
        predictions: Mapping[str, int],
        expected_seq: int | None = None,
        idempotency_key: str | None = None,
    ) -> SignalReport:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self._report_from_cache(cached)
        with self._writer(session_id):
            session = self.get_session(session_id)
            self._check_seq(session, expected_seq)
            val_ds = self.registry.get(session.val_ref)
            test_ds = self.registry.get(session.test_ref)
            ts = self._clock()
            report, payload = engine_submit(session, predictions, val_ds, test_ds, ts)
            session.seq += 1
            self._record(
                {"op": "submit", "ts": ts, "session_id": session_id, **payload},
                idempotency_key,
                {"report": report.to_dict(), "session_id": session_id},
            )
        return report

    def revert(
        self,
        principal: Principal,
        session_id: str,
        expected_seq: int | None = None,
        idempotency_key: str | None = None,
    ) -> SignalReport:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self._report_from_cache(cached)
        with self._writer(session_id):
            session = self.get_session(session_id)
            self._check_seq(session, expected_seq)
            ts = self._clock()
            report = apply_revert(session, ts)
            session.seq += 1
            self._record(
                {"op": "revert", "ts": ts, "session_id": session_id},
                idempotency_key,
                {"report": report.to_dict(), "session_id": session_id},
            )
        return report

    def handoff(
        self,
        principal: Principal,
        session_id: str,
        expected_seq: int | None = None,
        idempotency_key: str | None = None,
    ) -> Session:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self.get_session(cached["session_id"])
        with self._writer(session_id):
            session = self.get_session(session_id)
            self._check_seq(session, expected_seq)
            ts = self._clock()
            apply_handoff(session, ts)
            session.seq += 1
            self._record(
                {"op": "handoff", "ts": ts, "session_id": session_id},
                idempotency_key,
                {"session_id": session_id},
            )
        return session

    def rotate(
        self,
        principal: Principal,
        session_id: str,
        new_test_ref: str,
        expected_seq: int | None = None,
        idempotency_key: str | None = None,
    ) -> Session:
        cached = self._idempotent_hit(idempotency_key)
        if cached is not None:
            return self.get_session(cached["session_id"])
        with self._writer(session_id):
            session = self.get_session(session_id)
            self._check_seq(session, expected_seq)
            ensure_rotatable(session)
            new_ds = self.registry.get(new_test_ref)
            ts = self._clock()
            old_ref = apply_rotation(session, new_ds, ts)
            # the spent test set is released for development use
            with self._registry_lock:
                self.registry.unseal(old_ref)
            session.seq += 1
            self._record(
                {"op": "rotate", "ts": ts, "session_id": session_id, "new_test_ref": new_test_ref},
                idempotency_key,
                {"session_id": session_id},
            )
        return session

    def close_session(self, principal: Principal, session_id: str) -> Session:
        with self._writer(session_id):
            session = self.get_session(session_id)
            ts = self._clock()
            apply_close(session, ts)
            session.seq += 1
            self._record({"op": "close", "ts": ts, "session_id": session_id}, None, {})
        return session

    # -- persistence -----------------------------------------------------

    def snapshot(self) -> None:
        self.log.write_snapshot(self._state_dict())

    def _state_dict(self) -> dict[str, Any]:
        return {
            "datasets": {
                ds_id: {
                    "items": dict(self.registry.get(ds_id).items),
                    "sealed": self.registry.get(ds_id).sealed,
                    "owner_role": self.registry.get(ds_id).owner_role.value,
                    "created_at": self.registry.get(ds_id).created_at,
                }
                for ds_id in self.registry.ids()
            },
            "sessions": {sid: s.to_dict() for sid, s in sorted(self.sessions.items())},
            "idempotent": self._idempotent,
        }

    def _load_state(self, state: dict[str, Any]) -> None:
        for ds_id, d in state["datasets"].items():
            self.registry.put(
                LabeledDataset(
                    id=ds_id,
                    items=d["items"],
                    sealed=d["sealed"],
                    owner_role=Role(d["owner_role"]),
                    created_at=d["created_at"],
                )
            )
        for sid, d in state["sessions"].items():
            self.sessions[sid] = Session.from_dict(d)
        self._idempotent = dict(state.get("idempotent", {}))

    def _restore(self) -> None:
        snap = self.log.read_snapshot()
        after = 0
        if snap is not None:
            after, state = snap
            self._load_state(state)
            self.log.last_seq = max(self.log.last_seq, after)
        for event in self.log.events(after_seq=after):
            self._apply_event(event)

    def _apply_event(self, event: dict[str, Any]) -> None:
        op = event["op"]
        ts = event["ts"]
        if op == "register_dataset":
            principal = Principal(event["principal"], Role(event["role"]))
            self.registry.add(
                principal, event["dataset_id"], event["items"], event["sealed"], ts
            )
        elif op == "create_session":
            spec = MeterSpec.from_dict(event["spec"])
            val_ds = self.registry.get(event["val_ref"])
            test_ds = self.registry.get(event["test_ref"])
            report = plan_spec(spec)
            session = create_session(
                event["session_id"], spec, report, val_ds, test_ds, ts
            )
            session.seq = 1
            self.sessions[event["session_id"]] = session
        elif op == "submit":
            session = self.get_session(event["session_id"])
            report = apply_submission(
                session,
                event["digest"],
                event["val_errors"],
                event["val_size"],
                event["test_errors"],
                event["test_size"],
                ts,
            )
            session.seq += 1
            self.replayed_reports.append(
                {"session_id": event["session_id"], "report": report.to_dict()}
            )
        elif op == "revert":
            session = self.get_session(event["session_id"])
            report = apply_revert(session, ts)
            session.seq += 1
            self.replayed_reports.append(
                {"session_id": event["session_id"], "report": report.to_dict()}
            )
        elif op == "handoff":
            session = self.get_session(event["session_id"])
            apply_handoff(session, ts)
            session.seq += 1
        elif op == "rotate":
            session = self.get_session(event["session_id"])
            old_ref = apply_rotation(session, self.registry.get(event["new_test_ref"]), ts)
            self.registry.unseal(old_ref)
            session.seq += 1
        elif op == "close":
            session = self.get_session(event["session_id"])
            apply_close(session, ts)
            session.seq += 1
        else:
            raise ValidationError(f"unknown event op {op!r}")
        if idem := event.get("idem"):
            self._idempotent[idem] = event.get("idem_response", {})

    def _record(
        self,
        event: dict[str, Any],
        idempotency_key: str | None,
        response: dict[str, Any],
    ) -> None:
        if idempotency_key:
            event = {**event, "idem": idempotency_key, "idem_response": response}
            self._idempotent[idempotency_key] = response
        self.log.append(event)
        if self.snapshot_every and self.log.last_seq % self.snapshot_every == 0:
            self.snapshot()

    def _idempotent_hit(self, key: str | None) -> dict[str, Any] | None:
        if key is None:
            return None
        return self._idempotent.get(key)

    def _report_from_cache(self, cached: dict[str, Any]) -> SignalReport:
        d = cached["report"]
        from .engine import SessionState

        return SignalReport(
            mode=Mode(d["mode"]),
            step=d["step"],
            signal=d["signal"],
            incremental_signal=d["incremental_signal"],
            band=tuple(d["band"]) if d["band"] else None,
            epsilon_bound=d["epsilon_bound"],
            delta=d["delta"],
            empirical_overfitting=d["empirical_overfitting"],
            remaining_submissions=d["remaining_submissions"],
            remaining_reverts=d["remaining_reverts"],
            interval=tuple(d["interval"]) if d["interval"] else None,
            state=SessionState(d["state"]),
        )

    def _check_seq(self, session: Session, expected_seq: int | None) -> None:
        if expected_seq is not None and expected_seq != session.seq:
            raise ConflictError(
                f"session {session.id} is at seq {session.seq}, caller expected"
                f" {expected_seq}"
            )

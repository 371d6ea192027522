"""HTTP surface of the meter service.

All payloads are structured text (JSON bodies; dataset and prediction
uploads in the one-record-per-line registry format). Every state-changing
response carries the session's event-sequence number, and mutations accept
``Idempotency-Key`` (replay-safe retries) and ``If-Match-Seq`` (optimistic
concurrency) headers. Sealed labels never appear in any payload, error
payloads included.
"""

from __future__ import annotations

from typing import Any

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from ..errors import (
    AuthenticationError,
    ConflictError,
    ImmutableDatasetError,
    MeterError,
    NotFoundError,
    RoleViolationError,
    StateError,
    StorageError,
    ValidationError,
)
from ..registry import Principal, parse_label_records, parse_prediction_records
from ..service import MeterService
from ..specs import MeterSpec


def _status_for(exc: MeterError) -> int:
    if isinstance(exc, AuthenticationError):
        return 401
    if isinstance(exc, RoleViolationError):
        return 403
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, (StateError, ConflictError, ImmutableDatasetError)):
        return 409
    if isinstance(exc, ValidationError):
        return 400
    if isinstance(exc, StorageError):
        return 500
    return 400


def error_payload(exc: MeterError) -> dict[str, Any]:
    detail: dict[str, Any] = {"code": exc.code, "message": str(exc)}
    for attr in ("required", "actual", "missing", "extra", "line", "record"):
        if hasattr(exc, attr):
            detail[attr] = getattr(exc, attr)
    return {"error": detail}


def create_app(service: MeterService) -> FastAPI:
    app = FastAPI(title="holdout-meter", version="0.1.0")

    def principal(authorization: str | None = Header(default=None)) -> Principal:
        token = None
        if authorization and authorization.lower().startswith("bearer "):
            token = authorization[7:].strip()
        return service.authenticate(token)

    @app.exception_handler(MeterError)
    async def meter_error_handler(_req: Request, exc: MeterError) -> JSONResponse:
        return JSONResponse(status_code=_status_for(exc), content=error_payload(exc))

    @app.post("/plans")
    def create_plan(payload: dict, _p: Principal = Depends(principal)) -> dict:
        spec = MeterSpec.from_dict(payload)
        return {"plan": service.plan(spec).to_dict(), "spec": spec.to_dict()}

    @app.post("/datasets")
    async def register_dataset(
        request: Request,
        sealed: bool = False,
        dataset_id: str | None = None,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        body = (await request.body()).decode("utf-8")
        items = parse_label_records(body)
        ds = service.register_dataset(
            p, items, sealed, dataset_id=dataset_id, idempotency_key=idempotency_key
        )
        return {"dataset_id": ds.id, "size": ds.size, "sealed": ds.sealed}

    @app.get("/datasets/{dataset_id}")
    def read_dataset(dataset_id: str, p: Principal = Depends(principal)) -> dict:
        return service.read_dataset(p, dataset_id).to_dict()

    @app.post("/sessions")
    def create_session(
        payload: dict,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        spec = MeterSpec.from_dict(payload.get("spec", {}))
        for fieldname in ("val_ref", "test_ref"):
            if fieldname not in payload:
                raise ValidationError(f"missing field {fieldname!r}")
        session = service.create_session(
            p,
            spec,
            payload["val_ref"],
            payload["test_ref"],
            session_id=payload.get("session_id"),
            idempotency_key=idempotency_key,
        )
        return {"session": session.summary(), "seq": session.seq}

    @app.post("/sessions/{session_id}/submissions")
    async def submit(
        session_id: str,
        request: Request,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
        if_match_seq: int | None = Header(default=None, alias="If-Match-Seq"),
    ) -> dict:
        body = (await request.body()).decode("utf-8")
        predictions = parse_prediction_records(body)
        report = service.submit(
            p,
            session_id,
            predictions,
            expected_seq=if_match_seq,
            idempotency_key=idempotency_key,
        )
        return {"report": report.to_dict(), "seq": service.get_session(session_id).seq}

    @app.post("/sessions/{session_id}/revert")
    def revert(
        session_id: str,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
        if_match_seq: int | None = Header(default=None, alias="If-Match-Seq"),
    ) -> dict:
        report = service.revert(
            p, session_id, expected_seq=if_match_seq, idempotency_key=idempotency_key
        )
        return {"report": report.to_dict(), "seq": service.get_session(session_id).seq}

    @app.post("/sessions/{session_id}/handoff")
    def handoff(
        session_id: str,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
        if_match_seq: int | None = Header(default=None, alias="If-Match-Seq"),
    ) -> dict:
        session = service.handoff(
            p, session_id, expected_seq=if_match_seq, idempotency_key=idempotency_key
        )
        return {"session": session.summary(), "seq": session.seq}

    @app.post("/sessions/{session_id}/rotation")
    def rotate(
        session_id: str,
        payload: dict,
        p: Principal = Depends(principal),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
        if_match_seq: int | None = Header(default=None, alias="If-Match-Seq"),
    ) -> dict:
        if "new_test_ref" not in payload:
            raise ValidationError("missing field 'new_test_ref'")
        session = service.rotate(
            p,
            session_id,
            payload["new_test_ref"],
            expected_seq=if_match_seq,
            idempotency_key=idempotency_key,
        )
        return {"session": session.summary(), "seq": session.seq}

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str, _p: Principal = Depends(principal)) -> dict:
        session = service.get_session(session_id)
        return {
            "session": session.summary(),
            "report": service.session_report(session_id).to_dict(),
            "seq": session.seq,
        }

    @app.get("/sessions/{session_id}/history")
    def session_history(session_id: str, _p: Principal = Depends(principal)) -> dict:
        session = service.get_session(session_id)
        return {"history": service.session_history(session_id), "seq": session.seq}

    @app.get("/sessions/{session_id}/meter")
    def meter_view(session_id: str, _p: Principal = Depends(principal)) -> dict:
        return service.meter_view(session_id)

    return app

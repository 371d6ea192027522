"""Command-line surface of the meter service.

Shares the service layer with the HTTP API, so both produce identical
output for identical inputs. Exit codes: 0 success, 2 validation/usage,
3 authentication/authorization, 4 state/not-found/conflict, 5 storage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

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
from ..oracle import enumerate_tree
from ..registry import parse_label_records, parse_prediction_records
from ..service import MeterService
from ..simulator import (
    ObliviousStrategy,
    WorstCaseTreeStrategy,
    load_trace,
    replay_trace,
    run_trials,
    save_trace_plot,
    save_trials_plot,
    strategy_from_dict,
)
from ..specs import EpsilonSchedule, MeterSpec, equal_bands
from .config import load_config

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_AUTH = 3
EXIT_STATE = 4
EXIT_STORAGE = 5


def _exit_code(exc: MeterError) -> int:
    if isinstance(exc, (AuthenticationError, RoleViolationError)):
        return EXIT_AUTH
    if isinstance(exc, (StateError, NotFoundError, ConflictError, ImmutableDatasetError)):
        return EXIT_STATE
    if isinstance(exc, StorageError):
        return EXIT_STORAGE
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return EXIT_VALIDATION


def _emit(payload: dict[str, Any]) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _add_spec_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec-file", type=Path, help="JSON file with the full meter spec")
    parser.add_argument("--mode", choices=["regular", "incremental"], default="regular")
    parser.add_argument("--m", type=int, help="number of signal bands")
    parser.add_argument(
        "--epsilon",
        help="uniform tolerance, or comma-separated nondecreasing schedule",
    )
    parser.add_argument("--delta", type=float, help="confidence parameter in (0,1)")
    parser.add_argument("--T", type=int, help="development-cycle length")
    parser.add_argument(
        "--bands", help="comma-separated band edges from 0 to 1 (defaults to equal widths)"
    )
    parser.add_argument("--tenancy", help="comma-separated per-tenant step counts")
    parser.add_argument("--revert-steps", help="comma-separated planned revert steps")
    parser.add_argument(
        "--conservative-multitenant",
        action="store_true",
        help="use the cautious multitenant count (extra factor m in regular mode)",
    )


def _spec_from_args(args: argparse.Namespace) -> MeterSpec:
    if args.spec_file:
        try:
            data = json.loads(args.spec_file.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"spec file {args.spec_file} not found") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"spec file {args.spec_file}: {exc.msg}") from exc
        return MeterSpec.from_dict(data)
    if args.epsilon is None or args.delta is None or args.T is None:
        raise ValidationError("--epsilon, --delta and --T are required without --spec-file")
    epsilons = [float(e) for e in str(args.epsilon).split(",")]
    if len(epsilons) == 1:
        if args.m is None:
            raise ValidationError("--m is required with a uniform --epsilon")
        epsilons = epsilons * args.m
    elif args.m is not None and args.m != len(epsilons):
        raise ValidationError(f"--m {args.m} disagrees with {len(epsilons)} tolerances")
    m = len(epsilons)
    if args.bands:
        edges = [float(x) for x in args.bands.split(",")]
        if len(edges) != m + 1:
            raise ValidationError(f"expected {m + 1} band edges, got {len(edges)}")
        bands = tuple((edges[i], edges[i + 1]) for i in range(m))
    else:
        bands = equal_bands(m)
    tenancy = tuple(int(t) for t in args.tenancy.split(",")) if args.tenancy else ()
    reverts = tuple(int(t) for t in args.revert_steps.split(",")) if args.revert_steps else ()
    return MeterSpec(
        bands=bands,
        schedule=EpsilonSchedule(tuple(epsilons)),
        delta=args.delta,
        T=args.T,
        mode=args.mode,
        tenancy=tenancy,
        revert_budget=len(reverts),
        revert_steps=reverts,
        conservative_multitenant=args.conservative_multitenant,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holdout-meter",
        description="Plan test-set sizes and run metered development sessions.",
    )
    parser.add_argument("--config", type=Path, help="gateway config file (JSON)")
    parser.add_argument(
        "--token", help="caller credential (defaults to METER_TOKEN environment variable)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="compute the required test-set size")
    _add_spec_args(p_plan)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--bind", help="host:port override")

    p_ds = sub.add_parser("dataset", help="dataset operations")
    ds_sub = p_ds.add_subparsers(dest="dataset_command", required=True)
    p_ds_add = ds_sub.add_parser("add", help="register a labeled dataset")
    p_ds_add.add_argument("--file", type=Path, required=True, help="JSONL id/label records")
    p_ds_add.add_argument("--sealed", action="store_true")
    p_ds_add.add_argument("--id", dest="dataset_id")
    p_ds_show = ds_sub.add_parser("show", help="read a dataset (role-filtered)")
    p_ds_show.add_argument("dataset_id")

    p_sess = sub.add_parser("session", help="session operations")
    sess_sub = p_sess.add_subparsers(dest="session_command", required=True)
    p_sess_create = sess_sub.add_parser("create", help="open a metering session")
    _add_spec_args(p_sess_create)
    p_sess_create.add_argument("--val", required=True, help="validation dataset id")
    p_sess_create.add_argument("--test", required=True, help="sealed test dataset id")
    p_sess_create.add_argument("--id", dest="session_id")
    p_sess_status = sess_sub.add_parser("status", help="session status and meter view")
    p_sess_status.add_argument("session_id")

    p_submit = sub.add_parser("submit", help="submit predictions to a session")
    p_submit.add_argument("--session", required=True)
    p_submit.add_argument("--file", type=Path, required=True, help="JSONL id/pred records")
    p_submit.add_argument("--expect-seq", type=int)
    p_submit.add_argument("--idempotency-key")

    p_revert = sub.add_parser("revert", help="step back the latest submission")
    p_revert.add_argument("--session", required=True)
    p_revert.add_argument("--expect-seq", type=int)

    p_handoff = sub.add_parser("handoff", help="advance to the next tenant")
    p_handoff.add_argument("--session", required=True)

    p_rotate = sub.add_parser("rotate", help="swap in a fresh sealed test set")
    p_rotate.add_argument("--session", required=True)
    p_rotate.add_argument("--test", required=True, help="replacement test dataset id")

    p_sim = sub.add_parser("simulate", help="guarantee validation and trace rendering")
    _add_spec_args(p_sim)
    p_sim.add_argument("--trace", type=Path, help="JSONL val/test accuracy trace to render")
    p_sim.add_argument("--trials", type=int, help="Monte-Carlo trial count")
    p_sim.add_argument(
        "--strategy",
        choices=["oblivious", "worst-case-tree"],
        default="worst-case-tree",
    )
    p_sim.add_argument("--strategy-file", type=Path, help="JSON strategy table")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--test-size", type=int, help="override the planned size")
    p_sim.add_argument("--plot", type=Path, help="also write a PNG rendering")

    p_enum = sub.add_parser("enumerate", help="brute-force count submission trees")
    p_enum.add_argument("--m", type=int, required=True)
    p_enum.add_argument("--T", type=int, required=True)
    p_enum.add_argument("--mode", choices=["regular", "incremental"], default="regular")
    p_enum.add_argument("--reverts", help="comma-separated revert steps")
    p_enum.add_argument("--tenancy", help="comma-separated tenant step counts")

    return parser


def _run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    service = MeterService(storage=config.storage, principals=config.principals)
    token = args.token or os.environ.get("METER_TOKEN")

    if args.command == "plan":
        spec = _spec_from_args(args)
        _emit({"plan": service.plan(spec).to_dict(), "spec": spec.to_dict()})
        return EXIT_OK

    if args.command == "serve":
        import uvicorn

        from .api import create_app

        bind = args.bind or config.bind
        host, port = bind.rsplit(":", 1)
        uvicorn.run(create_app(service), host=host, port=int(port))
        return EXIT_OK

    if args.command == "enumerate":
        reverts = [int(t) for t in args.reverts.split(",")] if args.reverts else None
        tenancy = [int(t) for t in args.tenancy.split(",")] if args.tenancy else None
        result = enumerate_tree(args.m, args.T, args.mode, reverts=reverts, tenancy=tenancy)
        _emit(
            {
                "h": [list(row) for row in result.h],
                "per_signal": list(result.per_signal),
                "total": result.total,
            }
        )
        return EXIT_OK

    if args.command == "simulate":
        spec = _spec_from_args(args)
        if args.trace:
            trace = load_trace(args.trace.read_text(encoding="utf-8"))
            rows = replay_trace(trace, spec)
            out: dict = {"trace": rows}
            if args.plot:
                save_trace_plot(rows, spec, str(args.plot))
                out["plot"] = str(args.plot)
            _emit(out)
            return EXIT_OK
        if not args.trials:
            raise ValidationError("either --trace or --trials is required")
        if args.strategy_file:
            strategy = strategy_from_dict(
                json.loads(args.strategy_file.read_text(encoding="utf-8"))
            )
        elif args.strategy == "oblivious":
            strategy = ObliviousStrategy((0.3, 0.45, 0.5, 0.55, 0.7))
        else:
            strategy = WorstCaseTreeStrategy(seed=args.seed)
        result = run_trials(
            spec, strategy, trials=args.trials, seed=args.seed, test_size=args.test_size
        )
        out = result.to_dict()
        if args.plot:
            save_trials_plot(result, spec.delta, str(args.plot))
            out["plot"] = str(args.plot)
        _emit(out)
        return EXIT_OK

    # everything below requires a principal
    principal = service.authenticate(token)

    if args.command == "dataset":
        if args.dataset_command == "add":
            items = parse_label_records(args.file.read_text(encoding="utf-8"))
            ds = service.register_dataset(
                principal, items, args.sealed, dataset_id=args.dataset_id
            )
            _emit({"dataset_id": ds.id, "size": ds.size, "sealed": ds.sealed})
        else:
            _emit(service.read_dataset(principal, args.dataset_id).to_dict())
        return EXIT_OK

    if args.command == "session":
        if args.session_command == "create":
            spec = _spec_from_args(args)
            session = service.create_session(
                principal, spec, args.val, args.test, session_id=args.session_id
            )
            _emit({"session": session.summary(), "seq": session.seq})
        else:
            _emit(service.meter_view(args.session_id))
        return EXIT_OK

    if args.command == "submit":
        predictions = parse_prediction_records(args.file.read_text(encoding="utf-8"))
        report = service.submit(
            principal,
            args.session,
            predictions,
            expected_seq=args.expect_seq,
            idempotency_key=args.idempotency_key,
        )
        _emit(
            {"report": report.to_dict(), "seq": service.get_session(args.session).seq}
        )
        return EXIT_OK

    if args.command == "revert":
        report = service.revert(principal, args.session, expected_seq=args.expect_seq)
        _emit(
            {"report": report.to_dict(), "seq": service.get_session(args.session).seq}
        )
        return EXIT_OK

    if args.command == "handoff":
        session = service.handoff(principal, args.session)
        _emit({"session": session.summary(), "seq": session.seq})
        return EXIT_OK

    if args.command == "rotate":
        session = service.rotate(principal, args.session, args.test)
        _emit({"session": session.summary(), "seq": session.seq})
        return EXIT_OK

    raise ValidationError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except MeterError as exc:
        json.dump({"error": {"code": exc.code, "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return _exit_code(exc)
    except FileNotFoundError as exc:
        json.dump({"error": {"code": "file_not_found", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

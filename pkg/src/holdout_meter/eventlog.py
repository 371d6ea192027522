"""Append-only event log with periodic snapshots.

One JSON object per line, sequenced from 1. The log is the source of
truth: restoring replays it through the same transition functions the
live path uses, which doubles as the determinism oracle in tests.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

from .errors import CorruptLogError


class EventLog:
    """Single-writer ordered log; in-memory when no directory is given."""

    LOG_NAME = "events.jsonl"
    SNAPSHOT_NAME = "snapshot.json"

    def __init__(self, directory: str | os.PathLike[str] | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._memory: list[dict[str, Any]] = []
        self._append_lock = threading.Lock()
        self.last_seq = 0
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    @property
    def log_path(self) -> Path | None:
        return self.directory / self.LOG_NAME if self.directory else None

    @property
    def snapshot_path(self) -> Path | None:
        return self.directory / self.SNAPSHOT_NAME if self.directory else None

    def append(self, event: dict[str, Any]) -> dict[str, Any]:
        with self._append_lock:
            self.last_seq += 1
            record = {"seq": self.last_seq, **event}
            if self.log_path is not None:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, separators=(",", ":")) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            else:
                self._memory.append(record)
            return record

    def events(self, after_seq: int = 0) -> Iterator[dict[str, Any]]:
        """Yield events with seq > after_seq, verifying order and shape."""
        if self.log_path is None:
            source: Iterator[tuple[int, str]] = (
                (i + 1, json.dumps(e)) for i, e in enumerate(self._memory)
            )
        elif self.log_path.exists():
            source = self._lines()
        else:
            return
        prev = 0
        for record_no, raw in source:
            try:
                event = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorruptLogError(f"unparseable event: {exc.msg}", record=record_no)
            if not isinstance(event, dict) or "seq" not in event or "op" not in event:
                raise CorruptLogError("event missing seq/op fields", record=record_no)
            seq = event["seq"]
            if not isinstance(seq, int) or (prev and seq <= prev):
                raise CorruptLogError(f"out-of-order seq {seq!r}", record=record_no)
            prev = seq
            self.last_seq = max(self.last_seq, seq)
            if seq > after_seq:
                yield event

    def _lines(self) -> Iterator[tuple[int, str]]:
        assert self.log_path is not None
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for record_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    # a bare trailing newline is fine; a blank line mid-log is not
                    continue
                yield record_no, line

    def write_snapshot(self, state: dict[str, Any]) -> None:
        if self.snapshot_path is None:
            return
        payload = {"upto_seq": self.last_seq, "state": state}
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, separators=(",", ":")), encoding="utf-8")
        tmp.replace(self.snapshot_path)

    def read_snapshot(self) -> tuple[int, dict[str, Any]] | None:
        if self.snapshot_path is None or not self.snapshot_path.exists():
            return None
        try:
            payload = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            return payload["upto_seq"], payload["state"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise CorruptLogError(f"unreadable snapshot: {exc}", record=0)

"""Gateway configuration: one JSON file plus environment overrides.

Environment variables ``METER_BIND``, ``METER_STORAGE``, and
``METER_TOKENS`` (a JSON array of principals) override the file;
``METER_TOKEN`` supplies the caller credential for the CLI.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError
from ..registry import Principal, Role
from ..service import DEFAULT_PRINCIPALS

DEFAULT_BIND = "127.0.0.1:8787"


@dataclass(frozen=True)
class GatewayConfig:
    bind: str = DEFAULT_BIND
    storage: str | None = None
    principals: tuple[Principal, ...] = DEFAULT_PRINCIPALS

    @property
    def host(self) -> str:
        return self.bind.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind.rsplit(":", 1)[1])


def _parse_principals(raw) -> tuple[Principal, ...]:
    try:
        return tuple(
            Principal(p["name"], Role(p["role"]), token=p["token"]) for p in raw
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed principals config: {exc}") from exc


def load_config(path: str | os.PathLike[str] | None = None) -> GatewayConfig:
    bind = DEFAULT_BIND
    storage: str | None = None
    principals = DEFAULT_PRINCIPALS
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"config file {path!s} not found") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path!s}: {exc.msg}") from exc
        bind = data.get("bind", bind)
        storage = data.get("storage", storage)
        if "principals" in data:
            principals = _parse_principals(data["principals"])
    if env_bind := os.environ.get("METER_BIND"):
        bind = env_bind
    if env_storage := os.environ.get("METER_STORAGE"):
        storage = env_storage
    if env_tokens := os.environ.get("METER_TOKENS"):
        principals = _parse_principals(json.loads(env_tokens))
    return GatewayConfig(bind=bind, storage=storage, principals=principals)

"""CLI and HTTP service exposing planning, datasets, and sessions."""

from .api import create_app
from .config import GatewayConfig, load_config

__all__ = ["GatewayConfig", "create_app", "load_config"]

"""REST API over the platform operations."""
from __future__ import annotations

from .app import ApiConfig, create_app
from .platform import Platform

__all__ = ["ApiConfig", "Platform", "create_app"]

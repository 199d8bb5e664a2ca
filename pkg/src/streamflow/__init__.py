"""Composite-stream processing platform for sensor data.

Service objects own streams; composite streams compute new sensor updates
from the latest updates of other streams, and an update fans out through
subscriptions to dependent composites and HTTP callbacks.
"""
from __future__ import annotations

__version__ = "0.1.0"

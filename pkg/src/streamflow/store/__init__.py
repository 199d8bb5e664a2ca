"""Document store for descriptors, subscriptions and per-stream update logs."""
from __future__ import annotations

from .files import FileStore
from .latency import DelayedStore
from .memory import AppendResult, MemoryStore, StreamLog

Store = MemoryStore

__all__ = ["AppendResult", "DelayedStore", "FileStore", "MemoryStore", "Store", "StreamLog", "open_store"]


def open_store(location: str | None = None, max_entries: int | None = None) -> MemoryStore:
    """``None`` or ``"mem"`` gives an in-memory store, anything else a directory."""
    if location in (None, "", "mem"):
        return MemoryStore(max_entries)
    return FileStore(location, max_entries)

from __future__ import annotations

import time

from ..model import SensorUpdate, StreamRef
from .memory import AppendResult, MemoryStore


class DelayedStore(MemoryStore):
    """In-memory store that charges a fixed round-trip delay per stream read and append.

    Stands in for a document store reached over the network. The delay is
    spent before the call reaches the stream lock, so concurrent requests
    overlap their waits the way independent network round-trips do.
    """

    def __init__(self, latency_s: float, max_entries: int | None = None):
        if latency_s < 0:
            raise ValueError("latency must be >= 0")
        super().__init__(max_entries)
        self.latency_s = latency_s

    def get_last_update(self, ref: StreamRef) -> SensorUpdate | None:
        time.sleep(self.latency_s)
        return super().get_last_update(ref)

    def append_update(self, ref: StreamRef, su: SensorUpdate) -> AppendResult:
        time.sleep(self.latency_s)
        return super().append_update(ref, su)

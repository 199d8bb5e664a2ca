from __future__ import annotations

import threading
import time
from collections import deque
from typing import Any


class TaskQueue:
    """Multi-producer multi-consumer queue that knows when the system is idle.

    Capacity only limits *external* admissions (:meth:`try_reserve`); tasks
    produced by the pipeline itself are always accepted, otherwise workers
    could deadlock pushing into a full queue they are supposed to drain.

    ``unfinished`` counts queued tasks, tasks being processed, and holds taken
    for work running elsewhere (callback deliveries). It reaching zero is the
    quiescence signal.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Any] = deque()
        self._lock = threading.Lock()
        self._not_empty = threading.Condition(self._lock)
        self._idle = threading.Condition(self._lock)
        self._reserved = 0
        self._unfinished = 0
        self._closed = False

    def try_reserve(self) -> bool:
        with self._lock:
            if len(self._items) + self._reserved >= self.capacity:
                return False
            self._reserved += 1
            return True

    def cancel_reservation(self) -> None:
        with self._lock:
            self._reserved -= 1

    def put(self, item: Any, reserved: bool = False) -> None:
        with self._lock:
            if reserved:
                self._reserved -= 1
            self._items.append(item)
            self._unfinished += 1
            self._not_empty.notify()

    def get(self, timeout: float | None = None) -> Any | None:
        """Next task, or ``None`` once closed and drained (or on timeout)."""
        with self._not_empty:
            deadline = None if timeout is None else time.monotonic() + timeout
            while not self._items:
                if self._closed:
                    return None
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._not_empty.wait(remaining)
            return self._items.popleft()

    def hold(self) -> None:
        with self._lock:
            self._unfinished += 1

    def task_done(self) -> None:
        with self._lock:
            self._unfinished -= 1
            if self._unfinished < 0:
                raise ValueError("task_done() called too many times")
            if self._unfinished == 0:
                self._idle.notify_all()

    release = task_done

    def wait_idle(self, timeout: float | None = None) -> bool:
        with self._idle:
            return self._idle.wait_for(lambda: self._unfinished == 0, timeout)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._not_empty.notify_all()

    @property
    def unfinished(self) -> int:
        return self._unfinished

    def qsize(self) -> int:
        return len(self._items)

from __future__ import annotations

import enum
import threading
from collections import deque
from collections.abc import Callable

from ..errors import BadRange, Conflict, NotFound
from ..model import (
    CompositeStream,
    InternalTarget,
    SensorUpdate,
    ServiceObjectDescriptor,
    StreamRef,
    Subscription,
)


class AppendResult(enum.Enum):
    ACCEPTED = "accepted"
    STALE = "stale"


class StreamLog:
    """Append-ordered updates of one stream, strictly increasing in ``lastUpdate``."""

    def __init__(self, ref: StreamRef, max_entries: int | None = None):
        self.ref = ref
        self.entries: deque[SensorUpdate] = deque(maxlen=max_entries)
        self.lock = threading.Lock()
        self.closed = False
        self._newest: int | None = None

    @property
    def last_timestamp(self) -> int:
        return 0 if self._newest is None else self._newest

    def admits(self, ts: int) -> bool:
        return self._newest is None or ts > self._newest

    def push(self, su: SensorUpdate) -> None:
        self.entries.append(su)
        self._newest = su.last_update


AppendListener = Callable[[StreamRef, SensorUpdate, AppendResult], None]


class MemoryStore:
    """Thread-safe registry of service objects, subscriptions and stream logs.

    ``max_entries`` turns every stream log into a ring holding only the newest
    entries. ``append_listener`` is called inside the per-stream critical
    section of :meth:`append_update`, so the order of calls is the
    linearization order of appends on that stream.
    """

    def __init__(self, max_entries: int | None = None):
        self.max_entries = max_entries
        self.append_listener: AppendListener | None = None
        self._lock = threading.RLock()
        self._sos: dict[str, ServiceObjectDescriptor] = {}
        self._subs: dict[str, Subscription] = {}
        self._by_source: dict[StreamRef, dict[str, Subscription]] = {}
        self._logs: dict[StreamRef, StreamLog] = {}

    # persistence hooks, overridden by the file backend
    def _persist_so(self, d: ServiceObjectDescriptor) -> None:
        pass

    def _persist_so_delete(self, so_id: str) -> None:
        pass

    def _persist_sub(self, s: Subscription) -> None:
        pass

    def _persist_sub_delete(self, sub_id: str) -> None:
        pass

    def _persist_update(self, log: StreamLog, su: SensorUpdate) -> None:
        pass

    def _drop_log(self, log: StreamLog) -> None:
        log.closed = True

    # -- service objects ----------------------------------------------------

    def create_so(self, d: ServiceObjectDescriptor) -> ServiceObjectDescriptor:
        with self._lock:
            if d.id in self._sos:
                raise Conflict(f"service object {d.id} already exists")
            self._persist_so(d)
            self._sos[d.id] = d
        return d

    def get_so(self, so_id: str) -> ServiceObjectDescriptor:
        try:
            return self._sos[so_id]
        except KeyError:
            raise NotFound(f"service object {so_id} not found") from None

    def list_sos(self) -> list[ServiceObjectDescriptor]:
        with self._lock:
            return list(self._sos.values())

    def update_so(self, so_id: str, d: ServiceObjectDescriptor) -> ServiceObjectDescriptor:
        """Replace a descriptor, dropping logs and subscriptions of vanished streams."""
        with self._lock:
            self.get_so(so_id)
            if d.id != so_id:
                raise Conflict("descriptor id does not match")
            self._persist_so(d)
            self._sos[so_id] = d
            for ref in [r for r in self._logs if r.so_id == so_id and r.stream_id not in d.streams]:
                self._drop_log(self._logs.pop(ref))
            for sub in list(self._subs.values()):
                if not self._sub_is_live(sub):
                    self._remove_sub_locked(sub.id)
        return d

    def delete_so(self, so_id: str) -> None:
        with self._lock:
            self.get_so(so_id)
            for sub in list(self._subs.values()):
                target = sub.kind.target if isinstance(sub.kind, InternalTarget) else None
                if sub.source.so_id == so_id or (target is not None and target.so_id == so_id):
                    self._remove_sub_locked(sub.id)
            for ref in [r for r in self._logs if r.so_id == so_id]:
                self._drop_log(self._logs.pop(ref))
            self._persist_so_delete(so_id)
            del self._sos[so_id]

    def stream_spec(self, ref: StreamRef):
        spec = self.get_so(ref.so_id).streams.get(ref.stream_id)
        if spec is None:
            raise NotFound(f"stream {ref} not found")
        return spec

    # -- stream logs ----------------------------------------------------------

    def _log(self, ref: StreamRef) -> StreamLog:
        log = self._logs.get(ref)
        if log is not None:
            return log
        with self._lock:
            self.stream_spec(ref)
            log = self._logs.get(ref)
            if log is None:
                log = self._logs[ref] = self._open_log(ref)
            return log

    def _open_log(self, ref: StreamRef) -> StreamLog:
        return StreamLog(ref, self.max_entries)

    def append_update(self, ref: StreamRef, su: SensorUpdate) -> AppendResult:
        """Atomically append ``su`` iff it is newer than the stream's newest entry."""
        log = self._log(ref)
        with log.lock:
            if log.closed:
                raise NotFound(f"stream {ref} not found")
            if log.admits(su.last_update):
                self._persist_update(log, su)
                log.push(su)
                result = AppendResult.ACCEPTED
            else:
                result = AppendResult.STALE
            if self.append_listener is not None:
                self.append_listener(ref, su, result)
        return result

    def get_last_update(self, ref: StreamRef) -> SensorUpdate | None:
        log = self._log(ref)
        with log.lock:
            if log.closed:
                raise NotFound(f"stream {ref} not found")
            return log.entries[-1] if log.entries else None

    def query_updates(self, ref: StreamRef, from_ts: int | None = None,
                      to_ts: int | None = None) -> list[SensorUpdate]:
        if from_ts is not None and to_ts is not None and from_ts > to_ts:
            raise BadRange(f"from ({from_ts}) is after to ({to_ts})")
        log = self._log(ref)
        with log.lock:
            entries = list(log.entries)
        return [
            su for su in entries
            if (from_ts is None or su.last_update >= from_ts)
            and (to_ts is None or su.last_update <= to_ts)
        ]

    def last_timestamp(self, ref: StreamRef) -> int:
        return self._log(ref).last_timestamp

    # -- subscriptions --------------------------------------------------------

    def _sub_is_live(self, sub: Subscription) -> bool:
        def exists(ref: StreamRef) -> bool:
            so = self._sos.get(ref.so_id)
            return so is not None and ref.stream_id in so.streams

        if not exists(sub.source):
            return False
        if isinstance(sub.kind, InternalTarget):
            so = self._sos.get(sub.kind.target.so_id)
            spec = so.streams.get(sub.kind.target.stream_id) if so else None
            return isinstance(spec, CompositeStream) and sub.kind.alias in spec.sources
        return True

    def add_subscription(self, sub: Subscription) -> Subscription:
        with self._lock:
            if sub.id in self._subs:
                raise Conflict(f"subscription {sub.id} already exists")
            self.stream_spec(sub.source)
            if isinstance(sub.kind, InternalTarget):
                self.stream_spec(sub.kind.target)
            self._persist_sub(sub)
            self._subs[sub.id] = sub
            self._by_source.setdefault(sub.source, {})[sub.id] = sub
        return sub

    def get_subscription(self, sub_id: str) -> Subscription:
        try:
            return self._subs[sub_id]
        except KeyError:
            raise NotFound(f"subscription {sub_id} not found") from None

    def _remove_sub_locked(self, sub_id: str) -> None:
        sub = self._subs.pop(sub_id)
        bucket = self._by_source.get(sub.source)
        if bucket is not None:
            bucket.pop(sub_id, None)
            if not bucket:
                del self._by_source[sub.source]
        self._persist_sub_delete(sub_id)

    def remove_subscription(self, sub_id: str) -> None:
        with self._lock:
            self.get_subscription(sub_id)
            self._remove_sub_locked(sub_id)

    def subscriptions_of(self, source: StreamRef) -> list[Subscription]:
        with self._lock:
            bucket = self._by_source.get(source)
            return list(bucket.values()) if bucket else []

    def list_subscriptions(self) -> list[Subscription]:
        with self._lock:
            return list(self._subs.values())

    def close(self) -> None:
        pass

"""The stream-processing engine.

Tasks on the shared queue are of two kinds. A :class:`WorkItem` is an update
that a stream has just stored; processing it looks up the stream's
subscribers and fans out. A computation task asks one composite stream to
react to a WorkItem; it runs the input, consistency, filter, transform and
store stages of :meth:`Runtime.compute_update`, and a successful result is
queued as a new WorkItem carrying the same trace id.
"""
from __future__ import annotations

import enum
import logging
import os
import threading
import time
import uuid
from collections import Counter, OrderedDict, deque
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from .. import expr
from ..errors import CompositeWrite, MalformedUpdate, NotFound
from ..model import (
    PREVIOUS_ALIAS,
    RESULT_ALIAS,
    ChannelValue,
    CompositeStream,
    ExternalTarget,
    InternalTarget,
    SensorUpdate,
    StreamRef,
    Subscription,
)
from ..store import AppendResult, MemoryStore
from .delivery import Delivery, DeliveryStatus, deliver
from .metrics import MetricsSink, StageTimings
from .queue import TaskQueue

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 65536


class IngestStatus(enum.Enum):
    ACCEPTED = "accepted"
    STALE = "stale"
    QUEUE_FULL = "queue_full"


@dataclass(frozen=True)
class IngestResult:
    status: IngestStatus
    trace_id: str | None = None


class DiscardReason(enum.Enum):
    STALE = "stale"
    INSUFFICIENT_DATA = "insufficient_data"
    PRE_FILTERED = "pre_filtered"
    POST_FILTERED = "post_filtered"
    LOST_RACE = "lost_race"
    CODE_ERROR = "code_error"
    UNRESOLVED = "unresolved"


GATE_REASONS = frozenset({DiscardReason.STALE, DiscardReason.LOST_RACE})


@dataclass(frozen=True)
class Emitted:
    update: SensorUpdate
    consumed: dict[str, int]  # alias -> lastUpdate of every input used


@dataclass(frozen=True)
class Discarded:
    reason: DiscardReason
    detail: str = ""


Outcome = Emitted | Discarded


@dataclass
class WorkItem:
    origin: StreamRef
    update: SensorUpdate
    enqueue_time: int
    trace_id: str
    timings: StageTimings | None = None


@dataclass
class _Computation:
    target: StreamRef
    alias: str
    item: WorkItem
    enqueue_time: int
    emission: _Emission

    @property
    def trace_id(self) -> str:
        return self.item.trace_id


class _Emission:
    """Counts subscriber receipts of one WorkItem to close its output stage."""

    __slots__ = ("item", "remaining", "lock", "sink")

    def __init__(self, item: WorkItem, receipts: int, sink: MetricsSink | None):
        self.item = item
        self.remaining = receipts
        self.lock = threading.Lock()
        self.sink = sink

    def close(self, now: int) -> None:
        t = self.item.timings
        if t is not None:
            t.output_stage_ns = now - self.item.enqueue_time
            if self.sink is not None:
                self.sink.record(t)

    def receipt(self, now: int) -> None:
        with self.lock:
            self.remaining -= 1
            last = self.remaining == 0
        if last:
            self.close(now)


@dataclass
class TraceStats:
    """Everything one external injection caused."""

    trace_id: str
    origin: StreamRef
    start_ns: int
    end_ns: int | None = None
    pending: int = 0
    attempts: int = 0
    emissions: list[StreamRef] = field(default_factory=list)
    discards: Counter = field(default_factory=Counter)
    deliveries: list[Delivery] = field(default_factory=list)
    done: threading.Event = field(default_factory=threading.Event, repr=False)

    @property
    def end_to_end_ns(self) -> int | None:
        return None if self.end_ns is None else self.end_ns - self.start_ns

    @property
    def gate_discards(self) -> int:
        return sum(self.discards[r] for r in GATE_REASONS)


class Runtime:
    """Worker pool executing the data processing pipelines over a store.

    ``workers`` defaults to the machine's available parallelism. Call
    :meth:`start` to launch workers and :meth:`shutdown` to drain and stop.
    ``on_outcome(target, item, outcome)`` is invoked after every computation.
    """

    def __init__(
        self,
        store: MemoryStore,
        *,
        queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
        metrics: MetricsSink | None = None,
        callback_timeout: float = 2.0,
        fetch_workers: int = 8,
        delivery_workers: int = 4,
        trace_history: int = 10_000,
        on_outcome: Callable[[StreamRef, WorkItem, Outcome], None] | None = None,
        http_client: httpx.Client | None = None,
    ):
        self.store = store
        self.metrics = metrics if metrics is not None else MetricsSink()
        self.callback_timeout = callback_timeout
        self.on_outcome = on_outcome
        self.diagnostics: dict[StreamRef, deque[str]] = {}
        self.actions: deque[dict] = deque(maxlen=10_000)
        self.deliveries: deque[Delivery] = deque(maxlen=10_000)
        self._queue = TaskQueue(queue_capacity)
        self._fetch_pool = ThreadPoolExecutor(fetch_workers, "sf-fetch") if fetch_workers > 0 else None
        self._delivery_pool = ThreadPoolExecutor(delivery_workers, "sf-deliver")
        self._http = http_client
        self._owns_http = http_client is None
        self._traces: OrderedDict[str, TraceStats] = OrderedDict()
        self._trace_history = trace_history
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    # -- lifecycle --------------------------------------------------------------

    def start(self, workers: int | None = None) -> Runtime:
        n = workers or os.cpu_count() or 1
        if n < 1:
            raise ValueError("need at least one worker")
        for i in range(n):
            t = threading.Thread(target=self._worker, name=f"sf-worker-{len(self._threads)}", daemon=True)
            t.start()
            self._threads.append(t)
        return self

    @property
    def worker_count(self) -> int:
        return len(self._threads)

    def shutdown(self, timeout: float | None = None) -> bool:
        """Drain queued and in-flight work, then stop. Returns False if the drain timed out."""
        drained = True
        if self._threads:
            drained = self._queue.wait_idle(timeout)
        self._queue.close()
        for t in self._threads:
            t.join(timeout)
        self._threads.clear()
        self._delivery_pool.shutdown(wait=True)
        if self._fetch_pool is not None:
            self._fetch_pool.shutdown(wait=True)
        if self._http is not None and self._owns_http:
            self._http.close()
        return drained

    def __enter__(self) -> Runtime:
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    def wait_quiescent(self, timeout: float | None = None) -> bool:
        return self._queue.wait_idle(timeout)

    @property
    def is_quiescent(self) -> bool:
        return self._queue.unfinished == 0

    @property
    def queued(self) -> int:
        return self._queue.qsize()

    # -- traces -------------------------------------------------------------------

    def trace(self, trace_id: str) -> TraceStats | None:
        with self._lock:
            return self._traces.get(trace_id)

    def wait_trace(self, trace_id: str, timeout: float | None = None) -> TraceStats | None:
        stats = self.trace(trace_id)
        if stats is None or not stats.done.wait(timeout):
            return None
        return stats

    def pop_trace(self, trace_id: str) -> TraceStats | None:
        with self._lock:
            return self._traces.pop(trace_id, None)

    def _open_trace(self, origin: StreamRef, start_ns: int) -> TraceStats:
        stats = TraceStats(uuid.uuid4().hex, origin, start_ns, pending=1)
        with self._lock:
            self._traces[stats.trace_id] = stats
            excess = len(self._traces) - self._trace_history
            if excess > 0:
                for tid in [t for t, s in self._traces.items() if s.end_ns is not None][:excess]:
                    del self._traces[tid]
        return stats

    def _trace_add(self, trace_id: str) -> None:
        with self._lock:
            stats = self._traces.get(trace_id)
            if stats is not None:
                stats.pending += 1

    def _trace_done(self, trace_id: str) -> None:
        now = time.perf_counter_ns()
        with self._lock:
            stats = self._traces.get(trace_id)
            if stats is None:
                return
            stats.pending -= 1
            if stats.pending == 0:
                stats.end_ns = now
                stats.done.set()

    def _trace_outcome(self, trace_id: str, target: StreamRef, outcome: Outcome) -> None:
        with self._lock:
            stats = self._traces.get(trace_id)
            if stats is None:
                return
            stats.attempts += 1
            if isinstance(outcome, Emitted):
                stats.emissions.append(target)
            else:
                stats.discards[outcome.reason] += 1

    def _diagnose(self, ref: StreamRef, message: str) -> None:
        logger.warning("%s: %s", ref, message)
        with self._lock:
            self.diagnostics.setdefault(ref, deque(maxlen=100)).append(message)

    # -- ingestion ----------------------------------------------------------------

    def ingest(self, origin: StreamRef, su: SensorUpdate) -> IngestResult:
        """Gate an external update through the store and queue it for dispatch."""
        start = time.perf_counter_ns()
        spec = self.store.stream_spec(origin)
        if spec.is_composite:
            raise CompositeWrite(f"{origin} is a composite stream; only the pipeline writes it")
        if su.stream_name != origin.stream_id:
            raise MalformedUpdate(f"update names stream '{su.stream_name}', not '{origin.stream_id}'")
        undeclared = sorted({c.name for c in su.channels} - set(spec.channel_names))
        if undeclared:
            raise MalformedUpdate(f"stream {origin} declares no channel '{undeclared[0]}'")
        if not self._queue.try_reserve():
            return IngestResult(IngestStatus.QUEUE_FULL)
        try:
            result = self.store.append_update(origin, su)
        except BaseException:
            self._queue.cancel_reservation()
            raise
        if result is AppendResult.STALE:
            self._queue.cancel_reservation()
            return IngestResult(IngestStatus.STALE)
        stats = self._open_trace(origin, start)
        item = WorkItem(origin, su, time.perf_counter_ns(), stats.trace_id,
                        StageTimings(origin, stats.trace_id, composite=False))
        self._queue.put(item, reserved=True)
        return IngestResult(IngestStatus.ACCEPTED, stats.trace_id)

    def _enqueue(self, task) -> None:
        self._trace_add(task.trace_id)
        self._queue.put(task)

    # -- workers ------------------------------------------------------------------

    def _worker(self) -> None:
        while True:
            task = self._queue.get()
            if task is None:
                return
            try:
                self._run(task)
            except Exception:
                logger.exception("unexpected failure processing %r", task)
            finally:
                self._trace_done(task.trace_id)
                self._queue.task_done()

    def _run(self, task) -> None:
        now = time.perf_counter_ns()
        if isinstance(task, WorkItem):
            if task.timings is not None and not task.timings.composite:
                task.timings.queue_ns = now - task.enqueue_time
            self.dispatch_subscribers(task, now)
            return
        task.emission.receipt(now)
        timings = StageTimings(task.target, task.trace_id, queue_ns=now - task.enqueue_time)
        self.compute_update(task.target, task.item, task.alias, timings=timings)

    def run_pending(self) -> int:
        """Process queued tasks on the calling thread until idle; returns tasks run.

        For tests and single-threaded use without :meth:`start`.
        """
        count = 0
        while self._queue.qsize():
            task = self._queue.get(timeout=0)
            if task is None:
                break
            try:
                self._run(task)
            finally:
                self._trace_done(task.trace_id)
                self._queue.task_done()
            count += 1
        return count

    # -- stage 1: subscriber dispatching ------------------------------------------

    def dispatch_subscribers(self, item: WorkItem, now: int | None = None) -> list[Subscription]:
        """Schedule a computation per internal subscriber and a delivery per callback."""
        now = time.perf_counter_ns() if now is None else now
        subs = self.store.subscriptions_of(item.origin)
        emission = _Emission(item, len(subs), self.metrics)
        if not subs:
            emission.close(now)
            return subs
        for sub in subs:
            if isinstance(sub.kind, InternalTarget):
                self._enqueue(_Computation(sub.kind.target, sub.kind.alias, item,
                                           time.perf_counter_ns(), emission))
            else:
                self._schedule_delivery(sub, item, emission)
        return subs

    def _schedule_delivery(self, sub: Subscription, item: WorkItem, emission: _Emission) -> None:
        self._trace_add(item.trace_id)
        self._queue.hold()

        def run():
            try:
                result = self.deliver_external(sub, item.update)
                with self._lock:
                    stats = self._traces.get(item.trace_id)
                    if stats is not None:
                        stats.deliveries.append(result)
            finally:
                emission.receipt(time.perf_counter_ns())
                self._trace_done(item.trace_id)
                self._queue.release()

        self._delivery_pool.submit(run)

    def deliver_external(self, sub: Subscription, su: SensorUpdate) -> Delivery:
        if not isinstance(sub.kind, ExternalTarget):
            raise TypeError("not an external subscription")
        if self._http is None:
            with self._lock:
                if self._http is None:
                    self._http = httpx.Client()
        try:
            result = deliver(self._http, sub, su, self.callback_timeout)
        except Exception as exc:  # a broken callback must never take down the pipeline
            result = Delivery(sub.id, DeliveryStatus.FAILED, repr(exc))
        self.deliveries.append(result)
        return result

    # -- stages 2-4: fetch, transform and filter, store and emit -------------------

    def _fetch_all(self, refs: list[StreamRef]) -> list[SensorUpdate | None]:
        if self._fetch_pool is None or len(refs) <= 1:
            return [self.store.get_last_update(r) for r in refs]
        futures = [self._fetch_pool.submit(self.store.get_last_update, r) for r in refs]
        return [f.result() for f in futures]

    def compute_update(self, target: StreamRef, item: WorkItem, alias: str | None = None,
                       *, timings: StageTimings | None = None) -> Outcome:
        """React to ``item`` arriving at composite stream ``target``.

        ``alias`` is the operand the item arrived on; when omitted every alias
        bound to ``item.origin`` receives it.
        """
        outcome = self._compute(target, item, alias, timings)
        self._trace_outcome(item.trace_id, target, outcome)
        if self.on_outcome is not None:
            self.on_outcome(target, item, outcome)
        return outcome

    def _compute(self, target: StreamRef, item: WorkItem, alias: str | None,
                 timings: StageTimings | None) -> Outcome:
        t0 = time.perf_counter_ns()
        try:
            so = self.store.get_so(target.so_id)
        except NotFound as exc:
            self._diagnose(target, f"UnknownSource: {exc}")
            return Discarded(DiscardReason.UNRESOLVED, str(exc))
        spec = so.streams.get(target.stream_id)
        if not isinstance(spec, CompositeStream):
            self._diagnose(target, "target is not a composite stream")
            return Discarded(DiscardReason.UNRESOLVED, "not a composite stream")
        if alias is not None:
            if alias not in spec.sources:
                self._diagnose(target, f"UnknownSource: alias '{alias}' not among sources")
                return Discarded(DiscardReason.UNRESOLVED, f"unknown alias {alias}")
            origin_aliases = {alias}
        else:
            origin_aliases = {a for a, ref in spec.sources.items() if ref == item.origin}

        # input stage: our own newest update plus every operand except the one we received
        wanted = [(PREVIOUS_ALIAS, target)]
        wanted += [(a, ref) for a, ref in sorted(spec.sources.items()) if a not in origin_aliases]
        try:
            fetched = self._fetch_all([ref for _, ref in wanted])
        except NotFound as exc:
            self._diagnose(target, f"UnknownSource: {exc}")
            return Discarded(DiscardReason.UNRESOLVED, str(exc))
        t1 = time.perf_counter_ns()
        previous = fetched[0]

        received_ts = item.update.last_update
        if previous is not None and received_ts <= previous.last_update:
            return Discarded(DiscardReason.STALE)

        docs: dict[str, dict] = {}
        consumed: dict[str, int] = {}
        for (a, _), su in zip(wanted, fetched):
            if su is not None:
                docs[a] = su.document
                if a != PREVIOUS_ALIAS:
                    consumed[a] = su.last_update
        for a in origin_aliases:
            docs[a] = item.update.document
            consumed[a] = received_ts
        missing = sorted(spec.referenced_aliases - docs.keys())
        if missing:
            self._diagnose(target, f"no stored data for {', '.join(missing)}")
            return Discarded(DiscardReason.INSUFFICIENT_DATA, ",".join(missing))

        if spec.pre_filter is not None and not self._filter(target, spec.pre_filter, docs):
            return Discarded(DiscardReason.PRE_FILTERED)

        timestamp = max(consumed.values())
        channels = []
        for ch in spec.channels:
            try:
                value = ch.value_expr.evaluate(docs)
                channels.append(ChannelValue.of(ch.name, value, ch.unit))
            except (expr.EvalError, ValueError) as exc:
                self._diagnose(target, f"channel '{ch.name}': {exc}")
                return Discarded(DiscardReason.CODE_ERROR, str(exc))
        candidate = SensorUpdate(target.stream_id, tuple(channels), timestamp)

        post = [ch.post_filter for ch in spec.channels if ch.post_filter is not None]
        if post:
            docs[RESULT_ALIAS] = candidate.document
            if not all(self._filter(target, f, docs) for f in post):
                return Discarded(DiscardReason.POST_FILTERED)
        t2 = time.perf_counter_ns()

        try:
            stored = self.store.append_update(target, candidate)
        except NotFound as exc:
            self._diagnose(target, f"UnknownSource: {exc}")
            return Discarded(DiscardReason.UNRESOLVED, str(exc))
        if stored is AppendResult.STALE:
            return Discarded(DiscardReason.LOST_RACE)

        for action in so.actions:
            record = {"soId": so.id, "action": action, "traceId": item.trace_id, "ts": timestamp}
            self.actions.append(record)
            logger.info("action triggered: %s", record)

        if timings is not None:
            timings.input_stage_ns = t1 - t0
            timings.compute_ns = t2 - t1
            timings.fetches = len(wanted)
        self._enqueue(WorkItem(target, candidate, time.perf_counter_ns(), item.trace_id, timings))
        return Emitted(candidate, consumed)

    def _filter(self, target: StreamRef, f: expr.Expression, docs: dict) -> bool:
        try:
            return f.evaluate_filter(docs)
        except expr.FilterError as exc:
            self._diagnose(target, str(exc))
            return False

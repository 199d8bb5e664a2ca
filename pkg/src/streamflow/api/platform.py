"""Transport-independent platform operations used by the HTTP layer and the benchmark."""
from __future__ import annotations

from collections.abc import Mapping
from typing import Any

from ..errors import MalformedSubscription
from ..model import (
    CompositeStream,
    InternalTarget,
    SensorUpdate,
    ServiceObjectDescriptor,
    StreamRef,
    Subscription,
    new_subscription_id,
    now_ms,
    resolve_bindings,
    validate_descriptor,
)
from ..runtime import IngestResult, Runtime
from ..store import MemoryStore


class Platform:
    """Service-object registry, data ingestion and subscriptions over one store and runtime."""

    def __init__(self, store: MemoryStore, runtime: Runtime):
        self.store = store
        self.runtime = runtime

    # -- service objects --------------------------------------------------------

    def _resolve(self, d: ServiceObjectDescriptor) -> None:
        def lookup(so_id: str) -> ServiceObjectDescriptor | None:
            if so_id == d.id:
                return d
            return self.store.get_so(so_id)

        for spec in d.streams.values():
            if isinstance(spec, CompositeStream):
                resolve_bindings(spec, lookup)

    def _wire(self, d: ServiceObjectDescriptor) -> None:
        """Make the internal subscriptions match the composite streams' sources."""
        wanted: set[tuple[StreamRef, StreamRef, str]] = set()
        for spec in d.streams.values():
            if isinstance(spec, CompositeStream):
                target = StreamRef(d.id, spec.name)
                wanted |= {(ref, target, alias) for alias, ref in spec.sources.items()}
        for sub in self.store.list_subscriptions():
            if isinstance(sub.kind, InternalTarget) and sub.kind.target.so_id == d.id:
                key = (sub.source, sub.kind.target, sub.kind.alias)
                if key in wanted:
                    wanted.discard(key)
                else:
                    self.store.remove_subscription(sub.id)
        for source, target, alias in sorted(wanted):
            self.store.add_subscription(
                Subscription(new_subscription_id(), source, InternalTarget(target, alias))
            )

    def create_so(self, doc: Any) -> ServiceObjectDescriptor:
        d = validate_descriptor(doc)
        self._resolve(d)
        self.store.create_so(d)
        self._wire(d)
        return d

    def get_so(self, so_id: str) -> ServiceObjectDescriptor:
        return self.store.get_so(so_id)

    def list_sos(self) -> list[ServiceObjectDescriptor]:
        return self.store.list_sos()

    def update_so(self, so_id: str, doc: Any) -> ServiceObjectDescriptor:
        prev = self.store.get_so(so_id)
        # updatedAt must move forward even when two writes land in the same millisecond
        d = validate_descriptor(doc, so_id=so_id, created_at=prev.created_at,
                                clock=lambda: max(now_ms(), prev.updated_at + 1))
        self._resolve(d)
        self.store.update_so(so_id, d)
        self._wire(d)
        return d

    def delete_so(self, so_id: str) -> None:
        self.store.delete_so(so_id)

    def streams_document(self, so_id: str) -> dict:
        return self.store.get_so(so_id).streams_document()

    # -- data -------------------------------------------------------------------

    def put_data(self, so_id: str, stream_id: str, doc: Any) -> IngestResult:
        ref = StreamRef(so_id, stream_id)
        self.store.stream_spec(ref)
        su = SensorUpdate.from_document(doc, stream_name=stream_id)
        return self.runtime.ingest(ref, su)

    def query(self, so_id: str, stream_id: str, from_ts: int | None = None,
              to_ts: int | None = None) -> list[SensorUpdate]:
        return self.store.query_updates(StreamRef(so_id, stream_id), from_ts, to_ts)

    # -- subscriptions ----------------------------------------------------------

    def create_subscription(self, so_id: str, stream_id: str, doc: Any) -> Subscription:
        source = StreamRef(so_id, stream_id)
        self.store.stream_spec(source)
        if isinstance(doc, Mapping):
            doc = {k: v for k, v in doc.items() if k not in ("id", "source")}
        sub = Subscription.from_document(doc, source=source)
        if isinstance(sub.kind, InternalTarget):
            target = sub.kind.target
            spec = self.store.stream_spec(target)
            if not isinstance(spec, CompositeStream):
                raise MalformedSubscription(f"internal target {target} is not a composite stream")
            bound = spec.sources.get(sub.kind.alias)
            if bound is None:
                raise MalformedSubscription(
                    f"alias '{sub.kind.alias}' is not among the sources of {target}")
            if bound != source:
                raise MalformedSubscription(
                    f"alias '{sub.kind.alias}' of {target} is bound to {bound}, not {source}")
            for existing in self.store.subscriptions_of(source):
                if existing.kind == sub.kind:
                    return existing
        return self.store.add_subscription(sub)

    def get_subscription(self, sub_id: str) -> Subscription:
        return self.store.get_subscription(sub_id)

    def delete_subscription(self, sub_id: str) -> None:
        self.store.remove_subscription(sub_id)

    def subscriptions(self, so_id: str, stream_id: str) -> list[Subscription]:
        ref = StreamRef(so_id, stream_id)
        self.store.stream_spec(ref)
        return self.store.subscriptions_of(ref)


"""Domain types and their JSON document forms.

Field names on the wire follow the platform's published documents:
``current-value``, ``lastUpdate``, ``customFields``, ``post-filter``,
``callbackUrl`` and so on. Everything here is an immutable value; the
functions are pure apart from the id and clock sources passed to
:func:`validate_descriptor`.
"""
from __future__ import annotations

import copy
import math
import re
import secrets
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Union
from urllib.parse import urlparse

from . import expr
from .errors import (
    DanglingAlias,
    ExpressionSyntaxError,
    MalformedDescriptor,
    MalformedSubscription,
    MalformedUpdate,
    NotFound,
    UnknownSource,
)

RESULT_ALIAS = "result"
PREVIOUS_ALIAS = "previous"
RESERVED_ALIASES = frozenset({RESULT_ALIAS, PREVIOUS_ALIAS})
VALUE_TYPES = ("numeric", "boolean", "string", "array")
CALLBACK_METHODS = ("POST", "PUT")

_ALIAS_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def now_ms() -> int:
    return time.time_ns() // 1_000_000


def new_so_id() -> str:
    return secrets.token_hex(20)


def new_subscription_id() -> str:
    return secrets.token_hex(16)


@dataclass(frozen=True, order=True)
class StreamRef:
    so_id: str
    stream_id: str

    def __post_init__(self):
        if not isinstance(self.so_id, str) or not self.so_id:
            raise ValueError("StreamRef.so_id must be a non-empty string")
        if not isinstance(self.stream_id, str) or not self.stream_id:
            raise ValueError("StreamRef.stream_id must be a non-empty string")

    def __str__(self) -> str:
        return f"{self.so_id}/{self.stream_id}"

    def to_document(self) -> dict:
        return {"soId": self.so_id, "streamId": self.stream_id}

    @classmethod
    def from_document(cls, doc: Any) -> StreamRef:
        if not isinstance(doc, Mapping):
            raise ValueError("stream reference must be an object with soId and streamId")
        return cls(doc.get("soId"), doc.get("streamId"))


# -- sensor updates ---------------------------------------------------------


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def infer_value_type(value: Any) -> str:
    """Return the channel value tag for ``value`` or raise ``ValueError``."""
    if isinstance(value, bool):
        return "boolean"
    if _is_number(value):
        return "numeric"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (list, tuple)):
        kinds = {infer_value_type(v) for v in value}
        if "array" in kinds:
            raise ValueError("nested arrays are not channel values")
        if len(kinds) > 1:
            raise ValueError("array channel values must be homogeneous")
        return "array"
    raise ValueError(f"unsupported channel value {value!r}")


@dataclass(frozen=True)
class ChannelValue:
    name: str
    current_value: Any
    value_type: str
    unit: str | None = None

    def __post_init__(self):
        if infer_value_type(self.current_value) != self.value_type:
            raise ValueError(
                f"channel '{self.name}': type '{self.value_type}' does not match value "
                f"{self.current_value!r}"
            )

    @classmethod
    def of(cls, name: str, value: Any, unit: str | None = None) -> ChannelValue:
        if isinstance(value, tuple):
            value = list(value)
        return cls(name, value, infer_value_type(value), unit)

    def to_document(self) -> dict:
        doc = {"name": self.name, "current-value": copy.copy(self.current_value),
               "type": self.value_type}
        if self.unit is not None:
            doc["unit"] = self.unit
        return doc


@dataclass(frozen=True)
class SensorUpdate:
    stream_name: str
    channels: tuple[ChannelValue, ...]
    last_update: int
    custom_fields: Mapping[str, Any] | None = field(default=None, compare=True)

    def __post_init__(self):
        if not self.channels:
            raise ValueError("a sensor update needs at least one channel")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique within an update")
        if isinstance(self.last_update, bool) or not isinstance(self.last_update, int):
            raise ValueError("lastUpdate must be an integer")
        if self.last_update < 0:
            raise ValueError("lastUpdate must be >= 0")

    def channel(self, name: str) -> ChannelValue | None:
        return next((c for c in self.channels if c.name == name), None)

    @cached_property
    def document(self) -> dict:
        """Read-only wire form, shared; use :meth:`to_document` for a private copy."""
        doc: dict[str, Any] = {
            "channels": [c.to_document() for c in self.channels],
            "name": self.stream_name,
            "lastUpdate": self.last_update,
        }
        if self.custom_fields is not None:
            doc["customFields"] = dict(self.custom_fields)
        return doc

    def to_document(self) -> dict:
        return copy.deepcopy(self.document)

    @classmethod
    def from_document(cls, doc: Any, stream_name: str | None = None) -> SensorUpdate:
        """Parse an update; ``stream_name`` fills in or cross-checks ``name``."""
        if not isinstance(doc, Mapping):
            raise MalformedUpdate("sensor update must be a JSON object")
        name = doc.get("name", stream_name)
        if stream_name is not None and name != stream_name:
            raise MalformedUpdate(f"update names stream '{name}' but was sent to '{stream_name}'")
        if not isinstance(name, str) or not name:
            raise MalformedUpdate("sensor update needs a stream 'name'")
        raw_channels = doc.get("channels")
        if not isinstance(raw_channels, list) or not raw_channels:
            raise MalformedUpdate("'channels' must be a non-empty list")
        channels = []
        for raw in raw_channels:
            if not isinstance(raw, Mapping) or not isinstance(raw.get("name"), str):
                raise MalformedUpdate("each channel needs a string 'name'")
            if "current-value" not in raw:
                raise MalformedUpdate(f"channel '{raw['name']}' has no 'current-value'")
            unit = raw.get("unit")
            if unit is not None and not isinstance(unit, str):
                raise MalformedUpdate(f"channel '{raw['name']}': unit must be a string")
            try:
                value_type = raw.get("type") or infer_value_type(raw["current-value"])
                channels.append(ChannelValue(raw["name"], raw["current-value"], value_type, unit))
            except ValueError as exc:
                raise MalformedUpdate(str(exc)) from None
        custom = doc.get("customFields")
        if custom is not None:
            if not isinstance(custom, Mapping) or not all(
                isinstance(k, str) and (v is None or isinstance(v, (str, bool)) or _is_number(v))
                for k, v in custom.items()
            ):
                raise MalformedUpdate("'customFields' must be a flat object of scalar values")
            custom = dict(custom)
        last = doc.get("lastUpdate")
        try:
            return cls(name, tuple(channels), last, custom)
        except ValueError as exc:
            raise MalformedUpdate(str(exc)) from None


# -- service object descriptors --------------------------------------------


@dataclass(frozen=True)
class ChannelDecl:
    name: str
    type: str | None = None
    unit: str | None = None


@dataclass(frozen=True)
class SimpleStream:
    name: str
    channels: tuple[ChannelDecl, ...]
    description: str | None = None

    is_composite = False

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]


@dataclass(frozen=True)
class CompositeChannel:
    name: str
    value_expr: expr.Expression
    post_filter: expr.Expression | None = None
    type: str | None = None
    unit: str | None = None


@dataclass(frozen=True)
class CompositeStream:
    name: str
    channels: tuple[CompositeChannel, ...]
    sources: Mapping[str, StreamRef]
    pre_filter: expr.Expression | None = None
    description: str | None = None

    is_composite = True

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    @cached_property
    def referenced_aliases(self) -> frozenset[str]:
        """Aliases whose data any expression needs (``result`` excluded)."""
        found: set[str] = set()
        for ch in self.channels:
            found |= ch.value_expr.aliases
            if ch.post_filter is not None:
                found |= ch.post_filter.aliases
        if self.pre_filter is not None:
            found |= self.pre_filter.aliases
        found.discard(RESULT_ALIAS)
        return frozenset(found)


StreamSpec = Union[SimpleStream, CompositeStream]


@dataclass(frozen=True)
class ServiceObjectDescriptor:
    id: str
    name: str
    description: str
    created_at: int
    updated_at: int
    streams: Mapping[str, StreamSpec]
    actions: tuple[str, ...] = ()

    def stream(self, stream_id: str) -> StreamSpec | None:
        return self.streams.get(stream_id)

    def summary_document(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "createdAt": self.created_at,
            "updatedAt": self.updated_at,
            "description": self.description,
            "streams": list(self.streams),
            "actions": list(self.actions),
        }

    def streams_document(self) -> dict:
        out = []
        for spec in self.streams.values():
            entry: dict[str, Any] = {"name": spec.name, "channels": spec.channel_names}
            if spec.description is not None:
                entry["description"] = spec.description
            out.append(entry)
        return {"streams": out}

    def to_document(self) -> dict:
        """Full document, the inverse of :func:`descriptor_from_document`."""
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "createdAt": self.created_at,
            "updatedAt": self.updated_at,
            "streams": [_stream_to_document(s) for s in self.streams.values()],
            "actions": list(self.actions),
        }


def _stream_to_document(spec: StreamSpec) -> dict:
    doc: dict[str, Any] = {"name": spec.name}
    channels = []
    for ch in spec.channels:
        c: dict[str, Any] = {"name": ch.name}
        if isinstance(ch, CompositeChannel):
            c["current-value"] = ch.value_expr.source
            if ch.post_filter is not None:
                c["post-filter"] = ch.post_filter.source
        if ch.type is not None:
            c["type"] = ch.type
        if ch.unit is not None:
            c["unit"] = ch.unit
        channels.append(c)
    doc["channels"] = channels
    if isinstance(spec, CompositeStream):
        doc["sources"] = {alias: ref.to_document() for alias, ref in spec.sources.items()}
        if spec.pre_filter is not None:
            doc["pre-filter"] = spec.pre_filter.source
    if spec.description is not None:
        doc["description"] = spec.description
    return doc


def _named_items(raw: Any, what: str) -> list[tuple[str, Mapping]]:
    """Accept either ``[{"name": n, ...}]`` or ``{n: {...}}`` and return pairs."""
    if raw is None:
        return []
    items: list[tuple[str, Mapping]] = []
    if isinstance(raw, Mapping):
        for name, body in raw.items():
            if body is None:
                body = {}
            if not isinstance(body, Mapping):
                raise MalformedDescriptor(f"{what} '{name}' must be an object")
            if "name" in body and body["name"] != name:
                raise MalformedDescriptor(f"{what} key '{name}' disagrees with its name field")
            items.append((name, body))
    elif isinstance(raw, list):
        for body in raw:
            if isinstance(body, str):
                body = {"name": body}
            if not isinstance(body, Mapping):
                raise MalformedDescriptor(f"each {what} must be an object")
            items.append((body.get("name"), body))
    else:
        raise MalformedDescriptor(f"'{what}s' must be a list or an object")
    seen = set()
    for name, _ in items:
        if not isinstance(name, str) or not name:
            raise MalformedDescriptor(f"every {what} needs a non-empty name")
        if name in seen:
            raise MalformedDescriptor(f"duplicate {what} name '{name}'")
        seen.add(name)
    return items


def _opt_str(body: Mapping, key: str, what: str) -> str | None:
    value = body.get(key)
    if value is not None and not isinstance(value, str):
        raise MalformedDescriptor(f"{what}: '{key}' must be a string")
    return value


def _parse_expr(text: Any, stream: str, channel: str | None, key: str) -> expr.Expression:
    if not isinstance(text, str):
        raise MalformedDescriptor(f"stream '{stream}': '{key}' must be an expression string")
    try:
        return expr.parse(text)
    except expr.ExprSyntaxError as exc:
        raise ExpressionSyntaxError(stream, channel, exc.offset, f"{key}: {exc.detail}") from None


def _parse_sources(raw: Any, stream: str, owner_id: str) -> dict[str, StreamRef]:
    if not isinstance(raw, Mapping) or not raw:
        raise MalformedDescriptor(f"composite stream '{stream}' needs a non-empty 'sources' map")
    sources = {}
    for alias, ref in raw.items():
        if not isinstance(alias, str) or not _ALIAS_RE.match(alias):
            raise MalformedDescriptor(f"stream '{stream}': invalid source alias {alias!r}")
        if alias in RESERVED_ALIASES:
            raise MalformedDescriptor(f"stream '{stream}': alias '{alias}' is reserved")
        if not isinstance(ref, Mapping):
            raise MalformedDescriptor(f"stream '{stream}': source '{alias}' must be an object")
        # an omitted soId means a stream of the same service object
        try:
            sources[alias] = StreamRef(ref.get("soId", owner_id), ref.get("streamId"))
        except ValueError as exc:
            raise MalformedDescriptor(f"stream '{stream}', source '{alias}': {exc}") from None
    return sources


def _check_aliases(e: expr.Expression, allowed: set[str], stream: str, channel: str | None):
    dangling = sorted(e.aliases - allowed)
    if dangling:
        where = f"stream '{stream}'" + (f", channel '{channel}'" if channel else "")
        raise DanglingAlias(f"{where}: expression references unknown alias '{dangling[0]}'")


def _parse_stream(name: str, body: Mapping, owner_id: str) -> StreamSpec:
    description = _opt_str(body, "description", f"stream '{name}'")
    channels = _named_items(body.get("channels"), "channel")
    composite = (
        "sources" in body
        or "pre-filter" in body
        or any("current-value" in ch for _, ch in channels)
    )
    if not composite:
        if not channels:
            raise MalformedDescriptor(f"simple stream '{name}' must declare at least one channel")
        return SimpleStream(
            name,
            tuple(
                ChannelDecl(cn, _opt_str(cb, "type", cn), _opt_str(cb, "unit", cn))
                for cn, cb in channels
            ),
            description,
        )

    sources = _parse_sources(body.get("sources"), name, owner_id)
    if not channels:
        raise MalformedDescriptor(f"composite stream '{name}' must declare at least one channel")
    base = set(sources) | {PREVIOUS_ALIAS}
    pre_filter = None
    if body.get("pre-filter") is not None:
        pre_filter = _parse_expr(body["pre-filter"], name, None, "pre-filter")
        _check_aliases(pre_filter, base, name, None)
    parsed = []
    for cn, cb in channels:
        if "current-value" not in cb:
            raise MalformedDescriptor(f"composite stream '{name}': channel '{cn}' has no 'current-value'")
        value_expr = _parse_expr(cb["current-value"], name, cn, "current-value")
        _check_aliases(value_expr, base, name, cn)
        post = None
        if cb.get("post-filter") is not None:
            post = _parse_expr(cb["post-filter"], name, cn, "post-filter")
            _check_aliases(post, base | {RESULT_ALIAS}, name, cn)
        parsed.append(
            CompositeChannel(cn, value_expr, post, _opt_str(cb, "type", cn), _opt_str(cb, "unit", cn))
        )
    return CompositeStream(name, tuple(parsed), sources, pre_filter, description)


def _parse_streams(raw: Any, owner_id: str) -> dict[str, StreamSpec]:
    return {name: _parse_stream(name, body, owner_id) for name, body in _named_items(raw, "stream")}


def _parse_actions(raw: Any) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise MalformedDescriptor("'actions' must be a list")
    names = []
    for a in raw:
        if isinstance(a, Mapping):
            a = a.get("name")
        if not isinstance(a, str) or not a:
            raise MalformedDescriptor("every action needs a non-empty name")
        names.append(a)
    if len(set(names)) != len(names):
        raise MalformedDescriptor("duplicate action name")
    return tuple(names)


def validate_descriptor(
    doc: Any,
    *,
    so_id: str | None = None,
    created_at: int | None = None,
    id_factory: Callable[[], str] = new_so_id,
    clock: Callable[[], int] = now_ms,
) -> ServiceObjectDescriptor:
    """Validate a candidate descriptor and stamp it with an id and timestamps.

    ``so_id``/``created_at`` are given when replacing an existing object;
    otherwise a fresh id is drawn and ``createdAt == updatedAt == clock()``.
    """
    if not isinstance(doc, Mapping):
        raise MalformedDescriptor("service object descriptor must be a JSON object")
    so_id = so_id or id_factory()
    name = _opt_str(doc, "name", "service object") or ""
    description = _opt_str(doc, "description", "service object") or ""
    streams = _parse_streams(doc.get("streams"), so_id)
    actions = _parse_actions(doc.get("actions"))
    now = clock()
    return ServiceObjectDescriptor(
        so_id, name, description, now if created_at is None else created_at, now, streams, actions
    )


def descriptor_from_document(doc: Mapping) -> ServiceObjectDescriptor:
    """Rebuild a stored descriptor (id and timestamps taken from the document)."""
    try:
        so_id, created, updated = doc["id"], doc["createdAt"], doc["updatedAt"]
    except (KeyError, TypeError):
        raise MalformedDescriptor("stored descriptor lacks id/createdAt/updatedAt") from None
    d = validate_descriptor(doc, so_id=so_id, created_at=created, clock=lambda: updated)
    return d


def resolve_bindings(
    spec: CompositeStream, lookup: Callable[[str], ServiceObjectDescriptor | None]
) -> list[tuple[str, StreamRef]]:
    """Check every source alias names a live stream; sorted by alias."""
    out = []
    for alias in sorted(spec.sources):
        ref = spec.sources[alias]
        try:
            so = lookup(ref.so_id)
        except NotFound:
            so = None
        if so is None or ref.stream_id not in so.streams:
            raise UnknownSource(f"source '{alias}' -> {ref} does not exist")
        out.append((alias, ref))
    return out


# -- subscriptions ----------------------------------------------------------


@dataclass(frozen=True)
class InternalTarget:
    target: StreamRef
    alias: str


@dataclass(frozen=True)
class ExternalTarget:
    callback_url: str
    method: str = "POST"


@dataclass(frozen=True)
class Subscription:
    id: str
    source: StreamRef
    kind: InternalTarget | ExternalTarget

    @property
    def is_internal(self) -> bool:
        return isinstance(self.kind, InternalTarget)

    def to_document(self) -> dict:
        doc: dict[str, Any] = {"id": self.id, "source": self.source.to_document()}
        if isinstance(self.kind, InternalTarget):
            doc.update(type="internal", target=self.kind.target.to_document(), alias=self.kind.alias)
        else:
            doc.update(type="http.callback", callbackUrl=self.kind.callback_url,
                       method=self.kind.method)
        return doc

    @classmethod
    def from_document(cls, doc: Any, source: StreamRef | None = None,
                      sub_id: str | None = None) -> Subscription:
        """Parse a subscription; request bodies omit ``id`` and ``source``."""
        if not isinstance(doc, Mapping):
            raise MalformedSubscription("subscription must be a JSON object")
        try:
            source = source or StreamRef.from_document(doc.get("source"))
        except ValueError as exc:
            raise MalformedSubscription(f"bad source: {exc}") from None
        sub_id = sub_id or doc.get("id") or new_subscription_id()
        kind = doc.get("type")
        if kind == "http.callback":
            url, method = doc.get("callbackUrl"), doc.get("method", "POST")
            parsed = urlparse(url) if isinstance(url, str) else None
            if parsed is None or parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise MalformedSubscription("http.callback needs an http(s) 'callbackUrl'")
            if not isinstance(method, str) or method.upper() not in CALLBACK_METHODS:
                raise MalformedSubscription(f"callback method must be one of {CALLBACK_METHODS}")
            return cls(sub_id, source, ExternalTarget(url, method.upper()))
        if kind == "internal":
            alias = doc.get("alias")
            if not isinstance(alias, str) or not alias:
                raise MalformedSubscription("internal subscription needs an 'alias'")
            try:
                target = StreamRef.from_document(doc.get("target"))
            except ValueError as exc:
                raise MalformedSubscription(f"bad target: {exc}") from None
            return cls(sub_id, source, InternalTarget(target, alias))
        raise MalformedSubscription(f"unknown subscription type {kind!r}")

"""Durable backend: append-only JSON-lines files.

Layout::

    <root>/registry.jsonl                   service object and subscription events
    <root>/streams/<soId>.<streamId>.jsonl  one update document per line

Loading keeps the longest valid prefix of each file; a torn trailing line left
by a crash is truncated away before new appends.
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from urllib.parse import quote

from ..errors import StreamflowError
from ..model import SensorUpdate, ServiceObjectDescriptor, StreamRef, Subscription, descriptor_from_document
from .memory import MemoryStore, StreamLog

logger = logging.getLogger(__name__)


def _valid_prefix(path: Path) -> list[dict]:
    """Parse complete lines, truncating the file at the first bad one."""
    docs = []
    good = 0
    with open(path, "rb") as fh:
        data = fh.read()
    for line in data.splitlines(keepends=True):
        if not line.endswith(b"\n"):
            break
        try:
            doc = json.loads(line)
        except ValueError:
            break
        docs.append(doc)
        good += len(line)
    if good < len(data):
        logger.warning("truncating %s: discarding %d trailing bytes", path, len(data) - good)
        with open(path, "r+b") as fh:
            fh.truncate(good)
    return docs


class FileStore(MemoryStore):
    def __init__(self, root: str | os.PathLike, max_entries: int | None = None, fsync: bool = False):
        super().__init__(max_entries)
        self.root = Path(root)
        self.fsync = fsync
        (self.root / "streams").mkdir(parents=True, exist_ok=True)
        self._registry_path = self.root / "registry.jsonl"
        self._handles: dict[StreamRef, object] = {}
        self._loading = True
        self._load()
        self._loading = False
        self._registry = open(self._registry_path, "a", encoding="utf-8")

    def _stream_path(self, ref: StreamRef) -> Path:
        return self.root / "streams" / f"{quote(ref.so_id, safe='')}.{quote(ref.stream_id, safe='')}.jsonl"

    def _load(self) -> None:
        if self._registry_path.exists():
            for event in _valid_prefix(self._registry_path):
                try:
                    self._replay(event)
                except (StreamflowError, KeyError, TypeError, ValueError) as exc:
                    logger.warning("skipping registry event %r: %s", event.get("op"), exc)
        for so in list(self._sos.values()):
            for stream_id in so.streams:
                ref = StreamRef(so.id, stream_id)
                path = self._stream_path(ref)
                if path.exists():
                    log = self._log(ref)
                    for doc in _valid_prefix(path):
                        su = SensorUpdate.from_document(doc)
                        if log.admits(su.last_update):
                            log.push(su)

    def _replay(self, event: dict) -> None:
        op = event["op"]
        if op == "so":
            d = descriptor_from_document(event["doc"])
            if d.id in self._sos:
                self.update_so(d.id, d)
            else:
                self.create_so(d)
        elif op == "so-delete":
            self.delete_so(event["id"])
        elif op == "sub":
            self.add_subscription(Subscription.from_document(event["doc"]))
        elif op == "sub-delete":
            self.remove_subscription(event["id"])
        else:
            raise ValueError(f"unknown registry op {op!r}")

    def _write_event(self, event: dict) -> None:
        if self._loading:
            return
        self._registry.write(json.dumps(event, separators=(",", ":")) + "\n")
        self._registry.flush()
        if self.fsync:
            os.fsync(self._registry.fileno())

    def _persist_so(self, d: ServiceObjectDescriptor) -> None:
        self._write_event({"op": "so", "doc": d.to_document()})

    def _persist_so_delete(self, so_id: str) -> None:
        self._write_event({"op": "so-delete", "id": so_id})

    def _persist_sub(self, s: Subscription) -> None:
        self._write_event({"op": "sub", "doc": s.to_document()})

    def _persist_sub_delete(self, sub_id: str) -> None:
        self._write_event({"op": "sub-delete", "id": sub_id})

    def _persist_update(self, log: StreamLog, su: SensorUpdate) -> None:
        fh = self._handles.get(log.ref)
        if fh is None:
            fh = self._handles[log.ref] = open(self._stream_path(log.ref), "a", encoding="utf-8")
        fh.write(json.dumps(su.document, separators=(",", ":")) + "\n")
        fh.flush()
        if self.fsync:
            os.fsync(fh.fileno())

    def _drop_log(self, log: StreamLog) -> None:
        with log.lock:
            log.closed = True
            fh = self._handles.pop(log.ref, None)
            if fh is not None:
                fh.close()
            if not self._loading:
                self._stream_path(log.ref).unlink(missing_ok=True)

    def close(self) -> None:
        with self._lock:
            for fh in self._handles.values():
                fh.close()
            self._handles.clear()
            self._registry.close()

"""HTTP front-end: JSON in, JSON out, one route per platform operation."""
from __future__ import annotations

import json
import logging
import os
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..errors import (
    BadRange,
    CompositeWrite,
    Conflict,
    MalformedDescriptor,
    MalformedSubscription,
    MalformedUpdate,
    NotFound,
    StreamflowError,
)
from ..runtime import IngestStatus, MetricsSink, Runtime
from ..store import open_store
from .platform import Platform

logger = logging.getLogger(__name__)

STATUS = {
    NotFound: 404,
    Conflict: 409,
    CompositeWrite: 409,
}


@dataclass
class ApiConfig:
    bind: str = "127.0.0.1:8080"
    workers: int = os.cpu_count() or 1
    queue_capacity: int = 65536
    store_root: str | None = None
    callback_timeout_ms: int = 2000

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.queue_capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        if self.callback_timeout_ms < 1:
            raise ValueError("callback timeout must be >= 1 ms")
        host, sep, port = self.bind.rpartition(":")
        if not sep or not host or not port.isdigit():
            raise ValueError(f"bind address must be host:port, got {self.bind!r}")

    @property
    def host(self) -> str:
        return self.bind.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.bind.rpartition(":")[2])

    def build_platform(self) -> Platform:
        store = open_store(self.store_root)
        runtime = Runtime(store, queue_capacity=self.queue_capacity, metrics=MetricsSink(),
                          callback_timeout=self.callback_timeout_ms / 1000)
        return Platform(store, runtime)


def status_for(exc: StreamflowError) -> int:
    for cls in type(exc).__mro__:
        if cls in STATUS:
            return STATUS[cls]
    return 400


def error_body(code: str, message: str) -> dict:
    return {"error": code, "message": message}


async def json_body(request: Request):
    raw = await request.body()
    try:
        return json.loads(raw) if raw.strip() else None
    except (ValueError, UnicodeDecodeError) as exc:
        return _BadJson(str(exc))


class _BadJson:
    def __init__(self, detail: str):
        self.detail = detail


def _require(body, error: type[StreamflowError]):
    if isinstance(body, _BadJson):
        raise error(f"request body is not valid JSON: {body.detail}")
    if not isinstance(body, dict):
        raise error("request body must be a JSON object")
    return body


def _parse_ts(raw: str | None, name: str) -> int | None:
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise BadRange(f"'{name}' must be an integer number of milliseconds") from None


def create_app(platform: Platform | None = None, config: ApiConfig | None = None) -> FastAPI:
    """Build the application. The runtime's workers start with the app and drain on shutdown."""
    config = config or ApiConfig()
    platform = platform or config.build_platform()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        started = platform.runtime.worker_count == 0
        if started:
            platform.runtime.start(config.workers)
        try:
            yield
        finally:
            if started:
                platform.runtime.shutdown(timeout=10)
                platform.store.close()

    app = FastAPI(title="streamflow", lifespan=lifespan, openapi_url=None, docs_url=None,
                  redoc_url=None)
    app.state.platform = platform

    @app.exception_handler(StreamflowError)
    async def _domain_error(request: Request, exc: StreamflowError):
        return JSONResponse(error_body(exc.code, str(exc)), status_code=status_for(exc))

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(error_body("BadRequest", str(exc)), status_code=400)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(error_body("BadRequest", str(exc)), status_code=400)

    @app.get("/")
    def list_sos():
        return [d.summary_document() for d in platform.list_sos()]

    @app.post("/", status_code=201)
    def create_so(body=Depends(json_body)):
        d = platform.create_so(_require(body, MalformedDescriptor))
        return d.summary_document()

    # registered before /{soId} so the literal path wins
    @app.get("/subscriptions/{sub_id}")
    def get_subscription(sub_id: str):
        return platform.get_subscription(sub_id).to_document()

    @app.delete("/subscriptions/{sub_id}")
    def delete_subscription(sub_id: str):
        platform.delete_subscription(sub_id)
        return {"id": sub_id, "deleted": True}

    @app.get("/{so_id}")
    def get_so(so_id: str):
        return platform.get_so(so_id).summary_document()

    @app.put("/{so_id}")
    def update_so(so_id: str, body=Depends(json_body)):
        platform.get_so(so_id)
        d = platform.update_so(so_id, _require(body, MalformedDescriptor))
        return d.summary_document()

    @app.delete("/{so_id}")
    def delete_so(so_id: str):
        platform.delete_so(so_id)
        return {"id": so_id, "deleted": True}

    @app.get("/{so_id}/streams")
    def get_streams(so_id: str):
        return platform.streams_document(so_id)

    @app.put("/{so_id}/streams/{stream_id}")
    def put_data(so_id: str, stream_id: str, body=Depends(json_body)):
        platform.get_so(so_id)
        result = platform.put_data(so_id, stream_id, _require(body, MalformedUpdate))
        if result.status is IngestStatus.QUEUE_FULL:
            return JSONResponse(error_body("QueueFull", "ingestion queue is full, retry later"),
                                status_code=503)
        if result.status is IngestStatus.STALE:
            return {"accepted": False, "reason": "stale"}
        return {"accepted": True, "traceId": result.trace_id}

    @app.get("/{so_id}/streams/{stream_id}")
    def query_data(so_id: str, stream_id: str, request: Request):
        params = request.query_params
        data = platform.query(so_id, stream_id, _parse_ts(params.get("from"), "from"),
                              _parse_ts(params.get("to"), "to"))
        return {"data": [su.document for su in data]}

    @app.post("/{so_id}/streams/{stream_id}/subscriptions", status_code=201)
    def create_subscription(so_id: str, stream_id: str, body=Depends(json_body)):
        sub = platform.create_subscription(so_id, stream_id, _require(body, MalformedSubscription))
        return {"id": sub.id}

    @app.get("/{so_id}/streams/{stream_id}/subscriptions")
    def list_subscriptions(so_id: str, stream_id: str):
        return {"subscriptions": [s.to_document() for s in platform.subscriptions(so_id, stream_id)]}

    return app

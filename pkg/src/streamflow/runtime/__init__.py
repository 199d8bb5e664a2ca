"""Concurrent dispatch runtime: queue, workers, pipelines and callback delivery."""
from __future__ import annotations

from .delivery import Delivery, DeliveryStatus, deliver
from .engine import (
    GATE_REASONS,
    Discarded,
    DiscardReason,
    Emitted,
    IngestResult,
    IngestStatus,
    Outcome,
    Runtime,
    TraceStats,
    WorkItem,
)
from .metrics import CSV_FIELDS, MetricsSink, StageTimings
from .queue import TaskQueue

__all__ = [
    "CSV_FIELDS",
    "GATE_REASONS",
    "Delivery",
    "DeliveryStatus",
    "DiscardReason",
    "Discarded",
    "Emitted",
    "IngestResult",
    "IngestStatus",
    "MetricsSink",
    "Outcome",
    "Runtime",
    "StageTimings",
    "TaskQueue",
    "TraceStats",
    "WorkItem",
    "deliver",
]

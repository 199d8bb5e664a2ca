from __future__ import annotations

import csv
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from ..model import StreamRef

CSV_FIELDS = ("traceId", "stream", "queueNs", "inputStageNs", "computeNs", "outputStageNs")


@dataclass
class StageTimings:
    """Per-stream stage durations for one emission, in nanoseconds.

    ``composite`` is False for records of source streams, which only have a
    queue and an output stage. ``fetches`` counts stored updates read in the
    input stage.
    """

    stream: StreamRef
    trace_id: str
    queue_ns: int = 0
    input_stage_ns: int = 0
    compute_ns: int = 0
    output_stage_ns: int = 0
    fetches: int = 0
    composite: bool = True

    def csv_row(self) -> tuple:
        return (self.trace_id, str(self.stream), self.queue_ns, self.input_stage_ns,
                self.compute_ns, self.output_stage_ns)


class MetricsSink:
    """In-memory ring of :class:`StageTimings`, optionally mirrored to a CSV file."""

    def __init__(self, capacity: int = 100_000, csv_path: str | Path | None = None):
        self._ring: deque[StageTimings] = deque(maxlen=capacity)
        self._lock = threading.Lock()
        self._csv = None
        if csv_path is not None:
            fh = open(csv_path, "w", newline="", encoding="utf-8")
            self._csv = (fh, csv.writer(fh))
            self._csv[1].writerow(CSV_FIELDS)

    def record(self, timings: StageTimings) -> None:
        with self._lock:
            self._ring.append(timings)
            if self._csv is not None:
                self._csv[1].writerow(timings.csv_row())

    def records(self) -> list[StageTimings]:
        with self._lock:
            return list(self._ring)

    def for_trace(self, trace_id: str) -> list[StageTimings]:
        return [r for r in self.records() if r.trace_id == trace_id]

    def clear(self) -> None:
        with self._lock:
            self._ring.clear()

    def close(self) -> None:
        with self._lock:
            if self._csv is not None:
                self._csv[0].close()
                self._csv = None

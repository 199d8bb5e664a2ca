"""Latency benchmark: deploy a topology, inject updates, collect per-trace measurements."""
from __future__ import annotations

import os
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from ..api.platform import Platform
from ..errors import RuntimeUnhealthy
from ..model import ChannelValue, SensorUpdate, now_ms
from ..runtime import GATE_REASONS, DiscardReason, IngestStatus, MetricsSink, Runtime, StageTimings
from ..store import DelayedStore, MemoryStore
from .analysis import derive_execution_tree
from .deploy import CHANNEL, STREAM, Deployment, deploy, seed_history
from .spec import TopologySpec

MODES = ("paced", "serial")
STAGES = ("queue", "input", "compute", "output")


@dataclass(frozen=True)
class NodeTiming:
    node: str
    in_degree: int
    out_degree: int
    timings: StageTimings

    def stage_ns(self, stage: str) -> int:
        t = self.timings
        return {"queue": t.queue_ns, "input": t.input_stage_ns, "compute": t.compute_ns,
                "output": t.output_stage_ns}[stage]


@dataclass
class TraceRecord:
    injection: int
    source: str
    trace_id: str
    end_to_end_ns: int
    emissions: int
    stale: int
    lost_race: int
    other_discards: dict[str, int]
    overlapped: bool = False

    @property
    def gate_discards(self) -> int:
        """Arrivals rejected by the timestamp gate, before computing or at the store append."""
        return self.stale + self.lost_race


@dataclass
class BenchReport:
    family: str
    size: int
    mode: str
    workers: int
    traces: list[TraceRecord] = field(default_factory=list)
    timings: list[NodeTiming] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    verified: int = 0
    wall_s: float = 0.0

    @property
    def end_to_end_ns(self) -> list[int]:
        return [t.end_to_end_ns for t in self.traces]

    @property
    def median_end_to_end_ns(self) -> float:
        return statistics.median(self.end_to_end_ns) if self.traces else float("nan")

    @property
    def stale_discards(self) -> int:
        return sum(t.gate_discards for t in self.traces)

    @property
    def lost_races(self) -> int:
        return sum(t.lost_race for t in self.traces)

    @property
    def ok(self) -> bool:
        return not self.violations


def summarize(values: list[int]) -> tuple[float, float, float, int]:
    """mean, median, p95 and count."""
    if not values:
        return (float("nan"),) * 3 + (0,)
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(np.median(arr)), float(np.percentile(arr, 95)), len(values)


def _stage_samples(reports: list[BenchReport], degree_kind: str, stage: str) -> dict[int, list[list[int]]]:
    """degree -> one sample list per report."""
    out: dict[int, list[list[int]]] = {}
    for r in reports:
        per: dict[int, list[int]] = {}
        for nt in r.timings:
            if stage in ("input", "compute") and not nt.timings.composite:
                continue
            degree = nt.in_degree if degree_kind == "in" else nt.out_degree
            per.setdefault(degree, []).append(nt.stage_ns(stage))
        for degree, values in per.items():
            out.setdefault(degree, []).append(values)
    return out


def stage_by_degree(reports: list[BenchReport], weighting: str = "node") -> list[dict]:
    """Stage latency aggregated by in- and out-degree.

    ``node`` pools every per-stream sample across reports; ``topology`` first
    reduces each report to its mean and then aggregates those means, so every
    topology counts once regardless of its size.
    """
    if weighting not in ("node", "topology"):
        raise ValueError("weighting must be 'node' or 'topology'")
    rows = []
    for kind in ("in", "out"):
        for stage in STAGES:
            for degree, groups in sorted(_stage_samples(reports, kind, stage).items()):
                if weighting == "node":
                    values = [v for g in groups for v in g]
                else:
                    values = [statistics.fmean(g) for g in groups]
                mean, median, p95, n = summarize(values)
                rows.append({"degreeKind": kind, "degree": degree, "stage": stage,
                             "mean_ns": mean, "median_ns": median, "p95_ns": p95, "n": n})
    return rows


def _inject(platform: Platform, dep: Deployment, node: str, index: int, ts: int) -> str:
    su = SensorUpdate(STREAM, (ChannelValue.of(CHANNEL, float(index)),), ts)
    result = platform.runtime.ingest(dep.refs[node], su)
    if result.status is not IngestStatus.ACCEPTED:
        raise RuntimeUnhealthy(f"injection {index} into {node} was not accepted: {result.status.value}")
    return result.trace_id


def run_benchmark(
    spec: TopologySpec,
    injections: int = 10,
    rate: float | None = 1.0,
    workers: int | None = None,
    mode: str = "paced",
    *,
    deadline_s: float = 60.0,
    fetch_workers: int = 8,
    store_latency_s: float = 0.0,
    platform: Platform | None = None,
) -> BenchReport:
    """Deploy ``spec`` on a fresh in-process platform and measure ``injections`` updates.

    Injections go to the sources round-robin with strictly increasing
    timestamps, each one its own trace. ``paced`` spaces injection starts
    ``1/rate`` seconds apart; ``serial`` waits for quiescence after each one.
    Exactly-once and discard counts are checked on every trace that did not
    overlap another one in time. ``store_latency_s`` charges every stream
    read and append a simulated round-trip to a remote store.
    """
    if injections < 1:
        raise ValueError("injections must be >= 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "paced" and (rate is None or rate <= 0):
        raise ValueError("paced mode needs a positive rate")
    workers = workers or os.cpu_count() or 1
    own = platform is None
    if own:
        store = DelayedStore(store_latency_s) if store_latency_s > 0 else MemoryStore()
        runtime = Runtime(store, metrics=MetricsSink(capacity=1_000_000), fetch_workers=fetch_workers,
                          trace_history=max(10_000, injections * 2))
        platform = Platform(store, runtime)
    runtime = platform.runtime
    dep = deploy(spec, platform)
    seed_history(platform, dep)
    if runtime.worker_count == 0:
        runtime.start(workers)
    report = BenchReport(spec.family or "custom", _size_of(spec), mode, runtime.worker_count)
    trees = {s: derive_execution_tree(spec, s) for s in spec.sources}
    sources = spec.sources
    base_ts = max(now_ms(), 2)
    started: list[tuple[int, str, str]] = []
    wall0 = time.perf_counter()
    try:
        for i in range(injections):
            node = sources[i % len(sources)]
            if mode == "paced":
                wait = wall0 + i / rate - time.perf_counter()
                if wait > 0:
                    time.sleep(wait)
            started.append((i, node, _inject(platform, dep, node, i, base_ts + i)))
            if mode == "serial" and not runtime.wait_quiescent(deadline_s):
                raise RuntimeUnhealthy(f"no quiescence {deadline_s}s after injection {i}")
        if not runtime.wait_quiescent(deadline_s):
            raise RuntimeUnhealthy(f"no quiescence within {deadline_s}s after the last injection")
        report.wall_s = time.perf_counter() - wall0
        _collect(report, runtime, dep, trees, started)
    finally:
        if own:
            runtime.shutdown(timeout=deadline_s)
    return report


def _size_of(spec: TopologySpec) -> int:
    if spec.family == "length":
        return len(spec.composites)
    if spec.family == "in":
        return len(spec.sources)
    if spec.family == "out":
        return len(spec.composites)
    return len(spec.kinds)


def _collect(report: BenchReport, runtime: Runtime, dep: Deployment, trees, started) -> None:
    stats = {tid: runtime.trace(tid) for _, _, tid in started}
    intervals = sorted((s.start_ns, s.end_ns, tid) for tid, s in stats.items())
    overlapped = set()
    for (a0, a1, ta), (b0, b1, tb) in zip(intervals, intervals[1:]):
        if b0 <= a1:
            overlapped |= {ta, tb}
    node_of = dep.nodes_by_ref
    spec = dep.spec
    by_trace: dict[str, list[StageTimings]] = {}
    for t in runtime.metrics.records():
        by_trace.setdefault(t.trace_id, []).append(t)
    for i, node, tid in started:
        s = stats[tid]
        other = {r.value: c for r, c in s.discards.items() if r not in GATE_REASONS and c}
        rec = TraceRecord(i, node, tid, s.end_to_end_ns, len(s.emissions),
                          s.discards[DiscardReason.STALE], s.discards[DiscardReason.LOST_RACE],
                          other, tid in overlapped)
        report.traces.append(rec)
        for t in by_trace.get(tid, ()):
            n = node_of.get(t.stream)
            if n is not None:
                report.timings.append(NodeTiming(n, spec.in_degree(n), spec.out_degree(n), t))
        if rec.overlapped:
            continue
        report.verified += 1
        tree = trees[node]
        emitted = {node_of.get(r) for r in s.emissions}
        if rec.emissions != tree.expected_emissions or emitted != set(tree.reachable):
            report.violations.append(
                f"injection {i} at {node}: {rec.emissions} emissions over {len(emitted)} streams, "
                f"expected one from each of {tree.expected_emissions} reachable composites")
        if rec.gate_discards != tree.expected_discards:
            report.violations.append(
                f"injection {i} at {node}: {rec.gate_discards} stale discards, "
                f"expected {tree.expected_discards}")
        if other:
            report.violations.append(f"injection {i} at {node}: unexpected discards {other}")


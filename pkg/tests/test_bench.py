from __future__ import annotations

import csv
import io

import pytest

from streamflow.errors import RuntimeUnhealthy
from streamflow.topo import (
    BenchReport,
    diamond,
    emit_report,
    family_medians,
    in_degree_family,
    length_family,
    out_degree_family,
    run_benchmark,
    stage_by_degree,
    two_cycle,
)


def test_single_composite_run():
    report = run_benchmark(length_family(1), injections=10, mode="serial", workers=2)
    assert len(report.end_to_end_ns) == 10 and report.ok and report.verified == 10
    assert sum(t.emissions for t in report.traces) == 10
    assert report.stale_discards == 0
    assert all(ns > 0 for ns in report.end_to_end_ns)


def test_diamond_discards_one_arrival_per_injection():
    report = run_benchmark(diamond(), injections=10, mode="serial", workers=4)
    assert report.ok, report.violations
    assert report.stale_discards == 10
    assert sum(t.emissions for t in report.traces) == 30


def test_cycle_terminates():
    report = run_benchmark(two_cycle(), injections=5, mode="serial", workers=2)
    assert report.ok, report.violations
    assert [t.emissions for t in report.traces] == [2] * 5
    assert [t.gate_discards for t in report.traces] == [1] * 5


def test_fan_in_sink_fetches_every_other_operand_and_itself():
    spec = in_degree_family(5)
    report = run_benchmark(spec, injections=10, mode="serial", workers=2)
    assert report.ok
    sink = [nt for nt in report.timings if nt.node == "sink"]
    assert len(sink) == 10
    assert {nt.timings.fetches for nt in sink} == {5}


def test_paced_mode_with_store_latency():
    report = run_benchmark(out_degree_family(3), injections=4, rate=50, workers=4, store_latency_s=0.0005)
    assert report.ok and len(report.traces) == 4
    assert report.median_end_to_end_ns > 500_000


@pytest.mark.parametrize("kwargs", [dict(injections=0), dict(mode="burst"), dict(rate=0)])
def test_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        run_benchmark(length_family(1), **kwargs)


def test_deadline_is_enforced():
    with pytest.raises(RuntimeUnhealthy):
        run_benchmark(length_family(30), injections=1, mode="serial", workers=1,
                      store_latency_s=0.01, deadline_s=0.05)


def test_stage_rows_by_degree():
    reports = [run_benchmark(out_degree_family(3), injections=3, mode="serial", workers=2)]
    rows = stage_by_degree(reports)
    keys = {(r["degreeKind"], r["degree"], r["stage"]) for r in rows}
    assert ("out", 3, "output") in keys and ("in", 1, "compute") in keys
    # sources have no input or compute stage
    assert ("in", 0, "compute") not in keys and ("in", 0, "queue") in keys
    assert all(r["n"] > 0 for r in rows)
    weighted = stage_by_degree(reports * 2, "topology")
    assert next(r["n"] for r in weighted if r["degree"] == 3 and r["degreeKind"] == "out") == 2
    with pytest.raises(ValueError):
        stage_by_degree(reports, "edge")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_empty_report_writes_headers_only(tmp_path):
    paths = emit_report([], tmp_path)
    assert [p.name for p in paths] == ["stage_by_degree.csv", "stage_by_degree_per_topology.csv",
                                       "end_to_end.csv"]
    for p in paths:
        assert len(read_csv(p)) == 1


def test_length_sweep_end_to_end_rows(tmp_path):
    reports = [run_benchmark(length_family(n), injections=3, mode="serial", workers=2) for n in (1, 10, 20)]
    emit_report(reports, tmp_path)
    rows = read_csv(tmp_path / "end_to_end.csv")
    assert rows[0] == ["family", "size", "injection", "ns"]
    assert sorted((r[1], r[2]) for r in rows[1:]) == sorted(
        (str(n), str(i)) for n in (1, 10, 20) for i in range(3))
    assert set(family_medians(reports)["length"]) == {1, 10, 20}


def test_table_format():
    out = io.StringIO()
    report = BenchReport("length", 1, "serial", 1)
    assert emit_report([report], fmt="table", out=out) == []
    header, row = out.getvalue().splitlines()
    assert header.split()[:2] == ["family", "size"] and row.split()[:3] == ["length", "1", "0"]
    with pytest.raises(ValueError):
        emit_report([], fmt="xml")
    with pytest.raises(ValueError):
        emit_report([])

"""Benchmark output: CSV files or a console table."""
from __future__ import annotations

import csv
import statistics
import sys
from collections.abc import Iterable
from pathlib import Path
from typing import TextIO

from .bench import BenchReport, stage_by_degree, summarize

STAGE_FIELDS = ("degreeKind", "degree", "stage", "mean_ns", "median_ns", "p95_ns", "n")
END_TO_END_FIELDS = ("family", "size", "injection", "ns")


def write_stage_csv(reports: list[BenchReport], path: Path, weighting: str = "node") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, STAGE_FIELDS)
        w.writeheader()
        w.writerows(stage_by_degree(reports, weighting))


def write_end_to_end_csv(reports: list[BenchReport], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(END_TO_END_FIELDS)
        for r in reports:
            for t in r.traces:
                w.writerow((r.family, r.size, t.injection, t.end_to_end_ns))


def family_medians(reports: Iterable[BenchReport]) -> dict[str, dict[int, float]]:
    out: dict[str, dict[int, list[int]]] = {}
    for r in reports:
        out.setdefault(r.family, {}).setdefault(r.size, []).extend(r.end_to_end_ns)
    return {f: {s: statistics.median(v) for s, v in sorted(sizes.items()) if v}
            for f, sizes in out.items()}


def print_table(reports: list[BenchReport], out: TextIO) -> None:
    out.write(f"{'family':<10}{'size':>6}{'injections':>12}{'median_ms':>12}"
              f"{'p95_ms':>10}{'stale':>8}{'violations':>12}\n")
    for r in reports:
        _, median, p95, n = summarize(r.end_to_end_ns)
        out.write(f"{r.family:<10}{r.size:>6}{n:>12}{median / 1e6:>12.3f}{p95 / 1e6:>10.3f}"
                  f"{r.stale_discards:>8}{len(r.violations):>12}\n")


def emit_report(reports: list[BenchReport], outdir: str | Path | None = None, fmt: str = "csv",
                out: TextIO | None = None) -> list[Path]:
    """Write ``stage_by_degree.csv`` (plus a per-topology weighted variant) and ``end_to_end.csv``.

    ``fmt="table"`` prints a per-report summary to ``out`` instead.
    """
    if fmt == "table":
        print_table(reports, out or sys.stdout)
        return []
    if fmt != "csv":
        raise ValueError("format must be 'csv' or 'table'")
    if outdir is None:
        raise ValueError("csv output needs a directory")
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    paths = [root / "stage_by_degree.csv", root / "stage_by_degree_per_topology.csv",
             root / "end_to_end.csv"]
    write_stage_csv(reports, paths[0], "node")
    write_stage_csv(reports, paths[1], "topology")
    write_end_to_end_csv(reports, paths[2])
    return paths

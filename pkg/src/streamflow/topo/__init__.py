"""Topology generation, graph analysis and the latency benchmark."""
from __future__ import annotations

from .analysis import (
    ExecutionTree,
    GraphMetrics,
    compute_metrics,
    compute_novelty,
    derive_execution_tree,
    novelty_generating,
)
from .bench import BenchReport, run_benchmark, stage_by_degree
from .deploy import Deployment, deploy, seed_history
from .generate import (
    diamond,
    generate_family,
    generate_random,
    in_degree_family,
    length_family,
    out_degree_family,
    two_cycle,
)
from .report import emit_report, family_medians
from .spec import GeneratorKnobs, Node, NodeKind, TopologySpec

__all__ = [
    "BenchReport",
    "Deployment",
    "ExecutionTree",
    "GeneratorKnobs",
    "GraphMetrics",
    "Node",
    "NodeKind",
    "TopologySpec",
    "compute_metrics",
    "compute_novelty",
    "deploy",
    "derive_execution_tree",
    "diamond",
    "emit_report",
    "family_medians",
    "generate_family",
    "generate_random",
    "in_degree_family",
    "length_family",
    "novelty_generating",
    "out_degree_family",
    "run_benchmark",
    "seed_history",
    "stage_by_degree",
    "two_cycle",
]

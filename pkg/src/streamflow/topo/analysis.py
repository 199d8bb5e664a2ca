"""Graph analysis of topologies: degree statistics, execution trees and novelty."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass

import networkx as nx

from .spec import NodeKind, TopologySpec


@dataclass(frozen=True)
class GraphMetrics:
    max_in_degree: int
    mean_in_degree: float
    in_degree_std_dev: float
    max_out_degree: int
    mean_out_degree: float
    out_degree_std_dev: float
    edges: int
    nodes: int
    sources: int
    sinks: int
    density: float
    connectivity: int
    edge_connectivity: int

    def to_document(self) -> dict:
        return asdict(self)


def _pstdev(values: list[int], mean: float) -> float:
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values)) if values else 0.0


def undirected(spec: TopologySpec) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(spec.kinds)
    g.add_edges_from(spec.edges)
    return g


def compute_metrics(spec: TopologySpec) -> GraphMetrics:
    """Degree statistics over all nodes (population std-dev) and undirected connectivity.

    Density is ``2E / (N (N - 1))``, the undirected formula.
    """
    ids = list(spec.kinds)
    n, e = len(ids), len(spec.edges)
    ins = [spec.in_degree(i) for i in ids]
    outs = [spec.out_degree(i) for i in ids]
    mean = e / n if n else 0.0
    g = undirected(spec)
    if n >= 2 and nx.is_connected(g):
        conn, econn = nx.node_connectivity(g), nx.edge_connectivity(g)
    else:
        conn = econn = 0
    return GraphMetrics(
        max_in_degree=max(ins, default=0),
        mean_in_degree=mean,
        in_degree_std_dev=_pstdev(ins, mean),
        max_out_degree=max(outs, default=0),
        mean_out_degree=mean,
        out_degree_std_dev=_pstdev(outs, mean),
        edges=e,
        nodes=n,
        sources=sum(1 for d in ins if d == 0),
        sinks=sum(1 for d in outs if d == 0),
        density=2 * e / (n * (n - 1)) if n >= 2 else 0.0,
        connectivity=conn,
        edge_connectivity=econn,
    )


@dataclass(frozen=True)
class ExecutionTree:
    """What one update injected at ``source`` triggers.

    ``parent`` maps every reachable node to its BFS-tree parent. Every
    triggering edge delivers one arrival, each reachable composite emits once,
    so the remaining arrivals are rejected by the timestamp gate.
    """

    source: str
    reachable: frozenset[str]
    parent: dict[str, str]
    triggering_edges: tuple[tuple[str, str], ...]

    @property
    def expected_emissions(self) -> int:
        return len(self.reachable)

    @property
    def expected_discards(self) -> int:
        return len(self.triggering_edges) - len(self.reachable)


def derive_execution_tree(spec: TopologySpec, source: str) -> ExecutionTree:
    node = spec.node(source)
    if not node.is_source:
        raise ValueError(f"{source} is not a source node")
    parent: dict[str, str] = {}
    seen = {source}
    queue = deque([source])
    while queue:
        cur = queue.popleft()
        for nxt in spec.successors[cur]:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                queue.append(nxt)
    reachable = frozenset(parent)
    live = reachable | {source}
    triggering = tuple(e for e in spec.edges if e[0] in live and e[1] in reachable)
    return ExecutionTree(source, reachable, parent, triggering)


def source_ancestors(spec: TopologySpec) -> dict[str, frozenset[str]]:
    """For every node, the source nodes it is reachable from (itself for a source)."""
    out: dict[str, set[str]] = {n: set() for n in spec.kinds}
    for s in spec.sources:
        seen = {s}
        queue = deque([s])
        while queue:
            cur = queue.popleft()
            out[cur].add(s)
            for nxt in spec.successors[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return {n: frozenset(v) for n, v in out.items()}


def novelty_generating(spec: TopologySpec) -> set[str]:
    """Composites that introduce a new combination of sources.

    With two or more inputs: some input carries a source none of the others
    carries. With a single input: only the first consumer of a source, i.e.
    the input is a source node itself.
    """
    anc = source_ancestors(spec)
    out = set()
    for node in spec.composites:
        preds = spec.predecessors[node]
        if len(preds) == 1:
            if spec.kinds[preds[0]] is NodeKind.SOURCE:
                out.add(node)
            continue
        for i, p in enumerate(preds):
            others = set().union(*(anc[q] for j, q in enumerate(preds) if j != i))
            if anc[p] - others:
                out.add(node)
                break
    return out


def compute_novelty(spec: TopologySpec) -> dict[str, int | None]:
    """Distance to the nearest novelty-generating stream; ``None`` if none feeds the node."""
    novelty: dict[str, int | None] = dict.fromkeys(spec.kinds)
    zero = set(spec.sources) | novelty_generating(spec)
    queue = deque()
    for n in spec.kinds:
        if n in zero:
            novelty[n] = 0
            queue.append(n)
    while queue:
        cur = queue.popleft()
        for nxt in spec.successors[cur]:
            if novelty[nxt] is None:
                novelty[nxt] = novelty[cur] + 1
                queue.append(nxt)
    return novelty

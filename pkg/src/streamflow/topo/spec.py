"""Topology documents: which streams exist and which feed which."""
from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from ..errors import InfeasibleKnobs, UnknownNode


class NodeKind(enum.Enum):
    SOURCE = "Source"
    COMPOSITE = "Composite"


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind

    @property
    def is_source(self) -> bool:
        return self.kind is NodeKind.SOURCE


@dataclass(frozen=True)
class GeneratorKnobs:
    """Parameters of the random topology generator.

    Each composite draws its operand count uniformly from
    ``[operands, max_operands]`` (just ``operands`` when ``max_operands`` is
    None). ``distribution`` decides how operands are picked: ``uniform`` gives
    every candidate the same weight, ``skewed`` weights candidates by a power
    law of a random popularity rank so a few streams get very high out-degree.
    """

    num_streams: int
    num_composite: int
    operands: int = 1
    max_operands: int | None = None
    distribution: str = "uniform"
    exponent: float = 1.0
    allow_cycles: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.num_streams < 1:
            raise InfeasibleKnobs("need at least one stream")
        if not 0 <= self.num_composite <= self.num_streams:
            raise InfeasibleKnobs("num_composite must be between 0 and num_streams")
        if self.num_composite and self.num_composite == self.num_streams:
            raise InfeasibleKnobs("composite streams need at least one source stream")
        if self.operands < 1:
            raise InfeasibleKnobs("operands must be >= 1")
        if self.max_operands is not None and self.max_operands < self.operands:
            raise InfeasibleKnobs("max_operands must be >= operands")
        if self.distribution not in ("uniform", "skewed"):
            raise InfeasibleKnobs(f"unknown operand distribution {self.distribution!r}")
        if self.exponent <= 0:
            raise InfeasibleKnobs("skew exponent must be > 0")

    @property
    def num_sources(self) -> int:
        return self.num_streams - self.num_composite

    def to_document(self) -> dict:
        return asdict(self)

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> GeneratorKnobs:
        return cls(**doc)


@dataclass(frozen=True)
class TopologySpec:
    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...]
    seed: int | None = None
    knobs: GeneratorKnobs | None = None
    family: str | None = field(default=None, compare=False)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        kinds = {n.id: n.kind for n in self.nodes}
        seen = set()
        for a, b in self.edges:
            if a not in kinds or b not in kinds:
                raise UnknownNode(f"edge ({a}, {b}) names an unknown node")
            if a == b:
                raise ValueError(f"self-loop on {a}")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            if kinds[b] is NodeKind.SOURCE:
                raise ValueError(f"source {b} cannot have operands")
        for n in self.nodes:
            if n.kind is NodeKind.COMPOSITE and not self.predecessors[n.id]:
                raise ValueError(f"composite {n.id} has no operands")

    @cached_property
    def kinds(self) -> dict[str, NodeKind]:
        return {n.id: n.kind for n in self.nodes}

    @cached_property
    def predecessors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return out

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return out

    @property
    def sources(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind is NodeKind.SOURCE]

    @property
    def composites(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind is NodeKind.COMPOSITE]

    def node(self, node_id: str) -> Node:
        if node_id not in self.kinds:
            raise UnknownNode(f"no node {node_id!r}")
        return Node(node_id, self.kinds[node_id])

    def in_degree(self, node_id: str) -> int:
        return len(self.predecessors[node_id])

    def out_degree(self, node_id: str) -> int:
        return len(self.successors[node_id])

    def to_document(self) -> dict:
        doc: dict[str, Any] = {
            "nodes": [{"id": n.id, "kind": n.kind.value} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
            "seed": self.seed,
            "knobs": None if self.knobs is None else self.knobs.to_document(),
        }
        if self.family is not None:
            doc["family"] = self.family
        return doc

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> TopologySpec:
        nodes = tuple(Node(str(n["id"]), NodeKind(n["kind"])) for n in doc["nodes"])
        edges = tuple((str(a), str(b)) for a, b in doc["edges"])
        knobs = doc.get("knobs")
        return cls(nodes, edges, doc.get("seed"),
                   None if knobs is None else GeneratorKnobs.from_document(knobs),
                   doc.get("family"))

    @classmethod
    def build(cls, sources: Iterable[str], edges: Iterable[tuple[str, str]],
              family: str | None = None) -> TopologySpec:
        """Spec from source ids plus edges; every other endpoint is a composite."""
        sources = list(sources)
        edges = [tuple(e) for e in edges]
        order = list(dict.fromkeys(sources + [x for e in edges for x in e]))
        src = set(sources)
        nodes = tuple(Node(i, NodeKind.SOURCE if i in src else NodeKind.COMPOSITE) for i in order)
        return cls(nodes, tuple(edges), family=family)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_document(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> TopologySpec:
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))

"""Turn a topology into live service objects."""
from __future__ import annotations

from dataclasses import dataclass

from ..api.platform import Platform
from ..model import ChannelValue, SensorUpdate, StreamRef
from .spec import TopologySpec

STREAM = "v"
CHANNEL = "v"


@dataclass(frozen=True)
class Deployment:
    spec: TopologySpec
    refs: dict[str, StreamRef]

    @property
    def nodes_by_ref(self) -> dict[StreamRef, str]:
        return {ref: node for node, ref in self.refs.items()}


def operand_alias(i: int) -> str:
    return f"op{i}"


def composite_document(node: str, operands: list[StreamRef]) -> dict:
    """Descriptor whose stream sums the ``v`` channel of every operand."""
    terms = [f"{{${operand_alias(i)}.channels.{CHANNEL}.current-value}}" for i in range(len(operands))]
    return {
        "name": node,
        "streams": {
            STREAM: {
                "channels": {CHANNEL: {"type": "number", "current-value": " + ".join(terms)}},
                "sources": {operand_alias(i): ref.to_document() for i, ref in enumerate(operands)},
            }
        },
    }


def simple_document(node: str) -> dict:
    return {"name": node, "streams": {STREAM: {"channels": {CHANNEL: {"type": "number"}}}}}


def deploy(spec: TopologySpec, platform: Platform) -> Deployment:
    """Create one service object per node, then wire the composites.

    Every object first gets a plain stream so that operands exist before any
    composite refers to them; this also makes cyclic topologies deployable.
    """
    refs = {}
    for node in spec.kinds:
        d = platform.create_so(simple_document(node))
        refs[node] = StreamRef(d.id, STREAM)
    for node in spec.composites:
        operands = [refs[p] for p in spec.predecessors[node]]
        platform.update_so(refs[node].so_id, composite_document(node, operands))
    return Deployment(spec, refs)


def seed_history(platform: Platform, deployment: Deployment, ts: int = 1, value: float = 0.0) -> None:
    """Give every stream one stored update so no computation lacks operand data."""
    for ref in deployment.refs.values():
        platform.store.append_update(
            ref, SensorUpdate(STREAM, (ChannelValue.of(CHANNEL, value),), ts))

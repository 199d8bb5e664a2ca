"""Random and parametric topology generators."""
from __future__ import annotations

import random

from ..errors import InfeasibleKnobs
from .spec import GeneratorKnobs, Node, NodeKind, TopologySpec

FAMILIES = ("length", "in", "out")


def _pick(rng: random.Random, candidates: list[str], weights: dict[str, float], k: int) -> list[str]:
    """Weighted sample of ``k`` distinct candidates."""
    pool = list(candidates)
    w = [weights[c] for c in pool]
    chosen = []
    for _ in range(k):
        i = rng.choices(range(len(pool)), weights=w)[0]
        chosen.append(pool.pop(i))
        w.pop(i)
    return chosen


def generate_random(knobs: GeneratorKnobs) -> TopologySpec:
    """Draw a topology; identical knobs (seed included) give an identical spec.

    Sources come first, then composites in a random order. Without cycles a
    composite only picks operands among the nodes before it, so the result
    is a DAG; with cycles any other node is a candidate.
    """
    rng = random.Random(knobs.seed)
    sources = [f"s{i}" for i in range(knobs.num_sources)]
    composites = [f"c{i}" for i in range(knobs.num_composite)]
    rng.shuffle(composites)
    order = sources + composites
    hi = knobs.max_operands or knobs.operands

    if knobs.num_composite:
        available = len(order) - 1 if knobs.allow_cycles else len(sources)
        if knobs.operands > available:
            raise InfeasibleKnobs(
                f"{knobs.operands} operands requested but the first composite can pick from "
                f"only {available} streams")

    ranked = list(order)
    rng.shuffle(ranked)
    if knobs.distribution == "skewed":
        weights = {n: (r + 1) ** -knobs.exponent for r, n in enumerate(ranked)}
    else:
        weights = dict.fromkeys(order, 1.0)

    edges: list[tuple[str, str]] = []
    for pos in range(len(sources), len(order)):
        node = order[pos]
        if knobs.allow_cycles:
            candidates = [n for n in order if n != node]
        else:
            candidates = order[:pos]
        k = min(rng.randint(knobs.operands, hi), len(candidates))
        edges.extend((op, node) for op in _pick(rng, candidates, weights, k))

    nodes = tuple(Node(n, NodeKind.SOURCE) for n in sources) + tuple(
        Node(n, NodeKind.COMPOSITE) for n in sorted(composites, key=lambda c: int(c[1:]))
    )
    return TopologySpec(nodes, tuple(edges), knobs.seed, knobs, family="random")


def length_family(size: int) -> TopologySpec:
    """One source feeding a chain of ``size`` composites."""
    _check_size(size)
    chain = ["s0"] + [f"c{i}" for i in range(1, size + 1)]
    return TopologySpec.build(["s0"], zip(chain, chain[1:]), family="length")


def in_degree_family(size: int) -> TopologySpec:
    """``size`` sources all feeding one composite sink."""
    _check_size(size)
    sources = [f"s{i}" for i in range(size)]
    return TopologySpec.build(sources, [(s, "sink") for s in sources], family="in")


def out_degree_family(size: int) -> TopologySpec:
    """One source feeding ``size`` composite sinks."""
    _check_size(size)
    return TopologySpec.build(["s0"], [("s0", f"c{i}") for i in range(size)], family="out")


def generate_family(kind: str, size: int) -> TopologySpec:
    builders = {"length": length_family, "in": in_degree_family, "indegree": in_degree_family,
                "out": out_degree_family, "outdegree": out_degree_family}
    try:
        return builders[kind.lower().replace("-", "").replace("_", "")](size)
    except KeyError:
        raise ValueError(f"unknown family {kind!r}; expected one of {FAMILIES}") from None


def _check_size(size: int) -> None:
    if size < 1:
        raise ValueError("family size must be >= 1")


def diamond() -> TopologySpec:
    """a feeds f and g, both feed x: one arrival at x is always late."""
    return TopologySpec.build(["a"], [("a", "f"), ("a", "g"), ("f", "x"), ("g", "x")],
                              family="diamond")


def two_cycle() -> TopologySpec:
    """a feeds f, and f and g feed each other."""
    return TopologySpec.build(["a"], [("a", "f"), ("f", "g"), ("g", "f")], family="cycle")

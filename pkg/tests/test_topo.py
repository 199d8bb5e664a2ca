from __future__ import annotations

import itertools
import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamflow.api import Platform
from streamflow.errors import InfeasibleKnobs, UnknownNode
from streamflow.model import ChannelValue, SensorUpdate
from streamflow.runtime import Runtime
from streamflow.store import MemoryStore
from streamflow.topo import (
    GeneratorKnobs,
    NodeKind,
    TopologySpec,
    compute_metrics,
    compute_novelty,
    deploy,
    derive_execution_tree,
    diamond,
    generate_family,
    generate_random,
    in_degree_family,
    length_family,
    novelty_generating,
    out_degree_family,
    two_cycle,
)
from streamflow.topo.deploy import CHANNEL, STREAM

from table_graphs import TABLE_ROWS, synthetic, truncate2

# -- spec and generator -----------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        TopologySpec.build(["a"], [("a", "a")])
    with pytest.raises(ValueError):
        TopologySpec.build(["a", "b"], [("a", "b")])
    with pytest.raises(UnknownNode):
        diamond().node("zz")


def test_spec_round_trip(tmp_path):
    spec = generate_random(GeneratorKnobs(12, 7, operands=1, max_operands=3, seed=4))
    spec.save(tmp_path / "t.json")
    again = TopologySpec.load(tmp_path / "t.json")
    assert again == spec and again.family == "random"


def test_generator_is_deterministic():
    knobs = GeneratorKnobs(30, 20, operands=2, max_operands=4, distribution="skewed", seed=11)
    assert generate_random(knobs) == generate_random(knobs)
    assert generate_random(knobs) != generate_random(GeneratorKnobs(30, 20, 2, 4, "skewed", seed=12))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 25), st.data())
def test_generator_respects_knobs(n, data):
    composite = data.draw(st.integers(0, n - 1))
    sources = n - composite
    lo = data.draw(st.integers(1, sources))
    hi = data.draw(st.integers(lo, lo + 3))
    knobs = GeneratorKnobs(n, composite, lo, hi, data.draw(st.sampled_from(["uniform", "skewed"])),
                           seed=data.draw(st.integers(0, 10**6)))
    spec = generate_random(knobs)
    assert len(spec.sources) == sources and len(spec.composites) == composite
    g = nx.DiGraph(list(spec.edges))
    g.add_nodes_from(spec.kinds)
    assert nx.is_directed_acyclic_graph(g)
    for c in spec.composites:
        assert lo <= spec.in_degree(c) <= hi


def test_single_operand_gives_a_forest():
    spec = generate_random(GeneratorKnobs(40, 30, operands=1, seed=2))
    assert all(spec.in_degree(c) == 1 for c in spec.composites)
    g = nx.Graph(list(spec.edges))
    g.add_nodes_from(spec.kinds)
    assert nx.is_forest(g)


def test_cycles_allowed_when_asked():
    found = any(not nx.is_directed_acyclic_graph(nx.DiGraph(list(
        generate_random(GeneratorKnobs(10, 8, operands=2, allow_cycles=True, seed=s)).edges)))
        for s in range(20))
    assert found


@pytest.mark.parametrize("kwargs", [
    dict(num_streams=0, num_composite=0),
    dict(num_streams=3, num_composite=3),
    dict(num_streams=3, num_composite=4),
    dict(num_streams=3, num_composite=1, operands=0),
    dict(num_streams=3, num_composite=1, operands=2, max_operands=1),
    dict(num_streams=3, num_composite=1, distribution="zipf"),
])
def test_infeasible_knobs(kwargs):
    with pytest.raises(InfeasibleKnobs):
        generate_random(GeneratorKnobs(**kwargs))


def test_too_many_operands_for_the_first_composite():
    with pytest.raises(InfeasibleKnobs):
        generate_random(GeneratorKnobs(5, 3, operands=3))


def test_families():
    chain = length_family(3)
    assert chain.edges == (("s0", "c1"), ("c1", "c2"), ("c2", "c3"))
    fan_in = in_degree_family(4)
    assert fan_in.in_degree("sink") == 4 and len(fan_in.sources) == 4
    fan_out = out_degree_family(4)
    assert fan_out.out_degree("s0") == 4 and len(fan_out.composites) == 4
    assert generate_family("InDegree", 2).family == "in"
    with pytest.raises(ValueError):
        generate_family("width", 2)
    with pytest.raises(ValueError):
        length_family(0)


def test_size_one_families_share_a_shape():
    shapes = {(len(s.sources), len(s.composites), len(s.edges))
              for s in (length_family(1), in_degree_family(1), out_degree_family(1))}
    assert shapes == {(1, 1, 1)}


# -- metrics ----------------------------------------------------------------------


def test_metrics_of_one_edge():
    m = compute_metrics(TopologySpec.build(["a"], [("a", "b")]))
    assert (m.nodes, m.edges, m.sources, m.sinks) == (2, 1, 1, 1)
    assert m.density == 1.0 and m.mean_in_degree == 0.5
    assert m.in_degree_std_dev == 0.5 and m.connectivity == m.edge_connectivity == 1


def test_disconnected_graph_has_zero_connectivity():
    m = compute_metrics(TopologySpec.build(["a", "b"], [("a", "x"), ("b", "y")]))
    assert m.connectivity == m.edge_connectivity == 0


def brute_connectivity(nodes, edges):
    def connected(keep_nodes, keep_edges):
        keep_nodes = set(keep_nodes)
        if len(keep_nodes) <= 1:
            return True
        adj = {n: set() for n in keep_nodes}
        for a, b in keep_edges:
            if a in keep_nodes and b in keep_nodes:
                adj[a].add(b)
                adj[b].add(a)
        start = next(iter(keep_nodes))
        seen, stack = {start}, [start]
        while stack:
            for m in adj[stack.pop()] - seen:
                seen.add(m)
                stack.append(m)
        return seen == keep_nodes

    n = len(nodes)
    if not connected(nodes, edges):
        return 0, 0
    undirected = {frozenset(e) for e in edges}
    if len(undirected) == n * (n - 1) // 2:
        vertex = n - 1
    else:
        vertex = next(k for k in range(n) for cut in itertools.combinations(nodes, k)
                      if not connected(set(nodes) - set(cut), edges))
    first, rest = nodes[0], nodes[1:]
    edge = min(sum(1 for e in undirected if len(e & side) == 1)
               for r in range(len(rest)) for others in itertools.combinations(rest, r)
               for side in [{first, *others}])
    return vertex, edge


@st.composite
def small_specs(draw):
    n = draw(st.integers(2, 7))
    n_sources = draw(st.integers(1, n - 1))
    ids = [f"n{i}" for i in range(n)]
    edges = set()
    for b in range(n_sources, n):
        preds = draw(st.lists(st.sampled_from(ids[:b]), min_size=1, max_size=b, unique=True))
        edges |= {(a, ids[b]) for a in preds}
    return TopologySpec.build(ids[:n_sources], sorted(edges))


@settings(max_examples=150, deadline=None)
@given(small_specs())
def test_metrics_match_brute_force(spec):
    m = compute_metrics(spec)
    nodes = list(spec.kinds)
    ins = [sum(1 for _, b in spec.edges if b == v) for v in nodes]
    outs = [sum(1 for a, _ in spec.edges if a == v) for v in nodes]
    n, e = len(nodes), len(spec.edges)
    assert (m.nodes, m.edges) == (n, e)
    assert (m.max_in_degree, m.max_out_degree) == (max(ins), max(outs))
    assert m.mean_in_degree == pytest.approx(sum(ins) / n)
    assert m.mean_out_degree == pytest.approx(sum(outs) / n)
    assert m.in_degree_std_dev == pytest.approx(math.sqrt(sum((x - e / n) ** 2 for x in ins) / n))
    assert m.sources == ins.count(0) and m.sinks == outs.count(0)
    assert m.density == pytest.approx(e / (n * (n - 1) / 2))
    assert (m.connectivity, m.edge_connectivity) == brute_connectivity(nodes, spec.edges)


@pytest.mark.parametrize("row", TABLE_ROWS, ids=lambda r: f"{r[0]}n{r[1]}e")
def test_published_table_rows_truncate_to_printed_values(row):
    nodes, edges, sources, _, _, mean_in, density = row
    m = compute_metrics(synthetic(nodes, edges, sources))
    assert (m.nodes, m.edges, m.sources) == (nodes, edges, sources)
    assert truncate2(m.mean_in_degree) == mean_in
    assert truncate2(m.density) == density
    assert m.connectivity >= 1 and m.edge_connectivity >= 1


def test_published_values_are_not_half_up_rounded():
    # half-up rounding would print 1.43 for 30/21, the table shows 1.42
    assert round(30 / 21, 2) == 1.43
    assert truncate2(30 / 21) == 1.42


# -- execution trees and novelty ----------------------------------------------------


def test_execution_trees():
    d = derive_execution_tree(diamond(), "a")
    assert d.reachable == {"f", "g", "x"}
    assert (d.expected_emissions, d.expected_discards) == (3, 1)
    c = derive_execution_tree(two_cycle(), "a")
    assert (c.expected_emissions, c.expected_discards) == (2, 1)
    chain = derive_execution_tree(length_family(5), "s0")
    assert (chain.expected_emissions, chain.expected_discards) == (5, 0)
    assert chain.parent["c3"] == "c2"
    with pytest.raises(UnknownNode):
        derive_execution_tree(diamond(), "nope")
    with pytest.raises(ValueError):
        derive_execution_tree(diamond(), "x")


@settings(max_examples=100, deadline=None)
@given(small_specs())
def test_execution_tree_counts_arrivals(spec):
    for s in spec.sources:
        tree = derive_execution_tree(spec, s)
        reach = nx.descendants(nx.DiGraph(list(spec.edges)), s) if spec.successors[s] else set()
        assert tree.reachable == reach
        arrivals = sum(1 for a, b in spec.edges if b in reach and (a == s or a in reach))
        assert tree.expected_discards == arrivals - len(reach) >= 0


def test_novelty_of_the_worked_pipeline():
    spec = TopologySpec.build(["a", "b"], [
        ("b", "g"), ("a", "h"), ("g", "d"), ("h", "f"),
        ("a", "c"), ("d", "c"), ("g", "e"), ("d", "e"), ("h", "e"),
    ])
    nov = compute_novelty(spec)
    assert {n: nov[n] for n in "cghefd"} == {
        "c": 0, "g": 0, "h": 0, "e": 0, "f": 1, "d": 1}
    assert nov["a"] == nov["b"] == 0


def test_novelty_of_a_chain():
    nov = compute_novelty(TopologySpec.build(["a"], [("a", "c1"), ("c1", "c2")]))
    assert (nov["c1"], nov["c2"]) == (0, 1)


def test_two_disjoint_inputs_are_novel():
    spec = TopologySpec.build(["a", "b"], [("a", "x"), ("b", "y"), ("x", "z"), ("y", "z")])
    assert "z" in novelty_generating(spec)
    assert compute_novelty(spec)["z"] == 0


def test_redundant_inputs_are_not_novel():
    spec = TopologySpec.build(["a"], [("a", "x"), ("a", "y"), ("x", "z"), ("y", "z")])
    assert compute_novelty(spec)["z"] == 1


def test_cycle_unreachable_from_novelty_is_none():
    spec = TopologySpec(
        (TopologySpec.build(["a"], [("a", "b")]).nodes
         + TopologySpec.build([], [("p", "q"), ("q", "p")]).nodes),
        (("a", "b"), ("p", "q"), ("q", "p")))
    nov = compute_novelty(spec)
    assert nov["p"] is None and nov["q"] is None and nov["b"] == 0


# -- deployment -------------------------------------------------------------------


@pytest.fixture
def live():
    store = MemoryStore()
    runtime = Runtime(store)
    runtime.start(2)
    yield Platform(store, runtime)
    runtime.shutdown()


def test_deploy_chain(live):
    dep = deploy(length_family(3), live)
    assert len(live.list_sos()) == 4 and len(live.store.list_subscriptions()) == 3
    assert all(k is NodeKind.SOURCE or dep.refs[n].stream_id == STREAM
               for n, k in dep.spec.kinds.items())


def test_deployed_sink_sums_its_operands(live):
    dep = deploy(in_degree_family(4), live)
    for i, s in enumerate(dep.spec.sources):
        live.runtime.ingest(dep.refs[s], SensorUpdate(STREAM, (ChannelValue.of(CHANNEL, i + 1.0),), 10 + i))
        assert live.runtime.wait_quiescent(5)
    last = live.store.get_last_update(dep.refs["sink"])
    assert last.channel(CHANNEL).current_value == 10.0 and last.last_update == 13


def test_deploy_cycle(live):
    dep = deploy(two_cycle(), live)
    f = live.get_so(dep.refs["f"].so_id)
    assert set(f.streams[STREAM].sources) == {"op0", "op1"}


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50), st.integers(0, 10**6), st.data())
def test_degree_metrics_match_counting_on_larger_graphs(n, seed, data):
    composite = data.draw(st.integers(0, n - 1))
    spec = generate_random(GeneratorKnobs(n, composite, 1, 4, "skewed", seed=seed))
    m = compute_metrics(spec)
    ins = {v: 0 for v in spec.kinds}
    outs = dict(ins)
    for a, b in spec.edges:
        outs[a] += 1
        ins[b] += 1
    e = len(spec.edges)
    assert (m.max_in_degree, m.max_out_degree) == (max(ins.values()), max(outs.values()))
    assert m.sources == list(ins.values()).count(0) == n - composite
    assert m.sinks == list(outs.values()).count(0)
    assert m.density == pytest.approx(2 * e / (n * (n - 1)))
    assert m.out_degree_std_dev == pytest.approx(
        math.sqrt(sum((x - e / n) ** 2 for x in outs.values()) / n))

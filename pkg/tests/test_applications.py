"""Spanning trees, leader election, aggregates, and the MST."""

import math

import numpy as np
import pytest

from gossipsim.applications import (AggregateSpec, BackboneMissingError,
                                    DuplicateWeightsError,
                                    SpreadIncompleteError, WidthOverflowError,
                                    aggregate, extract_spanning_tree,
                                    leader_election, mst)
from gossipsim.engine import Trace
from gossipsim.general import rumor_spread_general
from gossipsim.graphs import Graph, GraphSpec, generate
from gossipsim.primitives import true_labels
from gossipsim.weakcond import rumor_spread_weakcond

from oracles import check_forest, kruskal

from gossipsim.harness import clique_conductance


def test_extract_two_node_push():
    g = generate(GraphSpec("path", n=2))
    tr = rumor_spread_general(g, 1, seed=0)
    f = extract_spanning_tree(g, tr)
    assert f.roots() == [1]
    assert f.parent[2] == 1


def test_extract_weakcond_dumbbell_structure():
    g = generate(GraphSpec("dumbbell", n=128))
    phi = float(clique_conductance(64))
    for s in range(5):
        tr = rumor_spread_weakcond(g, 9, 2, phi, seed=s)
        f = extract_spanning_tree(g, tr)
        check_forest(f.parent)
        assert len(f.members()) == 128
        assert len(f.roots()) == 1
        assert sum(1 for v in f.members() if f.parent[v] > 0) == 127
        depth, _ = true_labels(f.parent)
        assert int(depth[1:].max()) <= tr.rounds_used


def test_extract_incomplete_raises():
    g = generate(GraphSpec("path", n=4))
    tr = Trace()
    tr.outputs = {"first_from": np.array([-1, 0, 1, -1, 3])}
    with pytest.raises(SpreadIncompleteError):
        extract_spanning_tree(g, tr)


def test_leader_single_node():
    g = generate(GraphSpec("path", n=2))
    leaders, _, tree = leader_election(g, "general", source=2, seed=1)
    assert leaders == {1: 2, 2: 2}


def test_leader_unanimous_over_seeds():
    g = generate(GraphSpec("complete", n=64))
    for s in range(20):
        leaders, trace, tree = leader_election(g, "general", source=1 + s % 64,
                                               seed=s)
        vals = set(leaders.values())
        assert len(vals) == 1
        assert vals.pop() == tree.roots()[0]


def test_leader_weakcond_route():
    g = generate(GraphSpec("complete", n=32))
    leaders, _, tree = leader_election(
        g, "weakcond", source=5, c=1, phi_c=float(clique_conductance(32)),
        seed=3)
    assert set(leaders.values()) == {tree.roots()[0]}


def fixed_tree(g, source, seed=0):
    tr = rumor_spread_general(g, source, seed=seed)
    return extract_spanning_tree(g, tr)


def test_aggregate_count_and_sum():
    g = generate(GraphSpec("dumbbell", n=32))
    tree = fixed_tree(g, 4)
    out, _ = aggregate(g, AggregateSpec("count"), {v: 1 for v in range(1, 33)},
                       tree)
    assert all(out[v] == 32 for v in range(1, 33))
    ids = {v: v for v in range(1, 11)}
    g10 = generate(GraphSpec("path", n=10))
    t10 = fixed_tree(g10, 3)
    out, _ = aggregate(g10, AggregateSpec("sum"), ids, t10)
    assert out[1] == 55


def test_aggregate_min_matches_oracle():
    g = generate(GraphSpec("random_regular", n=32, d=3, seed=5))
    tree = fixed_tree(g, 7)
    for s in range(5):
        vals = {v: ((v * 2654435761 + s) % 10 ** 6) for v in range(1, 33)}
        out, _ = aggregate(g, AggregateSpec("min"), vals, tree, seed=s)
        assert out[9] == min(vals.values())
        out, _ = aggregate(g, AggregateSpec("max"), vals, tree, seed=s)
        assert out[9] == max(vals.values())


def test_aggregate_average_pair():
    g = generate(GraphSpec("path", n=8))
    tree = fixed_tree(g, 1)
    vals = {v: v * 10 for v in range(1, 9)}
    out, _ = aggregate(g, AggregateSpec("average"), vals, tree)
    s, c = out[4]
    assert s == sum(vals.values()) and c == 8


def test_aggregate_width_overflow():
    g = generate(GraphSpec("path", n=4))
    tree = fixed_tree(g, 1)
    vals = {v: 1 << 30000 for v in range(1, 5)}
    with pytest.raises(WidthOverflowError):
        aggregate(g, AggregateSpec("sum"), vals, tree)


# -- MST -----------------------------------------------------------------------


def test_mst_of_tree_is_itself():
    g = generate(GraphSpec("path", n=12, weighted=True, seed=4))
    edges, _ = mst(g, seed=1)
    assert edges == set(g.edges())


def test_mst_matches_kruskal_small_corpus():
    ok = 0
    total = 0
    for s in range(25):
        n = 16 + (s % 5) * 8
        g = generate(GraphSpec("erdos_renyi", n=n, p=0.22, seed=300 + s,
                               weighted=True))
        edges, tr = mst(g, seed=s)
        total += 1
        ok += edges == kruskal(g)
        assert len(edges) == n - 1
    assert ok == total


def test_mst_cut_rule_edges_only():
    g = generate(GraphSpec("random_regular", n=32, d=4, seed=2, weighted=True))
    edges, _ = mst(g, seed=0)
    assert edges == kruskal(g)
    assert edges <= set(g.edges())


def test_mst_requires_weights_and_distinctness():
    g = generate(GraphSpec("path", n=6))
    with pytest.raises(ValueError):
        mst(g)
    weights = {e: 5 for e in generate(GraphSpec("path", n=6)).edges()}
    gw = Graph(6, [(i, i + 1) for i in range(1, 6)], weights=weights)
    with pytest.raises(DuplicateWeightsError):
        mst(gw)


def test_mst_backbone_must_span():
    from gossipsim.primitives import Forest
    g = generate(GraphSpec("path", n=6, weighted=True, seed=1))
    parent = np.full(7, -1, dtype=np.int64)
    parent[1] = 0
    parent[2] = 1
    parent[3] = 0  # two roots
    with pytest.raises(BackboneMissingError):
        mst(g, backbone=Forest(g, parent))


def test_mst_modes_agree():
    g = generate(GraphSpec("erdos_renyi", n=18, p=0.3, seed=11, weighted=True))
    e1, t1 = mst(g, seed=2, mode="fast")
    e2, t2 = mst(g, seed=2, mode="reference")
    assert e1 == e2
    assert (t1.rounds_used, t1.messages_sent, t1.total_bits) \
        == (t2.rounds_used, t2.messages_sent, t2.total_bits)


def test_mst_round_bound_rr1024():
    g = generate(GraphSpec("random_regular", n=1024, d=3, seed=1,
                           weighted=True))
    edges, tr = mst(g, seed=0)
    assert edges == kruskal(g)
    bound = 8 * (12 + math.isqrt(1024)) * math.ceil(math.log2(1024)) ** 3
    assert tr.rounds_used <= bound


def test_mst_edge_set_roundtrips_as_edgelist(tmp_path):
    from gossipsim.applications import save_edge_set
    from gossipsim.graphs import load_edgelist
    g = generate(GraphSpec("erdos_renyi", n=14, p=0.35, seed=6, weighted=True))
    edges, _ = mst(g, seed=1)
    p = tmp_path / "mst.txt"
    save_edge_set(g, edges, p)
    back = load_edgelist(p)
    assert set(back.edges()) == edges
    assert all(back.weights[e] == g.weights[e] for e in edges)

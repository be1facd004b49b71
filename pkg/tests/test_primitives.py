"""Gossip and tree building blocks, with fast/reference equivalence."""

import math

import numpy as np
import pytest

from gossipsim.graphs import GraphSpec, generate
from gossipsim.primitives import (Forest, PhaseOverrunError, broadcast,
                                  build_forest, convergecast, push_pull,
                                  sample_outgoing_edge, spread_max_rumor)

from oracles import check_forest, true_cut


def traces_equal(a, b):
    return (a.rounds_used == b.rounds_used
            and a.messages_sent == b.messages_sent
            and a.total_bits == b.total_bits
            and a.max_message_bits == b.max_message_bits)


def two_tree_forest(n=16):
    """Two star trees over the dumbbell's cliques."""
    g = generate(GraphSpec("dumbbell", n=n))
    half = n // 2
    parent = np.full(n + 1, -1, dtype=np.int64)
    parent[1] = 0
    parent[2:half + 1] = 1
    parent[half + 1] = 0
    parent[half + 2:n + 1] = half + 1
    return g, Forest(g, parent)


# -- spread_max_rumor --------------------------------------------------------


def test_single_node_keeps_own_rumor():
    g = generate(GraphSpec("complete", n=2))
    out, _ = spread_max_rumor(g, {1: 30}, 0)
    assert out[1] == 30 and out[2] is None


def test_two_sources_higher_wins():
    g = generate(GraphSpec("complete", n=64))
    for s in range(10):
        out, _ = spread_max_rumor(g, {3: 5, 40: 9}, 8 * int(math.log(64)) + 8,
                                  seed=s)
        assert all(out[v] == 9 for v in range(1, 65))


def test_spread_covers_complete_graph_whp():
    g = generate(GraphSpec("complete", n=256))
    R = math.ceil(8 * math.log(256))
    fails = 0
    for s in range(100):
        out, _ = spread_max_rumor(g, {7: 999}, R, seed=s)
        fails += not all(out[v] == 999 for v in range(1, 257))
    assert fails <= 1


def test_spread_modes_agree():
    g = generate(GraphSpec("dumbbell", n=16))
    for s in range(3):
        o1, t1 = spread_max_rumor(g, {2: 11, 9: 22}, 30, seed=s, mode="fast")
        o2, t2 = spread_max_rumor(g, {2: 11, 9: 22}, 30, seed=s,
                                  mode="reference")
        assert o1 == o2 and traces_equal(t1, t2)


# -- build_forest -------------------------------------------------------------


def test_forest_on_two_node_path():
    g = generate(GraphSpec("path", n=2))
    f = build_forest(g, [1], 4, seed=1)
    assert f.parent[1] == 0 and f.parent[2] == 1
    assert f.max_depth() == 1


def test_forest_single_root_on_complete():
    g = generate(GraphSpec("complete", n=128))
    R = math.ceil(8 * math.log(128))
    for s in range(100):
        f = build_forest(g, [10, 90], R, seed=s)
        check_forest(f.parent)
        assert f.roots() == [90]
        assert len(f.members()) == 128


def test_forest_parent_timestamps_increase():
    g = generate(GraphSpec("dumbbell", n=32))
    f = build_forest(g, [5, 20], 60, seed=2)
    check_forest(f.parent)
    for v in f.members():
        p = int(f.parent[v])
        if p > 0 and f.adopt_round[p] >= 0:
            assert f.adopt_round[v] > f.adopt_round[p]


def test_forest_modes_agree():
    g = generate(GraphSpec("dumbbell", n=16))
    f1 = build_forest(g, [3, 12], 25, seed=7, mode="fast")
    f2 = build_forest(g, [3, 12], 25, seed=7, mode="reference")
    assert np.array_equal(f1.parent, f2.parent)
    assert traces_equal(f1.trace, f2.trace)


# -- broadcast / convergecast -------------------------------------------------


def test_broadcast_depth_zero_reaches_roots_only():
    g, f = two_tree_forest()
    out, _ = broadcast(f, {1: 5, 9: 6}, 0)
    assert out == {1: 5, 9: 6}


def test_broadcast_full_depth_and_no_cross_contamination():
    g, f = two_tree_forest()
    out, tr = broadcast(f, {1: 5, 9: 6}, 3)
    assert all(out[v] == 5 for v in range(1, 9))
    assert all(out[v] == 6 for v in range(9, 17))


def test_broadcast_depth_limited():
    # chain 1 <- 2 <- ... <- 8 on a path graph
    g = generate(GraphSpec("path", n=8))
    parent = np.array([-1] + [0] + list(range(1, 8)), dtype=np.int64)
    f = Forest(g, parent)
    out, _ = broadcast(f, {1: 77}, 4)
    assert set(out) == {1, 2, 3, 4, 5}  # depth <= 4


def test_broadcast_covers_depth_seven_tree_in_seven_rounds():
    g = generate(GraphSpec("path", n=8))
    parent = np.array([-1] + [0] + list(range(1, 8)), dtype=np.int64)
    f = Forest(g, parent)
    out, tr = broadcast(f, {1: 55}, 7)
    assert len(out) == 8 and tr.rounds_used == 7


def test_convergecast_single_node():
    g = generate(GraphSpec("path", n=2))
    parent = np.array([-1, 0, -1], dtype=np.int64)
    f = Forest(g, parent)
    res, _ = convergecast(f, {1: 4}, "sum")
    assert res == {1: 4}


def test_convergecast_counts_tree_sizes():
    g, f = two_tree_forest()
    res, _ = convergecast(f, {v: 1 for v in range(1, 17)}, "sum")
    assert res == {1: 8, 9: 8}


def test_convergecast_seventeen_nodes():
    g = generate(GraphSpec("star", n=17))
    parent = np.full(18, 1, dtype=np.int64)
    parent[0] = -1
    parent[1] = 0
    f = Forest(g, parent)
    res, _ = convergecast(f, {v: 1 for v in range(1, 18)}, "sum")
    assert res[1] == 17


def test_convergecast_overrun_detection():
    g = generate(GraphSpec("path", n=8))
    parent = np.array([-1] + [0] + list(range(1, 8)), dtype=np.int64)
    f = Forest(g, parent)
    with pytest.raises(PhaseOverrunError):
        convergecast(f, {v: 1 for v in range(1, 9)}, "sum", rounds=3)


def test_broadcast_convergecast_modes_agree():
    g, f = two_tree_forest()
    o1, t1 = broadcast(f, {1: 9, 9: 4}, 3, mode="fast")
    o2, t2 = broadcast(f, {1: 9, 9: 4}, 3, mode="reference")
    assert o1 == o2 and traces_equal(t1, t2)
    r1, t1 = convergecast(f, {v: v for v in range(1, 17)}, "max", mode="fast")
    r2, t2 = convergecast(f, {v: v for v in range(1, 17)}, "max",
                          mode="reference")
    assert r1 == r2 and traces_equal(t1, t2)


# -- sample_outgoing_edge ------------------------------------------------------


def test_sample_outgoing_finds_bridge():
    g, f = two_tree_forest()
    hits = 0
    for s in range(200):
        res, tr = sample_outgoing_edge(f, seed=s)
        for r, e in res.items():
            if e is not None:
                assert e == (8, 9)  # only the bridge leaves either clique
                hits += 1
    assert hits >= 2 * 200 * (1 - 0.05 - 0.02)


def test_sample_outgoing_spanning_tree_gets_none():
    g = generate(GraphSpec("complete", n=16))
    parent = np.full(17, 1, dtype=np.int64)
    parent[0] = -1
    parent[1] = 0
    f = Forest(g, parent)
    nones = sum(sample_outgoing_edge(f, seed=s)[0][1] is None
                for s in range(100))
    assert nones == 100  # empty cut is detected, not guessed


def test_sample_outgoing_respects_keep_mask():
    g, f = two_tree_forest()
    keep = np.ones(g.m, dtype=bool)
    for i, (u, v) in enumerate(g.edges()):
        if (u, v) == (8, 9):
            keep[i] = False
    res, _ = sample_outgoing_edge(f, keep_mask=keep, seed=3)
    assert res[1] is None and res[9] is None


def test_sample_outgoing_round_bound_and_modes():
    g, f = two_tree_forest()
    res1, t1 = sample_outgoing_edge(f, seed=5, mode="fast")
    res2, t2 = sample_outgoing_edge(f, seed=5, mode="reference")
    assert res1 == res2 and traces_equal(t1, t2)
    t_bound = f.max_depth()
    parts = 1  # delta=0.05 sketches fit one message here
    assert t1.rounds_used <= 3 * t_bound + parts + 4


def test_sampled_edges_verified_against_true_cut():
    g = generate(GraphSpec("random_regular", n=24, d=3, seed=9))
    R = math.ceil(8 * math.log(24) / 0.1)
    f = build_forest(g, [4, 17], R // 4, seed=1)
    for s in range(50):
        res, _ = sample_outgoing_edge(f, seed=100 + s)
        for r, e in res.items():
            if e is not None:
                assert e in true_cut(g, f.tree_nodes(r))


def test_push_pull_modes_agree():
    g = generate(GraphSpec("dumbbell", n=16))
    i1, t1 = push_pull(g, 2, seed=4, mode="fast")
    i2, t2 = push_pull(g, 2, seed=4, mode="reference")
    assert np.array_equal(i1, i2) and traces_equal(t1, t2)

"""Graph generators, exact conductance oracles, and edge-list IO."""

from fractions import Fraction

import pytest

from gossipsim.graphs import (EdgeListParseError, GraphError, GraphSpec,
                              TooLargeError, conductance_exact, diameter,
                              generate, load_edgelist, save_edgelist,
                              weak_conductance_exact)


def test_dumbbell_small():
    g = generate(GraphSpec("dumbbell", n=6))
    assert g.n == 6 and g.m == 7  # two triangles joined by one edge
    assert diameter(g) == 3


def test_c_barbell_edge_count():
    g = generate(GraphSpec("c_barbell", n=12, c=3))
    assert g.m == 3 * 6 + 2


def test_dumbbell_diameter_is_three_for_all_sizes():
    for n in (8, 64, 128):
        assert diameter(generate(GraphSpec("dumbbell", n=n))) == 3


def test_path_diameter():
    assert diameter(generate(GraphSpec("path", n=5))) == 4


def test_random_regular_deterministic():
    a = generate(GraphSpec("random_regular", n=8, d=3, seed=11))
    b = generate(GraphSpec("random_regular", n=8, d=3, seed=11))
    assert list(a.edges()) == list(b.edges())
    c = generate(GraphSpec("random_regular", n=8, d=3, seed=12))
    assert list(a.edges()) != list(c.edges())


@pytest.mark.parametrize("family,kw", [
    ("dumbbell", dict(n=16)),
    ("c_barbell", dict(n=16, c=4)),
    ("expander_barbell", dict(n=24, c=3, d=3, seed=5)),
    ("path", dict(n=9)),
    ("complete", dict(n=7)),
    ("star", dict(n=9)),
    ("random_regular", dict(n=12, d=3, seed=3)),
    ("erdos_renyi", dict(n=16, p=0.4, seed=2)),
])
def test_generated_graphs_are_simple_symmetric_connected(family, kw):
    g = generate(GraphSpec(family, **kw))
    assert g.is_connected()
    for v in range(1, g.n + 1):
        nbrs = list(g.neighbors(v))
        assert v not in nbrs
        assert len(set(nbrs)) == len(nbrs)
        for u in nbrs:
            assert v in g.neighbors(int(u))


def test_invalid_parameters():
    with pytest.raises(GraphError):
        generate(GraphSpec("c_barbell", n=10, c=3))
    with pytest.raises(GraphError):
        generate(GraphSpec("dumbbell", n=7))
    with pytest.raises(GraphError):
        generate(GraphSpec("random_regular", n=7, d=3))
    with pytest.raises(GraphError):
        generate(GraphSpec("nonsense", n=4))


def test_conductance_exact_examples():
    assert conductance_exact(generate(GraphSpec("complete", n=2))) == 1
    assert conductance_exact(generate(GraphSpec("complete", n=4))) == Fraction(2, 3)
    assert conductance_exact(generate(GraphSpec("dumbbell", n=6))) == Fraction(1, 7)


def test_conductance_cap():
    with pytest.raises(TooLargeError):
        conductance_exact(generate(GraphSpec("complete", n=21)))


def test_weak_conductance_examples():
    assert weak_conductance_exact(generate(GraphSpec("complete", n=4)), 1) \
        == Fraction(2, 3)
    assert weak_conductance_exact(generate(GraphSpec("dumbbell", n=8)), 2) \
        == Fraction(2, 3)
    assert weak_conductance_exact(generate(GraphSpec("c_barbell", n=9, c=3)), 3) == 1


def test_weak_conductance_at_c1_equals_conductance():
    for spec in (GraphSpec("dumbbell", n=8), GraphSpec("path", n=7),
                 GraphSpec("star", n=6),
                 GraphSpec("random_regular", n=10, d=3, seed=4)):
        g = generate(spec)
        assert weak_conductance_exact(g, 1) == conductance_exact(g)


def test_c_barbell_conductance_matches_bridge_cut():
    # overall conductance is the bridge cut against one side's volume
    for n, c in ((8, 2), (12, 2), (12, 3)):
        g = generate(GraphSpec("c_barbell", n=n, c=c))
        m = n // c
        # one clique of the end: vol = m(m-1) + 1 bridge endpoint
        phi = conductance_exact(g)
        assert phi == Fraction(1, m * (m - 1) + 1)


def test_edgelist_roundtrip(tmp_path):
    for spec in (GraphSpec("dumbbell", n=10),
                 GraphSpec("erdos_renyi", n=12, p=0.5, seed=9),
                 GraphSpec("path", n=6, weighted=True, seed=3)):
        g = generate(spec)
        p = tmp_path / "g.txt"
        save_edgelist(g, p)
        h = load_edgelist(p)
        assert list(g.edges()) == list(h.edges())
        assert g.weights == h.weights


def test_edgelist_parse_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 1\n1 x\n")
    with pytest.raises(EdgeListParseError) as ei:
        load_edgelist(p)
    assert ei.value.lineno == 2
    p.write_text("4 2\n1 2\n3 4\n")
    with pytest.raises(GraphError):
        load_edgelist(p)  # disconnected


def test_weights_distinct():
    g = generate(GraphSpec("complete", n=12, seed=8, weighted=True))
    ws = list(g.weights.values())
    assert len(set(ws)) == len(ws)
    assert all(1 <= w <= 12 ** 4 for w in ws)

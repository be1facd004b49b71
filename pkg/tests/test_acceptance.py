"""Acceptance suite: ten criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
complete.  Every criterion runs at its stated tolerance with frozen seeds;
the whole module is deterministic.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest

from gossipsim.config import DEFAULTS
from gossipsim.engine import MessageBudget, congest_round_reference, \
    simulate_congest_round
from gossipsim.general import rumor_spread_general, sparsify
from gossipsim.graphs import GraphSpec, generate
from gossipsim.harness import (ExperimentConfig, family_weakcond_params,
                               run_suite, summarize)
from gossipsim.applications import (AggregateSpec, aggregate,
                                    extract_spanning_tree, mst)
from gossipsim.primitives import true_labels
from gossipsim.sketch import SketchParams, fresh_seed, node_sketch, \
    sample_cut_edge, set_sketch
from gossipsim.weakcond import rumor_spread_weakcond, setup

from oracles import all_pairs_hops, check_forest, components_of, kruskal, \
    true_cut

GRID_FAMILIES = ("dumbbell", "c_barbell", "path", "complete", "random_regular")
GRID_SIZES = (64, 256, 1024)
GRID_SEEDS = 100
BASE = 4000


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def _spread_ok(tr, source) -> bool:
    out = tr.outputs
    if not bool((out["rumor"][1:] == source).all()):
        return False
    first = out["first_from"]
    if (first[1:] < 0).any():
        return False
    depth, rid = true_labels(np.asarray(first))
    return bool((rid[1:] == source).all())


@pytest.fixture(scope="module")
def weakcond_grid():
    """Criterion-1 weakcond leg, run directly so merge invariants are visible."""
    t0 = time.time()
    results = {}
    budget_flags = []
    merge_violations = 0
    cfg = ExperimentConfig()
    for fam in GRID_FAMILIES:
        for n in GRID_SIZES:
            c, phi = family_weakcond_params(fam, n, cfg)
            good = 0
            for s in range(GRID_SEEDS):
                seed = BASE + s
                g = generate(GraphSpec(
                    fam, n=n, c=4 if fam == "c_barbell" else 0,
                    d=3 if fam == "random_regular" else 0, seed=seed))
                budget = MessageBudget(g.id_bound)
                source = 1 + seed % n
                tr = rumor_spread_weakcond(g, source, c, phi, seed=seed,
                                           budget=budget)
                ok = _spread_ok(tr, source)
                good += ok
                budget_flags.append(tr.max_message_bits <= budget.max_bits)
                if ok:
                    k = tr.outputs["initial_clusters"]
                    for i, sizes in tr.outputs["phase_cluster_counts"]:
                        if i >= 1 and sizes and min(sizes) < min(2 ** i, k):
                            merge_violations += 1
            results[(fam, n)] = good
    return dict(results=results, elapsed=time.time() - t0,
                budget_ok=all(budget_flags), merge_violations=merge_violations)


@pytest.fixture(scope="module")
def general_grid():
    t0 = time.time()
    cfg = ExperimentConfig(algorithm="general", families=GRID_FAMILIES,
                           sizes=GRID_SIZES, seeds=GRID_SEEDS, base_seed=BASE)
    rows = run_suite(cfg)
    return dict(rows=rows, elapsed=time.time() - t0)


@pytest.fixture(scope="module")
def scaling_runs():
    out = {}
    for alg in ("weakcond", "uniform_gossip"):
        cfg = ExperimentConfig(algorithm=alg, families=("dumbbell",),
                               sizes=(128, 256, 512, 1024), seeds=30,
                               base_seed=2000)
        out[alg] = run_suite(cfg)
    return out


@pytest.fixture(scope="module")
def general_scaling_runs():
    out = {}
    out["path"] = run_suite(ExperimentConfig(
        algorithm="general", families=("path",), sizes=(256, 512, 1024),
        seeds=20, base_seed=3000))
    out["rr"] = run_suite(ExperimentConfig(
        algorithm="general", families=("random_regular",), sizes=(1024, 4096),
        seeds=20, base_seed=3000))
    return out


def test_criterion_1_correctness(weakcond_grid, general_grid):
    """Rumor reaches all nodes and yields a spanning tree, >= 99/100 seeds."""
    fails = []
    for (fam, n), good in weakcond_grid["results"].items():
        if good < 99:
            fails.append(f"weakcond/{fam}/{n}: {good}/100")
    by_point = Counter()
    for r in general_grid["rows"]:
        by_point[(r["family"], r["n"])] += r["success"]
    for (fam, n), good in by_point.items():
        if good < 99:
            fails.append(f"general/{fam}/{n}: {good}/100")
    elapsed = weakcond_grid["elapsed"] + general_grid["elapsed"]
    ok = not fails and elapsed <= 1800
    _report("criterion 1 (correctness grid)", ok,
            f"30 points x 100 seeds, worst {min(list(weakcond_grid['results'].values()) + list(by_point.values()))}/100, "
            f"grid time {elapsed:.0f}s" + ("" if not fails else f"; fails: {fails}"))
    assert ok


def test_criterion_2_weak_conductance_scaling(scaling_runs):
    """Dumbbell doubling ratios: weakcond stays <= 1.35, push-pull hits >= 1.7."""
    rep_w = summarize(scaling_runs["weakcond"])
    rep_u = summarize(scaling_runs["uniform_gossip"])
    rw = rep_w["ratios"]["weakcond/dumbbell"]
    ru = rep_u["ratios"]["uniform_gossip/dumbbell"]
    ok = max(rw) <= 1.35 and max(ru) >= 1.7
    _report("criterion 2 (weak-conductance scaling)", ok,
            f"weakcond ratios {[round(x, 3) for x in rw]} (all <= 1.35), "
            f"push-pull ratios {[round(x, 3) for x in ru]} (max >= 1.7)")
    assert ok


def test_criterion_3_general_scaling(general_scaling_runs):
    """Rounds track n log^2 n on paths and sqrt(n) log^2 n on 3-regular graphs."""
    rep_p = summarize(general_scaling_runs["path"])["series"][0]
    norm_p = [m / (n * math.log2(n) ** 2)
              for m, n in zip(rep_p["medians"], rep_p["sizes"])]
    rep_r = summarize(general_scaling_runs["rr"])["series"][0]
    norm_r = [m / (math.sqrt(n) * math.log2(n) ** 2)
              for m, n in zip(rep_r["medians"], rep_r["sizes"])]
    sp_p = max(norm_p) / min(norm_p)
    sp_r = max(norm_r) / min(norm_r)
    ok = sp_p <= 2.0 and sp_r <= 2.0 \
        and all(s == r for s, r in zip(rep_p["successes"], rep_p["runs"])) \
        and all(s == r for s, r in zip(rep_r["successes"], rep_r["runs"]))
    _report("criterion 3 (general-graph scaling)", ok,
            f"path rounds/(n log^2 n) spread {sp_p:.2f}x, "
            f"3-regular rounds/(sqrt(n) log^2 n) spread {sp_r:.2f}x (both <= 2x)")
    assert ok


def test_criterion_4_sketch_statistics():
    """delta=0.05 sampler: success >= 0.93, zero unsound edges, uniform on 8."""
    g = generate(GraphSpec("random_regular", n=64, d=4, seed=1))
    budget = 1 << 20
    violations = 0
    successes = 0
    trials = 10_000
    for t in range(trials):
        p = SketchParams(shared_seed=fresh_seed(61, t), id_bound=64 * 64,
                         max_id=64, delta=0.05, budget_bits=budget)
        members = [v for v in range(1, 65) if (v * 977 + t * 131) % 7 < 3]
        if not (0 < len(members) < 64):
            members = [1, 2, 3]
        s = set_sketch(members, g.edge_u, g.edge_v, None, p)
        e = sample_cut_edge(s)
        if e is None:
            continue
        if e not in true_cut(g, members):
            violations += 1
        else:
            successes += 1
    rate = successes / trials

    freq = Counter()
    got = 0
    big_trials = 100_000
    for t in range(big_trials):
        p = SketchParams(shared_seed=fresh_seed(62, t), id_bound=4096,
                         max_id=64, delta=0.05, budget_bits=budget)
        e = sample_cut_edge(node_sketch(1, [(1, u) for u in range(2, 10)],
                                        None, p))
        if e is not None:
            if e[0] != 1 or not (2 <= e[1] <= 9):
                violations += 1
            freq[e] += 1
            got += 1
    se = math.sqrt((1 / 8) * (7 / 8) / got)
    worst = max(abs(cnt / got - 1 / 8) for cnt in freq.values())
    ok = rate >= 0.93 and violations == 0 and worst <= 5 * se \
        and len(freq) == 8
    _report("criterion 4 (sketch statistics)", ok,
            f"success {rate:.4f} (>=0.93), {violations} unsound edges, "
            f"worst 8-cut deviation {worst:.5f} vs 5se={5 * se:.5f}")
    assert ok


def test_criterion_5_setup_guarantees():
    """Setup yields <= floor(c) clusters of depth <= 2T covering everything."""
    points = []
    for fam, c in (("dumbbell", 2), ("c_barbell", 4)):
        for n in GRID_SIZES:
            cfg = ExperimentConfig(barbell_c=4)
            cval, phi = family_weakcond_params(fam, n, cfg)
            T = DEFAULTS.T(n, phi)
            g = generate(GraphSpec(fam, n=n, c=4 if fam == "c_barbell" else 0))
            good = 0
            for s in range(100):
                f = setup(g, cval, phi, seed=BASE + s)
                check_forest(f.parent)
                ok = (len(f.roots()) <= int(cval) and f.covered[1:].all()
                      and f.max_depth() <= 2 * T)
                good += ok
            points.append((fam, n, good))
    worst = min(p[2] for p in points)
    ok = worst >= 99
    _report("criterion 5 (set-up guarantees)", ok,
            f"6 points x 100 seeds, worst {worst}/100 "
            f"(roots <= c, depth <= 2T, full coverage)")
    assert ok


def test_criterion_6_merging_invariant(weakcond_grid):
    """Every super cluster holds >= min(2^i, k) clusters at phase i's end."""
    v = weakcond_grid["merge_violations"]
    ok = v == 0
    _report("criterion 6 (merging invariant)", ok,
            f"{v} violations across all accepted weakcond runs of criterion 1")
    assert ok


def test_criterion_7_sparse_subgraph_properties():
    """Definition checks: components, diameter sum, degree, stretch."""
    cfg = DEFAULTS
    fams = (("dumbbell", {}), ("path", {}), ("random_regular", dict(d=3)),
            ("erdos_renyi", dict(p=0.03)))
    n = 512
    kappa = math.ceil(cfg.kappa_const * math.sqrt(n) * math.log(n))
    deg_cap = cfg.c_deg * math.ceil(math.log2(n))
    str_cap = cfg.c_str * math.ceil(math.log2(n))
    hard_fails = 0
    soft_fails = 0
    runs = 0
    for fam, kw in fams:
        for s in range(25):
            runs += 1
            g = generate(GraphSpec(fam, n=n, seed=700 + s, **kw))
            sub = sparsify(g, 0.5, seed=700 + s)
            el = [(int(g.edge_u[i]), int(g.edge_v[i]))
                  for i in np.nonzero(sub.el_mask)[0]]
            elp = [(int(g.edge_u[i]), int(g.edge_v[i]))
                   for i in np.nonzero(sub.elp_mask)[0]]
            ehbar = [(int(g.edge_u[i]), int(g.edge_v[i]))
                     for i in np.nonzero(~sub.el_mask)[0]]
            # hard (every run): edge subsets, forest, components, diam sum
            check_forest(sub.hbar_parent)
            prime = set(sub.ehbar_prime_edges())
            if not prime <= set(ehbar) or not set(elp) <= set(el):
                hard_fails += 1
                continue
            if not _partitions_equal(components_of(n, ehbar),
                                     components_of(n, prime), n) \
                    or not _partitions_equal(components_of(n, el),
                                             components_of(n, elp), n):
                hard_fails += 1
                continue
            depth, rid = true_labels(sub.hbar_parent)
            dsum = sum(2 * int(depth[rid == r].max())
                       for r in np.nonzero(sub.hbar_parent == 0)[0]
                       if (rid == r).any())
            if dsum > kappa:
                hard_fails += 1
                continue
            # statistical (>= 97%): degree and stretch caps
            degp = np.zeros(n + 1, dtype=int)
            for u, v in elp:
                degp[u] += 1
                degp[v] += 1
            soft = degp.max() <= deg_cap
            if soft and el:
                dl = all_pairs_hops(n, el)
                dlp = all_pairs_hops(n, elp)
                finite = np.isfinite(dl) & (dl > 0)
                soft = np.isfinite(dlp[finite]).all() and \
                    float((dlp[finite] / dl[finite]).max()) <= str_cap
            soft_fails += not soft
    ok = hard_fails == 0 and soft_fails <= 0.03 * runs
    _report("criterion 7 (sparse subgraph)", ok,
            f"{runs} runs: {hard_fails} structural failures, "
            f"{soft_fails} degree/stretch cap misses (allowed {int(0.03 * runs)})")
    assert ok


def _partitions_equal(a, b, n):
    seen = {}
    for v in range(1, n + 1):
        if a[v] in seen and seen[a[v]] != b[v]:
            return False
        seen[a[v]] = b[v]
    return True


def test_criterion_8_congest_fidelity():
    """Simulated transcript equals the direct CONGEST executor's, exactly."""
    mismatches = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 129))
        g = generate(GraphSpec("erdos_renyi", n=n,
                               p=min(0.9, 3.0 / math.sqrt(n)), seed=seed))
        sub = [e for e in g.edges() if rng.random() < 0.6]
        cover = set()
        for u, v in sub:
            if u not in cover and v not in cover:
                cover.add(int(u if rng.random() < 0.5 else v))
        outbox = {}
        for u, v in sub:
            outbox.setdefault(u, {})[v] = int(rng.integers(1, 1 << 20))
            outbox.setdefault(v, {})[u] = int(rng.integers(1, 1 << 20))
        if not sub:
            continue
        delta = max(sum(1 for e in sub if w in e) for w in cover)
        res = simulate_congest_round(g, sub, cover, delta, outbox)
        if res.delivered != congest_round_reference(sub, outbox) \
                or res.rounds > delta:
            mismatches += 1
    ok = mismatches == 0
    _report("criterion 8 (CONGEST simulation fidelity)", ok,
            f"50 random instances (n <= 128), {mismatches} transcript mismatches")
    assert ok


def test_criterion_9_budget_compliance(weakcond_grid, general_grid,
                                       scaling_runs, general_scaling_runs):
    """Every message in criteria 1-3 fits 64 ceil(log2 N)^2 bits."""
    checked = 0
    worst = 0.0
    bad = 0
    for rows in ([general_grid["rows"]] + list(scaling_runs.values())
                 + list(general_scaling_runs.values())):
        for r in rows:
            if r["error"]:
                continue
            cap = MessageBudget(r["n"] * r["n"]).max_bits
            checked += 1
            worst = max(worst, r["max_message_bits"] / cap)
            bad += r["max_message_bits"] > cap
    ok = bad == 0 and weakcond_grid["budget_ok"]
    _report("criterion 9 (message budget)", ok,
            f"{checked} harness runs + weakcond grid, {bad} violations, "
            f"fullest message at {worst:.3f} of budget")
    assert ok


def test_criterion_10_mst_and_aggregates():
    """MST equals Kruskal on 200 random graphs; aggregates are exact."""
    mst_bad = 0
    for s in range(200):
        n = 16 + (s % 8) * 16  # 16 .. 128
        fam = ("erdos_renyi", "random_regular")[s % 2]
        kw = dict(p=0.2) if fam == "erdos_renyi" else dict(d=4)
        g = generate(GraphSpec(fam, n=n, seed=900 + s, weighted=True, **kw))
        edges, _ = mst(g, seed=900 + s)
        if edges != kruskal(g):
            mst_bad += 1
    agg_bad = 0
    for s in range(20):
        g = generate(GraphSpec("dumbbell", n=64, seed=s))
        tr = rumor_spread_general(g, 1 + s % 64, seed=s)
        tree = extract_spanning_tree(g, tr)
        vals = {v: (v * 2654435761 + s) % 10 ** 6 for v in range(1, 65)}
        for op, want in (("sum", sum(vals.values())),
                         ("min", min(vals.values())),
                         ("max", max(vals.values())),
                         ("count", 64)):
            out, _ = aggregate(g, AggregateSpec(op), vals, tree, seed=s)
            if out[1] != want or out[64] != want:
                agg_bad += 1
    ok = mst_bad == 0 and agg_bad == 0
    _report("criterion 10 (MST and aggregates)", ok,
            f"200 MST instances: {mst_bad} oracle mismatches; "
            f"80 aggregate checks: {agg_bad} inexact")
    assert ok

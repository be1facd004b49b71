"""Experiment runner: sweeps (algorithm x family x size x seed), runs each
point, verifies success against ground truth, and writes deterministic CSV
and JSON summaries.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .engine import MessageBudget, SimulationError
from .graphs import Graph, GraphSpec, generate
from .applications import extract_spanning_tree, mst, SpreadIncompleteError

ALGORITHMS = ("uniform_gossip", "weakcond", "general", "mst", "leader",
              "aggregate")


class ConfigError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str = "general"
    families: tuple = ("dumbbell",)
    sizes: tuple = (128,)
    seeds: int = 10
    base_seed: int = 1000
    c: float = 0.0            # 0 = analytic per-family default
    phi_c: float = 0.0        # 0 = analytic per-family default
    d: int = 3                # degree for random_regular
    barbell_c: int = 4        # clique count for c_barbell
    p: float = 0.0            # edge probability for erdos_renyi
    delta_exp: float = 0.5
    alpha: float = DEFAULTS.alpha
    budget_const: int = DEFAULTS.budget_const
    max_rounds: int = 0       # 0 = algorithm-derived bound
    jobs: int = 1

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        for f in self.families:
            if f not in ("dumbbell", "c_barbell", "expander_barbell", "path",
                         "complete", "star", "random_regular", "erdos_renyi"):
                raise ConfigError(f"unknown family {f!r}")
        if self.seeds < 0:
            raise ConfigError("seeds must be >= 0")


_COLUMNS = ("algorithm", "family", "n", "seed", "rounds", "messages",
            "total_bits", "max_message_bits", "success", "error", "phases")


def clique_conductance(m: int) -> Fraction:
    return Fraction(math.ceil(m / 2), m - 1) if m > 1 else Fraction(1)


def family_weakcond_params(family: str, n: int, cfg: ExperimentConfig):
    """Analytic (c, weak conductance) per benchmark family.

    For random families a conservative lower bound on the conductance is
    used; the algorithm stays correct with any lower bound.
    """
    if cfg.c and cfg.phi_c:
        return cfg.c, cfg.phi_c
    if family == "dumbbell":
        return 2.0, float(clique_conductance(n // 2))
    if family == "c_barbell":
        return float(cfg.barbell_c), float(clique_conductance(n // cfg.barbell_c))
    if family == "complete":
        return 1.0, float(clique_conductance(n))
    if family == "path":
        return 1.0, 1.0 / max(n - 1, 1)
    if family == "star":
        return 1.0, 1.0
    if family == "random_regular":
        return 1.0, 1.0 / 64.0
    if family == "expander_barbell":
        return float(cfg.barbell_c), 1.0 / 64.0
    if family == "erdos_renyi":
        return 1.0, 1.0 / 64.0
    raise ConfigError(f"no analytic parameters for family {family!r}")


def graph_spec(family: str, n: int, seed: int, cfg: ExperimentConfig,
               weighted: bool = False) -> GraphSpec:
    return GraphSpec(
        family=family, n=n,
        c=cfg.barbell_c if family in ("c_barbell", "expander_barbell") else 0,
        d=cfg.d if family in ("random_regular", "expander_barbell") else 0,
        p=cfg.p or (2 * math.log(max(n, 2)) / n) if family == "erdos_renyi" else 0.0,
        seed=seed, weighted=weighted)


def run_point(cfg: ExperimentConfig, family: str, n: int, seed: int) -> dict:
    """Execute one run and verify its outcome against ground truth."""
    sim_cfg = DEFAULTS.with_(alpha=cfg.alpha, budget_const=cfg.budget_const)
    row = {"algorithm": cfg.algorithm, "family": family, "n": n, "seed": seed,
           "rounds": 0, "messages": 0, "total_bits": 0, "max_message_bits": 0,
           "success": 0, "error": "", "phases": ""}
    try:
        spec = graph_spec(family, n, seed, cfg, weighted=cfg.algorithm == "mst")
        g = generate(spec)
        budget = MessageBudget(g.id_bound, cfg.budget_const)
        source = 1 + (seed % g.n)
        if cfg.algorithm == "uniform_gossip":
            from .primitives import push_pull
            informed, trace = push_pull(g, source, seed=seed, budget=budget,
                                        cfg=sim_cfg)
            success = bool(informed[1:].all())
        elif cfg.algorithm == "weakcond":
            from .weakcond import rumor_spread_weakcond
            c, phi = family_weakcond_params(family, n, cfg)
            trace = rumor_spread_weakcond(g, source, c, phi, cfg=sim_cfg,
                                          seed=seed, budget=budget)
            success = _spread_success(g, trace, source)
        elif cfg.algorithm == "general":
            from .general import rumor_spread_general
            trace = rumor_spread_general(g, source, cfg=sim_cfg, seed=seed,
                                         budget=budget)
            success = _spread_success(g, trace, source)
        elif cfg.algorithm == "mst":
            edges, trace = mst(g, cfg=sim_cfg, seed=seed, budget=budget)
            success = edges == _kruskal(g)
        elif cfg.algorithm == "leader":
            from .applications import leader_election
            leaders, trace, tree = leader_election(
                g, "general", source=source, cfg=sim_cfg, seed=seed,
                budget=budget)
            success = len(set(leaders.values())) == 1 \
                and leaders[1] == tree.roots()[0]
        elif cfg.algorithm == "aggregate":
            from .applications import AggregateSpec, aggregate
            from .general import rumor_spread_general
            tr0 = rumor_spread_general(g, source, cfg=sim_cfg, seed=seed,
                                       budget=budget)
            tree = extract_spanning_tree(g, tr0)
            values = {v: (v * 7919) % 104729 for v in range(1, g.n + 1)}
            out, trace = aggregate(g, AggregateSpec("sum"), values, tree,
                                   cfg=sim_cfg, seed=seed, budget=budget)
            success = out[1] == sum(values.values())
        else:
            raise ConfigError(cfg.algorithm)
        row.update(rounds=trace.rounds_used, messages=trace.messages_sent,
                   total_bits=trace.total_bits,
                   max_message_bits=trace.max_message_bits,
                   success=int(success),
                   phases=json.dumps(trace.phase_marks[:8], separators=(",", ":")))
    except (SimulationError, SpreadIncompleteError, ValueError) as e:
        row["error"] = f"{type(e).__name__}"
    return row


def _spread_success(g: Graph, trace, source: int) -> bool:
    out = trace.outputs
    rumor = out.get("rumor")
    if rumor is None or not bool((np.asarray(rumor)[1:] == source).all()):
        return False
    try:
        tree = extract_spanning_tree(g, trace)
    except SpreadIncompleteError:
        return False
    return len(tree.roots()) == 1 and len(tree.members()) == g.n


def _kruskal(g: Graph) -> set:
    edges = sorted((w, u, v) for (u, v), w in g.weights.items())
    up = list(range(g.n + 1))

    def find(a):
        while up[a] != a:
            up[a] = up[up[a]]
            a = up[a]
        return a

    out = set()
    for w, u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            up[ru] = rv
            out.add((u, v))
    return out


def _run_star(args):
    return run_point(*args)


def run_suite(cfg: ExperimentConfig, out_csv: Optional[str] = None,
              progress: bool = False) -> list[dict]:
    """One row per (family, size, seed), in deterministic order.

    With an output path, finished rows are flushed as they complete, so a
    partial CSV survives interruption; the final file is order-canonical.
    """
    cfg.validate()
    points = [(cfg, fam, n, cfg.base_seed + s)
              for fam in cfg.families for n in cfg.sizes
              for s in range(cfg.seeds)]
    if cfg.jobs > 1 and len(points) > 1:
        with multiprocessing.Pool(cfg.jobs) as pool:
            rows = pool.map(_run_star, points, chunksize=1)
    else:
        rows = []
        partial = None
        if out_csv:
            partial = open(out_csv, "w", newline="")
            writer = csv.DictWriter(partial, fieldnames=_COLUMNS,
                                    lineterminator="\n")
            writer.writeheader()
        try:
            for i, pt in enumerate(points):
                row = run_point(*pt)
                rows.append(row)
                if partial:
                    writer.writerow({k: row.get(k, "") for k in _COLUMNS})
                    partial.flush()
                if progress and (i + 1) % 25 == 0:
                    print(f"  {i + 1}/{len(points)} runs done", flush=True)
        finally:
            if partial:
                partial.close()
    rows.sort(key=lambda r: (r["algorithm"], r["family"], r["n"], r["seed"]))
    if out_csv:
        write_csv(rows, out_csv)
    return rows


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in _COLUMNS})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for r in csv.DictReader(fh):
            for k in ("n", "seed", "rounds", "messages", "total_bits",
                      "max_message_bits", "success"):
                r[k] = int(r[k])
            rows.append(r)
        return rows


def summarize(rows: list[dict], require_ratios: bool = False) -> dict:
    """Per-(algorithm, family) medians by size plus growth ratios per doubling.

    Ratios exist only for successive size doublings; with require_ratios a
    multi-size series without any doubling raises InsufficientDataError.
    """
    series: dict[tuple, dict[int, list[int]]] = {}
    ok: dict[tuple, dict[int, int]] = {}
    for r in rows:
        if r["error"]:
            continue
        key = (r["algorithm"], r["family"])
        series.setdefault(key, {}).setdefault(r["n"], []).append(r["rounds"])
        ok.setdefault(key, {}).setdefault(r["n"], 0)
        ok[key][r["n"]] += r["success"]
    report = {"series": [], "ratios": {}}
    for (alg, fam), by_n in sorted(series.items()):
        sizes = sorted(by_n)
        medians = {n: float(np.median(by_n[n])) for n in sizes}
        entry = {
            "algorithm": alg, "family": fam,
            "sizes": sizes,
            "medians": [medians[n] for n in sizes],
            "q25": [float(np.quantile(by_n[n], 0.25)) for n in sizes],
            "q75": [float(np.quantile(by_n[n], 0.75)) for n in sizes],
            "successes": [ok[(alg, fam)][n] for n in sizes],
            "runs": [len(by_n[n]) for n in sizes],
        }
        ratios = []
        for a, b in zip(sizes, sizes[1:]):
            if b == 2 * a and medians[a] > 0:
                ratios.append(medians[b] / medians[a])
        if require_ratios and len(sizes) >= 2 and not ratios:
            raise InsufficientDataError(
                f"{alg}/{fam}: sizes {sizes} are not successive doublings")
        entry["doubling_ratios"] = ratios
        report["series"].append(entry)
        if ratios:
            report["ratios"][f"{alg}/{fam}"] = ratios
    report["checks"] = _acceptance_checks(report["series"])
    return report


def _acceptance_checks(series: list[dict]) -> list[dict]:
    """Verdicts for the scaling/success checks a summary can decide."""
    checks = []
    for s in series:
        key = f"{s['algorithm']}/{s['family']}"
        rate_ok = all(g >= math.ceil(0.99 * r)
                      for g, r in zip(s["successes"], s["runs"]) if r)
        checks.append({"check": f"success-rate {key}", "passed": bool(rate_ok)})
        ratios = s["doubling_ratios"]
        if not ratios:
            continue
        if s["algorithm"] == "weakcond":
            checks.append({"check": f"log-growth {key} (ratios <= 1.35)",
                           "passed": bool(max(ratios) <= 1.35)})
        if s["algorithm"] == "uniform_gossip":
            checks.append({"check": f"linear-growth {key} (max ratio >= 1.7)",
                           "passed": bool(max(ratios) >= 1.7)})
        if s["algorithm"] == "general":
            norm = None
            if s["family"] == "path":
                norm = [m / (n * math.log2(n) ** 2)
                        for m, n in zip(s["medians"], s["sizes"])]
            elif s["family"] == "random_regular":
                norm = [m / (math.sqrt(n) * math.log2(n) ** 2)
                        for m, n in zip(s["medians"], s["sizes"])]
            if norm and min(norm) > 0:
                checks.append({
                    "check": f"normalized-rounds {key} (spread <= 2x)",
                    "passed": bool(max(norm) / min(norm) <= 2.0)})
    return checks


# -- config file parsing ------------------------------------------------------


def parse_config(path: Optional[str] = None,
                 overrides: Optional[list[str]] = None) -> ExperimentConfig:
    """Key = value lines; '#' comments; arrays comma-separated."""
    raw: dict[str, str] = {}
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                k, v = line.split("=", 1)
                raw[k.strip()] = v.strip()
    for ov in overrides or ():
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not key=value")
        k, v = ov.split("=", 1)
        raw[k.strip()] = v.strip()
    kw: dict = {}
    for k, v in raw.items():
        if k in ("families",):
            kw[k] = tuple(x.strip() for x in v.split(",") if x.strip())
        elif k in ("sizes",):
            kw[k] = tuple(int(x) for x in v.split(",") if x.strip())
        elif k in ("seeds", "base_seed", "d", "barbell_c", "budget_const",
                   "max_rounds", "jobs"):
            kw[k] = int(v)
        elif k in ("c", "phi_c", "p", "delta_exp", "alpha"):
            kw[k] = float(v)
        elif k == "algorithm":
            kw[k] = v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    cfg = ExperimentConfig(**kw)
    cfg.validate()
    return cfg

"""Command-line harness: run experiment sweeps, summarize results, and
generate benchmark graphs as edge-list files."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .graphs import GraphSpec, generate, save_edgelist
from .harness import parse_config, read_csv, run_suite, summarize, write_csv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gossipsim",
                                 description="gossip network experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    rp = sub.add_parser("run", help="run an experiment sweep")
    rp.add_argument("--config", help="experiment config file")
    rp.add_argument("--override", action="append", default=[],
                    metavar="K=V", help="override a config key")
    rp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("summarize", help="aggregate results into a report")
    sp.add_argument("--in", dest="indir", required=True,
                    help="directory holding results.csv")
    sp.add_argument("--out", required=True, help="report json path")

    gp = sub.add_parser("graph", help="graph utilities")
    gsub = gp.add_subparsers(dest="gcmd", required=True)
    gg = gsub.add_parser("gen", help="generate a benchmark graph")
    gg.add_argument("--family", required=True)
    gg.add_argument("--n", type=int, required=True)
    gg.add_argument("--c", type=int, default=0)
    gg.add_argument("--d", type=int, default=0)
    gg.add_argument("--p", type=float, default=0.0)
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--weighted", action="store_true")
    gg.add_argument("--out", required=True, help="edge list path")

    args = ap.parse_args(argv)

    if args.cmd == "run":
        cfg = parse_config(args.config, args.override)
        os.makedirs(args.out, exist_ok=True)
        rows = run_suite(cfg, progress=True)
        path = os.path.join(args.out, "results.csv")
        write_csv(rows, path)
        n_fail = sum(1 for r in rows if not r["success"])
        print(f"wrote {len(rows)} rows to {path} ({n_fail} unsuccessful)")
        return 0

    if args.cmd == "summarize":
        rows = read_csv(os.path.join(args.indir, "results.csv"))
        report = summarize(rows)
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
        return 0

    if args.cmd == "graph" and args.gcmd == "gen":
        spec = GraphSpec(family=args.family, n=args.n, c=args.c, d=args.d,
                         p=args.p, seed=args.seed, weighted=args.weighted)
        g = generate(spec)
        save_edgelist(g, args.out)
        print(f"wrote {g.n} nodes, {g.m} edges to {args.out}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())

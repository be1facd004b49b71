"""Experiment runner: configs, determinism, summaries, CLI plumbing."""

import json

import pytest

from gossipsim.cli import main as cli_main
from gossipsim.harness import (ConfigError, ExperimentConfig,
                               InsufficientDataError, family_weakcond_params,
                               parse_config, read_csv, run_suite, summarize)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(algorithm="nope").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(families=("blob",)).validate()


def test_parse_config_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("""
# comment
algorithm = weakcond
families = dumbbell, complete
sizes = 64, 128
seeds = 3
base_seed = 77
""")
    cfg = parse_config(p)
    assert cfg.algorithm == "weakcond"
    assert cfg.families == ("dumbbell", "complete")
    assert cfg.sizes == (64, 128)
    cfg2 = parse_config(p, overrides=["seeds=5", "algorithm=general"])
    assert cfg2.seeds == 5 and cfg2.algorithm == "general"
    with pytest.raises(ConfigError):
        parse_config(p, overrides=["nonsense"])
    p.write_text("mystery = 4\n")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_empty_sweep(tmp_path):
    cfg = ExperimentConfig(algorithm="uniform_gossip", families=(), sizes=())
    rows = run_suite(cfg, out_csv=tmp_path / "r.csv")
    assert rows == []
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[0].startswith("algorithm,family,n,seed,rounds")


def test_rows_and_determinism(tmp_path):
    cfg = ExperimentConfig(algorithm="uniform_gossip", families=("dumbbell",),
                           sizes=(64, 128), seeds=5, base_seed=10)
    rows = run_suite(cfg, out_csv=tmp_path / "a.csv")
    assert len(rows) == 10
    assert all(r["rounds"] > 0 and r["success"] for r in rows)
    run_suite(cfg, out_csv=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_csv(tmp_path / "a.csv")
    assert [r["rounds"] for r in back] == [r["rounds"] for r in rows]


def test_success_recomputed_from_ground_truth():
    cfg = ExperimentConfig(algorithm="general", families=("path",),
                           sizes=(32,), seeds=2)
    rows = run_suite(cfg)
    assert all(r["success"] == 1 for r in rows)


def test_summarize_ratios():
    rows = []
    for n, med in ((64, 10), (128, 20), (256, 40)):
        for s in range(3):
            rows.append(dict(algorithm="x", family="f", n=n, seed=s,
                             rounds=med, messages=1, total_bits=1,
                             max_message_bits=1, success=1, error="",
                             phases=""))
    rep = summarize(rows)
    assert rep["ratios"]["x/f"] == [2.0, 2.0]
    series = rep["series"][0]
    assert series["medians"] == [10.0, 20.0, 40.0]


def test_summarize_constant_series_ratio_one():
    rows = [dict(algorithm="x", family="f", n=n, seed=s, rounds=12, messages=1,
                 total_bits=1, max_message_bits=1, success=1, error="",
                 phases="") for n in (32, 64) for s in range(2)]
    rep = summarize(rows)
    assert rep["ratios"]["x/f"] == [1.0]


def test_summarize_emits_check_verdicts():
    rows = []
    for n, med in ((64, 10), (128, 11)):
        rows.append(dict(algorithm="weakcond", family="dumbbell", n=n, seed=0,
                         rounds=med, messages=1, total_bits=1,
                         max_message_bits=1, success=1, error="", phases=""))
    rep = summarize(rows)
    names = {c["check"]: c["passed"] for c in rep["checks"]}
    assert names["success-rate weakcond/dumbbell"]
    assert names["log-growth weakcond/dumbbell (ratios <= 1.35)"]


def test_summarize_requires_doublings():
    rows = [dict(algorithm="x", family="f", n=n, seed=0, rounds=5, messages=1,
                 total_bits=1, max_message_bits=1, success=1, error="",
                 phases="") for n in (64, 96)]
    with pytest.raises(InsufficientDataError):
        summarize(rows, require_ratios=True)
    assert summarize(rows)["series"][0]["doubling_ratios"] == []


def test_weakcond_params_per_family():
    c, phi = family_weakcond_params("dumbbell", 128, ExperimentConfig())
    assert c == 2.0 and 0.4 < phi < 0.6
    c, phi = family_weakcond_params("path", 128, ExperimentConfig())
    assert c == 1.0 and phi == 1 / 127
    c, phi = family_weakcond_params("random_regular", 128, ExperimentConfig())
    assert phi <= 1 / 16  # conservative lower bound


def test_error_rows_carry_label():
    cfg = ExperimentConfig(algorithm="mst", families=("path",), sizes=(0,),
                           seeds=1)
    rows = run_suite(cfg)
    assert rows[0]["error"] != "" and rows[0]["success"] == 0


def test_cli_run_and_summarize(tmp_path):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text(
        "algorithm = uniform_gossip\nfamilies = complete\nsizes = 32, 64\n"
        "seeds = 4\n")
    out = tmp_path / "out"
    assert cli_main(["run", "--config", str(cfgfile), "--out", str(out)]) == 0
    assert (out / "results.csv").exists()
    report = tmp_path / "report.json"
    assert cli_main(["summarize", "--in", str(out), "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["series"][0]["runs"] == [4, 4]


def test_cli_graph_gen(tmp_path):
    out = tmp_path / "g.txt"
    rc = cli_main(["graph", "gen", "--family", "c_barbell", "--n", "12",
                   "--c", "3", "--out", str(out)])
    assert rc == 0
    from gossipsim.graphs import load_edgelist
    g = load_edgelist(out)
    assert g.n == 12 and g.m == 20

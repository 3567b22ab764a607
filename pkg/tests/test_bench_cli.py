import csv
import io
import json
import math
from pathlib import Path

import pytest

from approxcount.bench import COLUMNS, BenchConfig, BenchReport, bench_scripts, emit_report, run_bench
from approxcount.cli import load_config, main, parse_scripts
from approxcount.errors import RegimeError

GOLDEN = Path(__file__).parent / "data" / "alg1_n1_inc_read.jsonl"
SWEEP = [2**j for j in range(1, 17)]


@pytest.fixture(scope="module")
def alg1_sweep():
    return run_bench(BenchConfig(1, 2, SWEEP, 2, trials=3))


def test_alg1_sweep_signature(alg1_sweep):
    rows = alg1_sweep.rows
    # logNumIncrems tops out at log2(m) for n=2, k=2, and a Read is a single
    # MaxRead over the h+2 values -1..h
    assert [r["log_bound"] for r in rows] == list(range(1, 17))
    assert [r["read_bound"] for r in rows] == [math.ceil(math.log2(j + 2)) for j in range(1, 17)]
    assert [r["read_steps_max"] for r in rows] == [2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4, 4, 4]
    assert all(r["read_steps_max"] <= r["read_bound"] for r in rows)
    assert all(r["max_registers"] == 1 and r["exact_counters"] == 0 for r in rows)
    assert sum(r["violations"] for r in rows) == 0


def test_alg2_bucket_count():
    row = run_bench(BenchConfig(2, 4, [64], "3/2", trials=2)).rows[0]
    # X = 1/(k-1) = 2, so ceil(64 / (2*4)) = 8 buckets, each ceil(3*4) = 12-bounded
    assert row["exact_counters"] == 8
    assert row["bucket_bound"] == 12
    assert row["k"] == "3/2" and row["k_decimal"] == "1.5"
    assert row["violations"] == 0


def test_regime_gate_rejects_fractional_k_for_alg3():
    with pytest.raises(RegimeError, match="integer"):
        BenchConfig(3, 2, [16], "3/2")


@pytest.mark.parametrize("bad", [dict(ms=[]), dict(ms=[0]), dict(trials=0)])
def test_config_validation(bad):
    kw = dict(algorithm=1, n=2, ms=[4], k=2) | bad
    with pytest.raises(ValueError):
        BenchConfig(**kw)


def test_bench_scripts_split_and_spread():
    scripts = bench_scripts(3, 10, 2)
    assert [s.count("inc") for s in scripts] == [4, 3, 3]
    assert [s.count("read") for s in scripts] == [2, 2, 2]
    assert scripts[0] == ["inc", "inc", "read", "inc", "inc", "read"]
    assert bench_scripts(4, 2, 8)[3] == []


def test_empty_report_has_only_a_header():
    text = emit_report(BenchReport(), "csv")
    assert text == ",".join(COLUMNS) + "\n"
    assert json.loads(emit_report(BenchReport(), "json")) == {"columns": list(COLUMNS), "rows": []}


def test_csv_and_json_carry_the_same_fields():
    report = run_bench(BenchConfig(2, 2, [8], 2, trials=2))
    rows = list(csv.DictReader(io.StringIO(emit_report(report, "csv"))))
    assert len(rows) == 1
    doc = json.loads(emit_report(report, "json"))
    assert list(rows[0]) == doc["columns"] == list(COLUMNS)
    assert {k: str(v) for k, v in doc["rows"][0].items()} == rows[0]
    with pytest.raises(ValueError):
        emit_report(report, "xml")


def test_runs_are_deterministic():
    cfg = dict(algorithm=3, n=3, ms=[27, 81], k=3, seed=5, trials=4)
    assert emit_report(run_bench(BenchConfig(**cfg))) == emit_report(run_bench(BenchConfig(**cfg)))


def test_harness_engine_agrees_with_the_kernel_in_register_mode():
    cfg = BenchConfig(2, 2, [12], 2, seed=3, trials=5)
    kernel, harness = run_bench(cfg).rows[0], run_bench(cfg, engine="harness").rows[0]
    for key in ("read_steps_max", "read_steps_mean", "inc_steps_max", "inc_steps_mean", "quiescent_reads",
                "max_ratio", "base_registers"):
        assert kernel[key] == harness[key], key


def test_atomic_mode_uses_the_harness():
    cfg = BenchConfig(2, 2, [8], 2, mode="atomic", trials=2)
    row = run_bench(cfg).rows[0]
    assert row["engine"] == "harness" and row["atomic_objects"] > 0
    with pytest.raises(ValueError):
        run_bench(cfg, engine="kernel")


def test_parse_scripts():
    assert parse_scripts("inc,read;inc", 2) == [["inc", "read"], ["inc"]]
    assert parse_scripts(None, 2) == [["inc", "read"], ["inc", "read"]]
    with pytest.raises(ValueError):
        parse_scripts("inc", 2)


def test_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nalg = 1\nn = 2\nm = 4,16\nk = 2\ntrials = 2\nformat = json\n")
    assert load_config(cfg)["m"] == "4,16"
    assert main(["bench", "--config", str(cfg), "--m", "8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r["m"] for r in doc["rows"]] == [8]
    assert doc["rows"][0]["algorithm"] == 1


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("speed = 3\n")
    assert main(["bench", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_bench_writes_to_out(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["bench", "--alg", "2", "--n", "2", "--m", "4,8", "--trials", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["m"] for r in rows] == ["4", "8"]


def test_unwritable_out_exits_2(capsys):
    assert main(["bench", "--alg", "1", "--m", "4", "--trials", "1", "--out", "/nonexistent/dir/r.csv"]) == 2
    assert capsys.readouterr().err.startswith("approxcount: error:")


def test_bad_regime_exits_2(capsys):
    assert main(["bench", "--alg", "3", "--k", "3/2"]) == 2
    assert "algorithm 3 needs k to be an integer >= 2, got 3/2" in capsys.readouterr().err


def test_check_golden_trace(capsys):
    assert main(["check", "--trace", str(GOLDEN), "--format", "json"]) == 0
    (rec,) = json.loads(capsys.readouterr().out)
    assert rec["status"] == "yes"
    assert rec["witness_valid"] is True
    assert rec["quiescent_violations"] == 0
    assert rec["operations"] == 2


def test_check_random_suite(capsys):
    assert main(["check", "--alg", "3", "--n", "2", "--m", "8", "--k", "2", "--mode", "atomic",
                 "--scripts", "inc,inc,read;inc,read,inc", "--trials", "30", "--format", "json"]) == 0
    (rec,) = json.loads(capsys.readouterr().out)
    assert rec["lemma_violations"] == rec["accuracy_violations"] == rec["step_bound_violations"] == 0
    assert rec["linearizable"] == 30


def test_explore_small_instance(capsys):
    assert main(["explore", "--alg", "1", "--n", "2", "--m", "4", "--mode", "atomic",
                 "--scripts", "inc,read;inc,read", "--crash", "--format", "json"]) == 0
    (rec,) = json.loads(capsys.readouterr().out)
    assert rec["crash"] is True
    assert rec["lemma_violations"] == rec["step_bound_violations"] == 0


def test_check_and_explore_need_one_m(capsys):
    assert main(["explore", "--m", "4,8"]) == 2
    assert "single --m" in capsys.readouterr().err

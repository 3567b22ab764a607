"""Command-line front end: ``approxcount {check,bench,explore}``.

Options may also come from a flat ``key = value`` config file
(``--config``); flags given on the command line win.  Keys are the long
flag names without dashes (``alg``, ``n``, ``m``, ``k``, ``mode``, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .bench import BenchConfig, emit_report, run_bench
from .checker import History, check_linearizable, check_stream, spec_for, validate_witness
from .counters import INC, READ, normalize_mode
from .errors import ApproxCountError
from .harness import WorkloadSpec, explore_exhaustive, explore_random, load_trace
from .invariants import LemmaMonitor, check_quiescent_accuracy, check_step_bounds
from .rational import format_rational, parse_k
from .registers import Memory

DEFAULTS = {
    "alg": 2,
    "n": 2,
    "m": "16",
    "k": "2",
    "mode": "registers",
    "seed": 0,
    "trials": 100,
    "format": "csv",
    "out": None,
    "scripts": None,
}

_INT_KEYS = {"alg", "n", "seed", "trials"}


def load_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = int(value) if key in _INT_KEYS else value
    return out


def parse_ms(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    return [int(part) for part in str(text).split(",") if part.strip()]


def parse_scripts(text: str, n: int) -> list[list[str]]:
    """``"inc,read;inc"`` gives actor 0 [inc, read] and actor 1 [inc]."""
    if text is None:
        return [[INC, READ] for _ in range(n)]
    scripts = [[op.strip() for op in part.split(",") if op.strip()] for part in text.split(";")]
    if len(scripts) != n:
        raise ValueError(f"--scripts lists {len(scripts)} actors but n={n}")
    return scripts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="approxcount", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; command-line flags override it")
    common.add_argument("--alg", type=int, choices=(1, 2, 3))
    common.add_argument("--n", type=int)
    common.add_argument("--m", help="increment bound, or a comma list for a sweep")
    common.add_argument("--k", help="accuracy as an integer or 'p/q'")
    common.add_argument("--mode", choices=("registers", "atomic", "register-level", "atomic-blocks"))
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("bench", parents=[common], help="step-complexity sweep over m")

    check = sub.add_parser("check", parents=[common], help="invariant and linearizability suites")
    check.add_argument("--trace", help="check one serialized trace file instead")
    check.add_argument("--scripts", help="per-actor scripts, e.g. 'inc,read;inc'")

    explore = sub.add_parser("explore", parents=[common], help="exhaustive tiny-instance exploration")
    explore.add_argument("--scripts", help="per-actor scripts, e.g. 'inc,read;inc'")
    explore.add_argument("--crash", action="store_true", help="also check crash-truncated prefixes")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(load_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    opts["mode"] = normalize_mode(opts["mode"])
    return opts


def _records_text(records: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    buf = io.StringIO()
    fields: list[str] = []
    for rec in records:
        for key in rec:
            if key not in fields:
                fields.append(key)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in rec.items()})
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)


def cmd_bench(opts: dict) -> int:
    cfg = BenchConfig(opts["alg"], opts["n"], parse_ms(opts["m"]), opts["k"], mode=opts["mode"],
                      seed=opts["seed"], trials=opts["trials"])
    report = run_bench(cfg)
    text = emit_report(report, opts["format"])
    _emit(text, opts["out"])
    return 1 if any(r["violations"] for r in report.rows) else 0


def _workload(opts: dict) -> WorkloadSpec:
    ms = parse_ms(opts["m"])
    if len(ms) != 1:
        raise ValueError("check and explore take a single --m")
    return WorkloadSpec(opts["alg"], opts["n"], ms[0], opts["k"], parse_scripts(opts["scripts"], opts["n"]),
                        mode=opts["mode"])


def cmd_check_trace(path: str, opts: dict) -> int:
    with open(path, encoding="utf-8") as fp:
        trace = load_trace(fp)
    desc = trace.meta.get("workload", {})
    k = desc.get("k", opts["k"])
    spec = spec_for(WorkloadSpec(desc.get("algorithm", opts["alg"]), desc.get("n", 1), desc.get("m", 1), k,
                                 [[] for _ in range(desc.get("n", 1))], mode=desc.get("mode", "atomic")))
    history = History.from_trace(trace)
    verdict = check_linearizable(history, spec)
    rec = {"trace": path, "k": format_rational(parse_k(k)), "operations": len(history.ops), **verdict.to_record()}
    if verdict.witness is not None:
        rec["witness_valid"] = validate_witness(history, spec, verdict.witness)
    rec["quiescent_violations"] = len(check_quiescent_accuracy(trace, parse_k(k)))
    _emit(_records_text([rec], opts["format"]), opts["out"])
    return 0 if verdict.ok and not rec["quiescent_violations"] else 1


def cmd_check(opts: dict, trace_path: str | None) -> int:
    if trace_path:
        return cmd_check_trace(trace_path, opts)
    w = _workload(opts)
    spec = spec_for(w)
    bounds = w.build(Memory()).step_bounds()
    lemma = accuracy = steps = 0
    traces = list(explore_random(w, opts["seed"], opts["trials"], probe=True, monitor=LemmaMonitor))
    for t in traces:
        lemma += len(t.violations)
        accuracy += len(check_quiescent_accuracy(t, w.k))
        steps += len(check_step_bounds(t, bounds))
    lin = check_stream(traces, spec)
    rec = {
        "algorithm": w.algorithm, "n": w.n, "m": w.m, "k": format_rational(w.k), "mode": w.mode,
        "seed": opts["seed"], "trials": opts["trials"],
        "lemma_violations": lemma, "accuracy_violations": accuracy, "step_bound_violations": steps,
        "linearizable": lin.passed, "inconclusive": lin.inconclusive,
        "counterexample": lin.to_record()["counterexample"],
    }
    _emit(_records_text([rec], opts["format"]), opts["out"])
    return 0 if (lemma + accuracy + steps == 0 and lin.ok) else 1


def cmd_explore(opts: dict, crash: bool) -> int:
    w = _workload(opts)
    spec = spec_for(w)
    bounds = w.build(Memory()).step_bounds()
    lemma = steps = 0

    def stream():
        nonlocal lemma, steps
        for t in explore_exhaustive(w, crash=crash, monitor=LemmaMonitor):
            lemma += len(t.violations)
            steps += len(check_step_bounds(t, bounds))
            yield t

    summary = check_stream(stream(), spec)
    rec = {"algorithm": w.algorithm, "n": w.n, "m": w.m, "k": format_rational(w.k), "mode": w.mode,
           "crash": crash, **summary.to_record(), "lemma_violations": lemma, "step_bound_violations": steps}
    _emit(_records_text([rec], opts["format"]), opts["out"])
    return 0 if summary.ok and lemma + steps == 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        if args.verb == "bench":
            return cmd_bench(opts)
        if args.verb == "check":
            return cmd_check(opts, args.trace)
        return cmd_explore(opts, args.crash)
    except (ApproxCountError, ValueError, TypeError, OSError) as exc:
        print(f"approxcount: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

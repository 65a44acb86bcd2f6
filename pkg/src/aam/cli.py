"""Command-line front end.

    aam run FILE [--fuel N]
    aam analyze FILE [analysis flags] [--json PATH] [--dot PATH]
    aam graph FILE [analysis flags] [--dot PATH]
    aam bench DIR [--baseline NAME] [--config NAME=FLAGS ...] [--out PATH]

FILE may be ``-`` for stdin.  Exit codes: 0 success, 1 parse error,
2 stuck program, 3 out of fuel, 4 invalid flag combination, 5 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import shlex
import sys
import time
import warnings
from pathlib import Path

from . import syntax as S
from .engine import AnalysisConfig, ConfigError, ResourceLimit, analyze
from .machine import Answer, OutOfFuel, parse_policy, run_concrete, show_value, state_kind

EXIT_OK, EXIT_PARSE, EXIT_STUCK, EXIT_FUEL, EXIT_CONFIG, EXIT_LIMIT = 0, 1, 2, 3, 4, 5

REPORT_FIELDS = ("program", "config", "state_count", "edge_count", "iterations",
                 "store_versions", "answers", "stuck_count", "elapsed_ms")

# bench rows are compared against the first entry unless --baseline says otherwise
DEFAULT_MATRIX = {
    "baseline": "--alloc mono --engine widened",
    "frontier": "--alloc mono --engine frontier",
    "delta": "--alloc mono --engine delta",
    "lazy": "--alloc mono --engine delta --lazy super",
    "lazy+compiled": "--alloc mono --engine delta --lazy super --compiled",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alloc", default="mono", help="concrete | mono | kcfa=N")
    p.add_argument("--engine", default="frontier", choices=["naive", "widened", "frontier", "delta"])
    p.add_argument("--lazy", default="off", choices=["off", "addr", "super"])
    p.add_argument("--compiled", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--store", default="flat", choices=["flat", "versioned"])
    p.add_argument("--pushdown", action="store_true")
    p.add_argument("--memo", action="store_true")
    p.add_argument("--gc", default="none", choices=["none", "exact", "inexact"])
    p.add_argument("--fuel", type=int, default=None, help="iteration bound (pushdown runs)")
    p.add_argument("--max-states", type=int, default=200_000)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aam", description="Run and analyze .lif programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the concrete machine")
    r.add_argument("file")
    r.add_argument("--fuel", type=int, default=100_000)

    a = sub.add_parser("analyze", help="analyze and report metrics as JSON")
    a.add_argument("file")
    _add_analysis_flags(a)
    a.add_argument("--json", dest="json_path", default=None)
    a.add_argument("--dot", dest="dot_path", default=None)

    g = sub.add_parser("graph", help="write the reachable state graph as DOT")
    g.add_argument("file")
    _add_analysis_flags(g)
    g.add_argument("--dot", dest="dot_path", default=None)

    b = sub.add_parser("bench", help="analyze a corpus under a matrix of configurations")
    b.add_argument("corpus")
    b.add_argument("--config", action="append", default=None, metavar="NAME=FLAGS")
    b.add_argument("--baseline", default=None)
    b.add_argument("--out", default=None)
    return p


def config_from_args(args) -> AnalysisConfig:
    try:
        policy = parse_policy(args.alloc)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    cfg = AnalysisConfig(
        policy=policy, engine=args.engine, lazy=args.lazy, compiled=args.compiled,
        store=args.store, gc=args.gc, pushdown=args.pushdown, memo=args.memo,
        max_states=args.max_states, max_iterations=args.fuel,
    )
    cfg.validate()
    if not policy.abstract and args.fuel is None:
        raise ConfigError("concrete allocation needs --fuel to bound the analysis")
    return cfg


def read_program(path: str) -> tuple:
    if path == "-":
        return S.parse(sys.stdin.read(), "<stdin>"), "<stdin>"
    return S.parse(Path(path).read_text(encoding="utf-8"), path), Path(path).stem


# ---------------------------------------------------------------------------
# reports

def metrics_report(name: str, cfg: AnalysisConfig, result) -> dict:
    m = result.metrics
    values = {
        "program": name,
        "config": cfg.describe(),
        "state_count": m["state_count"],
        "edge_count": m["edge_count"],
        "iterations": m["iterations"],
        "store_versions": m["store_versions"],
        "answers": sorted(show_value(v) for v in result.answers),
        "stuck_count": len(result.stuck),
        "elapsed_ms": m["elapsed_ms"],
    }
    return {k: values[k] for k in REPORT_FIELDS}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def _config_id(c) -> str:
    s, tag = c
    if isinstance(tag, int):
        return f"{s.key()} @v{tag}"
    return f"{s.key()} @{tag.key()}"


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


_SHAPES = {"ev": "box", "co": "ellipse", "ap": "diamond", "ans": "doublecircle"}


def to_dot(result, name: str = "states") -> str:
    """DOT text for a reachable graph; node ids are the canonical config keys."""
    nodes = sorted(result.states, key=_config_id)
    edges = sorted({(_config_id(a), _config_id(b)) for a, b in result.edges})
    out = io.StringIO()
    out.write(f"digraph {_dot_quote(name)} {{\n")
    for c in nodes:
        s = c[0]
        out.write(f"  {_dot_quote(_config_id(c))} [shape={_SHAPES[state_kind(s)]}, "
                  f"label={_dot_quote(s.key())}];\n")
    for a, b in edges:
        out.write(f"  {_dot_quote(a)} -> {_dot_quote(b)};\n")
    out.write("}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# commands

def cmd_run(args) -> int:
    program, _ = read_program(args.file)
    r = run_concrete(program, args.fuel)
    if isinstance(r, Answer):
        print(f"answer: {show_value(r.value)}")
        return EXIT_OK
    if isinstance(r, OutOfFuel):
        print("out of fuel")
        return EXIT_FUEL
    print(f"stuck at {r.state.key()}")
    return EXIT_STUCK


def _analyze(args):
    cfg = config_from_args(args)
    program, name = read_program(args.file)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = analyze(program, cfg)
    return cfg, name, result


def cmd_analyze(args) -> int:
    cfg, name, result = _analyze(args)
    text = report_json(metrics_report(name, cfg, result))
    if args.json_path:
        Path(args.json_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.dot_path:
        Path(args.dot_path).write_text(to_dot(result, name), encoding="utf-8")
    return EXIT_OK


def cmd_graph(args) -> int:
    _, name, result = _analyze(args)
    text = to_dot(result, name)
    if args.dot_path:
        Path(args.dot_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


BENCH_FIELDS = ("program", "config", "state_count", "edge_count", "iterations", "store_versions",
                "answers", "stuck_count", "elapsed_ms", "state_factor", "time_factor")


def _parse_matrix(specs) -> dict:
    if not specs:
        return dict(DEFAULT_MATRIX)
    out = {}
    for spec in specs:
        name, sep, flags = spec.partition("=")
        if not sep or not name:
            raise UsageError(f"--config expects NAME=FLAGS, got {spec!r}")
        out[name] = flags
    return out


def bench_rows(corpus: Path, matrix: dict, baseline: str) -> list:
    """One row per (program, config); cells are ``t`` when the run hits the cap."""
    if baseline not in matrix:
        raise UsageError(f"baseline {baseline!r} is not in the matrix")
    flag_parser = _Parser(prog="aam bench --config")
    _add_analysis_flags(flag_parser)
    configs = {name: config_from_args(flag_parser.parse_args(shlex.split(flags)))
               for name, flags in matrix.items()}
    rows = []
    for path in sorted(corpus.glob("*.lif")):
        program = S.parse(path.read_text(encoding="utf-8"), str(path))
        reports = {}
        for name, cfg in configs.items():
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    reports[name] = metrics_report(path.stem, cfg, analyze(program, cfg))
            except ResourceLimit:
                reports[name] = None
        base = reports[baseline]
        for name in configs:
            rep = reports[name]
            row = {"program": path.stem, "config": name}
            if rep is None:
                row.update({k: "t" for k in BENCH_FIELDS[2:]})
            else:
                row.update({k: rep[k] for k in BENCH_FIELDS[2:9]})
                row["answers"] = " ".join(rep["answers"])
                row["state_factor"] = _factor(base, rep, "state_count")
                row["time_factor"] = _factor(base, rep, "elapsed_ms")
            rows.append(row)
    return rows


def _factor(base, rep, key):
    if base is None:
        return "t"
    if rep is base:
        return 1.0
    if rep[key] == 0:
        return ""
    return round(base[key] / rep[key], 3)


def cmd_bench(args) -> int:
    matrix = _parse_matrix(args.config)
    baseline = args.baseline or next(iter(matrix))
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"not a directory: {corpus}")
    rows = bench_rows(corpus, matrix, baseline)
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(out.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(out.getvalue())
    return EXIT_OK


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "graph": cmd_graph, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"aam: {e}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        return COMMANDS[args.command](args)
    except S.ParseError as e:
        print(f"{getattr(args, 'file', '')}:{e}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, UsageError) as e:
        print(f"aam: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimit as e:
        print(f"aam: resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    except OSError as e:
        print(f"aam: {e}", file=sys.stderr)
        return EXIT_PARSE
    finally:
        if getattr(args, "command", None) == "bench":
            print(f"bench finished in {time.perf_counter() - start:.2f}s", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

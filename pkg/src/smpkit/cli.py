"""Command-line entry point: ``smpkit <subcommand> [options]``.

Exit codes: 0 when every record passes, 1 when any record fails, 2 on a
configuration error or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import intrinsic, paths, suites
from .errors import ConfigError, SMPError
from .kernels import TestFunction
from .zoo import EXAMPLE_IDS, all_example_ids, get_example

SCHEMA = "1"
ANALYTIC_SUITES = tuple(suites.SUITES)
MC_TESTS = ("paths", "markov", "strong-markov", "holding", "branch", "right-limit")


@dataclass
class RunConfig:
    command: str
    examples: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    space: str = "original"
    seed: int = 42
    n: int = 10_000
    tolerances: dict = field(default_factory=lambda: dict(suites.DEFAULT_TOLERANCES))
    grid_h: float = 0.01
    grid_radius: float = 10.0
    out: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)


def build_report(cfg: RunConfig, records: list[dict]) -> dict:
    n_pass = sum(r["pass"] for r in records)
    return {"schema": SCHEMA, "config": asdict(cfg), "records": records,
            "summary": {"pass": n_pass, "fail": len(records) - n_pass, "skipped": 0}}


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "example", "params", "statistic", "null_value", "tolerance", "pass"])
        for r in report["records"]:
            w.writerow([r["check"], r["example"], json.dumps(r["params"], sort_keys=True),
                        r["statistic"], r["null_value"], r["tolerance"], r["pass"]])
        return buf.getvalue()
    if fmt == "md":
        lines = ["| check | example | statistic | tolerance | result |", "|---|---|---|---|---|"]
        for r in report["records"]:
            lines.append(f"| {r['check']} | {r['example']} | {r['statistic']} | {r['tolerance']} | "
                         f"{'PASS' if r['pass'] else 'FAIL'} |")
        s = report.get("summary", {})
        lines.append("")
        lines.append(f"{s.get('pass', 0)} passed, {s.get('fail', 0)} failed")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}")


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"cannot parse coordinates {text!r}") from e


def _parse_tol(items) -> dict:
    tol = dict(suites.DEFAULT_TOLERANCES)
    for item in items or []:
        key, _, value = item.partition("=")
        if key not in tol or not value:
            raise ConfigError(f"--tol expects key=value with key in {sorted(tol)}")
        try:
            tol[key] = float(value)
        except ValueError as e:
            raise ConfigError(f"bad tolerance value {value!r}") from e
    return tol


def _examples(arg: str | None, default_all: bool = True) -> list[str]:
    if arg is None or arg == "all":
        if default_all:
            return list(EXAMPLE_IDS)
        raise ConfigError("--example is required")
    ids = [a.strip() for a in arg.split(",")]
    known = set(all_example_ids())
    for i in ids:
        if i not in known:
            raise ConfigError(f"unknown example {i!r}; choose from {sorted(known)}")
    return ids


def _seed(args) -> int:
    env = os.environ.get("SMP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"SMP_SEED must be an integer, got {env!r}") from e
    return args.seed


# ---------------------------------------------------------------------------
# subcommands


def cmd_list(args) -> int:
    for eid in all_example_ids():
        ex = get_example(eid)
        print(f"{eid:22s} dim={ex.dim}  {ex.title}")
    return 0


def cmd_verify(args) -> int:
    names = list(ANALYTIC_SUITES) if args.suite in (None, "all") else args.suite.split(",")
    for s in names:
        if s not in suites.SUITES:
            raise ConfigError(f"unknown suite {s!r}; choose from {list(ANALYTIC_SUITES)}")
    cfg = RunConfig("verify", _examples(args.example), names, seed=_seed(args), n=args.n,
                    tolerances=_parse_tol(args.tol), grid_h=args.grid_h,
                    grid_radius=args.grid_radius, out=args.out, format=args.format)
    ctx = suites.SuiteContext(cfg.tolerances, cfg.grid_h, cfg.grid_radius)
    records = [r.to_dict() for eid in cfg.examples for s in names for r in suites.run_suite(s, eid, ctx)]
    report = build_report(cfg, records)
    _emit(render(report, cfg.format), cfg.out)
    return 0 if report["summary"]["fail"] == 0 else 1


def _default_function(eid: str, space: str, test: str) -> TestFunction:
    if eid == "sticky" and test == "strong-markov":
        target = -1.0 if space == "intrinsic" else 0.0
        return TestFunction(lambda X: (X[:, 0] == target).astype(float), name=f"1{{{target:g}}}")
    ex = get_example(eid, space)
    return ex.test_functions()[1]


def cmd_simulate(args) -> int:
    eids = _examples(args.example, default_all=False)
    if len(eids) != 1:
        raise ConfigError("simulate takes exactly one example")
    eid = eids[0]
    if args.space not in ("original", "intrinsic"):
        raise ConfigError("--space must be original or intrinsic")
    ex = get_example(eid, args.space)
    test = args.test or ("branch" if eid == "fork" else "paths")
    if test not in MC_TESTS:
        raise ConfigError(f"unknown test {test!r}; choose from {list(MC_TESTS)}")
    default_x0 = {"fork": "1,0", "pure_jump": "0", "collapse": "0"}.get(eid, "1")
    if args.space == "intrinsic" and eid == "collapse":
        default_x0 = "1"
    x0 = _floats(args.x0 or default_x0)
    seed = _seed(args)
    cfg = RunConfig("simulate", [eid], [test], args.space, seed, args.n, out=args.out,
                    format=args.format,
                    extra={"x0": x0, "horizon": args.horizon, "s": args.s, "t": args.t})
    try:
        ex._check([x0])
    except SMPError as e:
        raise ConfigError(str(e)) from e
    if test == "paths":
        ps = paths.sample_paths(eid, args.space, x0, args.horizon, args.n, seed)
        ok = True
        for p in ps:
            try:
                p.validate(lambda Y: ex.contains(Y))
            except ValueError:
                ok = False
        if args.paths_out:
            with open(args.paths_out, "w", encoding="utf-8") as fh:
                fh.write(paths.paths_to_csv(ps))
        rec = {"check": "sample_paths", "example": eid, "params": {"space": args.space, "n": args.n},
               "statistic": float(len(ps)), "null_value": float(args.n), "tolerance": 0.0, "pass": ok}
    else:
        rep = _run_mc(test, eid, args, x0, seed)
        rec = {"check": rep.test, "example": eid,
               "params": {"space": args.space, "n": args.n, **_json_safe(rep.extra)},
               "statistic": rep.statistic, "null_value": rep.null_value,
               "tolerance": rep.tolerance if rep.p_value is None else paths.KS_LEVEL,
               "pass": rep.passed}
        if rep.p_value is not None:
            rec["params"]["p_value"] = rep.p_value
    report = build_report(cfg, [rec])
    _emit(render(report, cfg.format), cfg.out)
    return 0 if report["summary"]["fail"] == 0 else 1


def _json_safe(d: dict) -> dict:
    return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}


def _run_mc(test, eid, args, x0, seed):
    if test == "markov":
        f = _default_function(eid, args.space, test)
        return paths.markov_mc_test(eid, args.space, x0, args.s, args.t, f, args.n, seed)
    if test == "strong-markov":
        f = _default_function(eid, args.space, test)
        rule = paths.StoppingRule.hit_open(0, "<", 0.0) if eid != "fork" else \
            paths.StoppingRule.hit_closed(0, "<=", 0.0)
        return paths.strong_markov_mc_test(eid, args.space, x0, rule, args.s, f, args.n, seed)
    if test == "holding":
        return paths.holding_time_test(eid, args.space, args.n, seed)
    if test == "branch":
        if eid != "fork":
            raise ConfigError("the branch test is defined for the fork example")
        return paths.fork_branch_test(args.n, seed, tuple(x0), max(args.horizon, x0[0] + 1), args.space)
    return paths.right_limit_identity_test(eid, args.space, x0, args.t, args.n, seed)


def cmd_embed(args) -> int:
    eids = _examples(args.example, default_all=False)
    spec = intrinsic.embedding_spec(eids[0])
    text = open(args.input, encoding="utf-8").read() if args.input else sys.stdin.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        X = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as e:
        raise ConfigError(f"malformed points CSV: {e}") from e
    if X.size == 0:
        raise ConfigError("no points to embed")
    try:
        spec.example._check(X)
    except SMPError as e:
        raise ConfigError(str(e)) from e
    Y = spec.identify(X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"e{i + 1}" for i in range(Y.shape[1])] + ["tag", "label"])
    for y in Y:
        w.writerow([repr(float(v)) for v in y] + ["original", ""])
    for p in spec.closure_points:
        w.writerow([repr(float(v)) for v in p.coords] + [p.tag.value, p.label])
    _emit(buf.getvalue(), args.out)
    return 0


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_invert(args) -> int:
    from .resolvent import post_widder_invert
    eids = _examples(args.example or "uniform", default_all=False)
    eid = eids[0]
    ex = get_example(eid)
    if not hasattr(ex, "grid_kernel"):
        raise ConfigError(f"{eid} has no grid kernel; use uniform or pure_jump")
    U = ex.resolvent()
    if eid == "uniform":
        U.kernel = lambda b: ex.grid_kernel(b, args.grid_radius, args.grid_h)
    f = ex.test_functions()[1]
    x = _floats(args.x0 or "0")
    exact = float(ex.pt(args.t, f, [x])[0])
    records = []
    for n in args.orders:
        approx = post_widder_invert(U, f, x, args.t, n)
        rel = abs(approx - exact) / abs(exact)
        records.append({"check": "post_widder", "example": eid,
                        "params": {"t": args.t, "x": x, "n": n, "approx": approx, "exact": exact},
                        "statistic": rel, "null_value": 0.0,
                        "tolerance": suites.DEFAULT_TOLERANCES["post_widder_rel"],
                        "pass": rel <= suites.DEFAULT_TOLERANCES["post_widder_rel"]})
    cfg = RunConfig("invert", [eid], [], grid_h=args.grid_h, grid_radius=args.grid_radius,
                    out=args.out, format=args.format, extra={"t": args.t, "orders": args.orders})
    report = build_report(cfg, records)
    _emit(render(report, cfg.format), cfg.out)
    return 0 if report["summary"]["fail"] == 0 else 1


def cmd_report(args) -> int:
    text = open(args.input, encoding="utf-8").read() if args.input else sys.stdin.read()
    try:
        report = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed report JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(report, dict) or "records" not in report:
        raise ConfigError("input is not a suite report (missing 'records')")
    _emit(render(report, args.format), args.out)
    return 0 if report.get("summary", {}).get("fail", 0) == 0 else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--example", help="example id, comma list, or 'all'")
    common.add_argument("--space", default="original", help="original or intrinsic")
    common.add_argument("--seed", type=int, default=42, help="master seed (SMP_SEED overrides)")
    common.add_argument("--n", type=int, default=10_000, help="Monte Carlo replications")
    common.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance")
    common.add_argument("--grid-h", type=float, default=0.01)
    common.add_argument("--grid-radius", type=float, default=10.0)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", default="json", choices=["json", "csv", "md"])

    p = argparse.ArgumentParser(prog="smpkit", description="Markov semigroup and resolvent toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-examples", help="show the example catalogue")
    v = sub.add_parser("verify", parents=[common], help="run analytic suites")
    v.add_argument("--suite", help=f"comma list from {', '.join(ANALYTIC_SUITES)} or 'all'")
    s = sub.add_parser("simulate", parents=[common], help="sample paths and run Monte Carlo tests")
    s.add_argument("--x0", help="start point, comma separated coordinates")
    s.add_argument("--horizon", type=float, default=5.0)
    s.add_argument("--test", help=f"one of {', '.join(MC_TESTS)}")
    s.add_argument("--s", type=float, default=0.5)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--paths-out", help="CSV file for sampled paths")
    e = sub.add_parser("embed", parents=[common], help="map a points CSV through the embedding")
    e.add_argument("--input", help="points CSV (default stdin)")
    i = sub.add_parser("invert", parents=[common], help="Post-Widder inversion of the resolvent")
    i.add_argument("--t", type=float, default=0.5)
    i.add_argument("--x0", help="evaluation point")
    i.add_argument("--orders", type=int, nargs="+", default=[16, 64])
    r = sub.add_parser("report", help="render a JSON report as json, csv or md")
    r.add_argument("--input", help="report JSON (default stdin)")
    r.add_argument("--out")
    r.add_argument("--format", default="md", choices=["json", "csv", "md"])
    return p


COMMANDS = {"list-examples": cmd_list, "verify": cmd_verify, "simulate": cmd_simulate,
            "embed": cmd_embed, "invert": cmd_invert, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"smpkit: error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except OSError as e:
        print(f"smpkit: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: ``solve``, ``bench`` and ``list``.

Exit codes: 0 on success, 2 on configuration errors, 3 when ``solve`` finds
no feasible minimum.
"""

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bench
from .errors import ConfigError, FunnelOptError, NoFeasibleMinimum, UnknownProblem, UnsupportedMode
from .funnel import FEASIBILITY_TOL, FunnelParams, local_search
from .mlsl import MultistartConfig, global_search
from .problem import BLACK_BOX, EvaluationLedger

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3
CSV_COLUMNS = ("problem", "seed", "budget", "mode", "best_f", "cv", "evals", "n_searches", "status")
MODES = (BLACK_BOX, "grey-box")


def _funnel_params(whichmodel, feasibility_first):
    kw = {"whichmodel": whichmodel}
    params = FunnelParams.feasibility_first(**kw) if feasibility_first else FunnelParams(**kw)
    return params.validate()


def _start_point(prob, seed):
    """Seeded uniform point of the box; infinite sides fall back to 0 or the finite bound."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    lo, hi = np.asarray(prob.lx), np.asarray(prob.ux)
    u = rng.uniform(size=prob.n)
    both = np.isfinite(lo) & np.isfinite(hi)
    x = np.clip(np.zeros(prob.n), lo, hi)
    x[both] = lo[both] + (hi[both] - lo[both]) * u[both]
    return x


def solve(prob, seed=0, maxeval=None, maxeval_ls=None, whichmodel=2, multistart=True,
          feasibility_first=False, f_global_optimum=None, callback=None):
    """Solve ``prob`` once.

    Returns
    -------
    dict
        ``best_sol``, ``best_fval``, ``cv``, ``pi_f``, ``total_eval``,
        ``nb_local_searches``, ``fL`` and ``feasible``.
    """
    params = _funnel_params(whichmodel, feasibility_first)
    if not multistart:
        maxeval = 500 * prob.n if maxeval is None else int(maxeval)
        if maxeval < 1:
            raise ConfigError("maxeval must be positive")
        ledger = EvaluationLedger(budget=maxeval)
        rec = local_search(prob, _start_point(prob, seed), ledger, params, max_evals=maxeval,
                           rng=seed, callback=callback)
        return {"best_sol": rec.x.tolist(), "best_fval": rec.f, "cv": rec.cv, "pi_f": rec.pi_f,
                "total_eval": ledger.bb_calls, "nb_local_searches": 1, "fL": [rec.f],
                "status": rec.status, "feasible": rec.feasible}
    config = MultistartConfig(maxeval=maxeval, maxeval_ls=maxeval_ls, seed=seed, funnel=params,
                              f_global_optimum=f_global_optimum)
    try:
        rec, summary = global_search(prob, config, callback=callback)
    except NoFeasibleMinimum as exc:
        rec, summary = exc.record, exc.summary
        out = summary.to_dict()
        out.update(cv=summary.best_cv, pi_f=None if rec is None else rec.pi_f, feasible=False)
        return out
    out = summary.to_dict()
    out.update(cv=rec.cv, pi_f=rec.pi_f, feasible=True)
    return out


def run_trial(task):
    """One benchmark trial; never raises for solver failures.

    Parameters
    ----------
    task : dict
        Keys ``problem``, ``mode``, ``seed``, ``budget`` plus optional solver
        settings accepted by :func:`solve`.

    Returns
    -------
    row : dict
        Keyed by :data:`CSV_COLUMNS`.
    trace : list of dict
        Iteration diagnostics when ``task["verbose"]`` is set.
    """
    trace = []
    row = {"problem": task["problem"], "seed": task["seed"], "budget": task["budget"],
           "mode": task["mode"]}
    try:
        prob = bench.get_problem(task["problem"], task["mode"])
        out = solve(prob, seed=task["seed"], maxeval=task["budget"],
                    maxeval_ls=task.get("maxeval_ls"), whichmodel=task.get("whichmodel", 2),
                    multistart=task.get("multistart", True),
                    feasibility_first=task.get("feasibility_first", False),
                    f_global_optimum=task.get("f_global_optimum"),
                    callback=trace.append if task.get("verbose") else None)
        status = "ok" if out["feasible"] else "infeasible"
        row.update(best_f=out["best_fval"], cv=out["cv"], evals=out["total_eval"],
                   n_searches=out["nb_local_searches"], status=status)
    except FunnelOptError as exc:
        row.update(best_f=math.nan, cv=math.nan, evals=0, n_searches=0,
                   status=f"failed:{type(exc).__name__}")
    return row, trace


def aggregate(rows):
    """Best/Avg/Worst objective per (problem, mode, budget) over feasible trials.

    Only rows with status ``ok`` and ``cv <= 1e-4`` count.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r["problem"], r["mode"], r["budget"]), []).append(r)
    out = []
    for (name, mode, budget), rs in groups.items():
        fs = [float(r["best_f"]) for r in rs if r["status"] == "ok" and float(r["cv"]) <= FEASIBILITY_TOL]
        out.append({"problem": name, "mode": mode, "budget": budget, "trials": len(rs),
                    "feasible": len(fs),
                    "best": min(fs) if fs else math.nan,
                    "avg": float(np.mean(fs)) if fs else math.nan,
                    "worst": max(fs) if fs else math.nan})
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def format_table(summary):
    lines = [f"{'problem':8s} {'mode':10s} {'budget':>7s} {'feas':>9s} {'best':>14s} {'avg':>14s} {'worst':>14s}"]
    for s in summary:
        lines.append(f"{s['problem']:8s} {s['mode']:10s} {s['budget']:>7d} "
                     f"{s['feasible']:>4d}/{s['trials']:<4d} {s['best']:>14.6g} {s['avg']:>14.6g} "
                     f"{s['worst']:>14.6g}")
    return "\n".join(lines)


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


# -- subcommands ------------------------------------------------------------


def cmd_list(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("problem", "n", "constraints", "best_known", "modes", "suites", "bb_constraints",
                "wb_constraints", "objective"))
    for name in bench.names():
        e = bench.get_entry(name)
        suites = ";".join(s for s, v in bench.SUITES.items() if name in v)
        d = e.describe()
        w.writerow((name, e.n, e.n_constraints, repr(float(e.best_known)), ";".join(e.modes), suites,
                    d.get("bb_constraints", ""), d.get("wb_constraints", ""), d.get("objective", "")))
    return EXIT_OK


def cmd_solve(args):
    prob = bench.get_problem(args.problem, args.mode)
    if args.verbose:
        def callback(rec):
            sys.stderr.write(json.dumps(rec, default=_json_default) + "\n")
    else:
        callback = None
    out = solve(prob, seed=args.seed, maxeval=args.maxeval, maxeval_ls=args.maxeval_ls,
                whichmodel=args.whichmodel, multistart=not args.no_multistart,
                feasibility_first=args.feasibility_first,
                f_global_optimum=args.f_global_optimum, callback=callback)
    out = {"problem": args.problem, "mode": args.mode, "seed": args.seed, **out}
    if args.format == "json" or args.output:
        text = json.dumps(out, indent=2, default=_json_default) + "\n"
        if args.format == "csv":
            row = {"problem": args.problem, "seed": args.seed, "budget": out["total_eval"],
                   "mode": args.mode, "best_f": out["best_fval"], "cv": out["cv"],
                   "evals": out["total_eval"], "n_searches": out["nb_local_searches"],
                   "status": "ok" if out["feasible"] else "infeasible"}
            text = rows_to_csv([row])
        _write(text, args.output)
    if args.format != "json" or args.output:
        label = "best_sol" if out["feasible"] else "least infeasible point"
        print(f"{label}: {out['best_sol']}")
        print(f"best_fval: {out['best_fval']!r}")
        print(f"cv: {out['cv']!r}  pi_f: {out['pi_f']!r}")
        print(f"total_eval: {out['total_eval']}  nb_local_searches: {out['nb_local_searches']}")
        print(f"fL: {out['fL']}")
    if not out["feasible"]:
        print("no feasible minimum found", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _bench_tasks(args):
    names = [args.problem] if args.problem else bench.suite(args.suite or "table3")
    names = [bench.get_entry(n).name for n in names]
    mode = args.mode
    if mode is None:
        mode = "grey-box" if args.suite == "greybox" else BLACK_BOX
    budget = args.maxeval if args.maxeval is not None else 100
    tasks = []
    for name in names:
        for t in range(args.trials):
            tasks.append({"problem": name, "mode": mode, "seed": args.seed + t, "budget": budget,
                          "maxeval_ls": args.maxeval_ls, "whichmodel": args.whichmodel,
                          "multistart": not args.no_multistart,
                          "feasibility_first": args.feasibility_first,
                          "f_global_optimum": args.f_global_optimum, "verbose": args.verbose})
    return tasks


def cmd_bench(args):
    tasks = _bench_tasks(args)
    # fail fast on settings that would break every trial
    MultistartConfig(maxeval=tasks[0]["budget"], maxeval_ls=args.maxeval_ls,
                     funnel=_funnel_params(args.whichmodel, args.feasibility_first)).resolved(1)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_trial, tasks, chunksize=1))
    else:
        results = [run_trial(t) for t in tasks]
    rows = [r for r, _ in results]
    if args.verbose:
        for (row, trace) in results:
            for rec in trace:
                sys.stderr.write(json.dumps({"problem": row["problem"], "seed": row["seed"], **rec},
                                            default=_json_default) + "\n")
    summary = aggregate(rows)
    if args.format == "json":
        text = json.dumps({"rows": rows, "summary": summary}, indent=2, default=_json_default) + "\n"
    else:
        text = rows_to_csv(rows)
    _write(text, args.output)
    print(format_table(summary), file=sys.stderr)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _whichmodel(text):
    v = int(text)
    if v not in (1, 2, 3, 4):
        raise argparse.ArgumentTypeError(f"whichmodel must be 1, 2, 3 or 4, got {text}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="funnelopt",
                                     description="Derivative-free global optimization of grey-box problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mode", choices=MODES, default=None,
                       help="evaluation mode (default black-box; grey-box for the greybox suite)")
        p.add_argument("--maxeval", "--budget", dest="maxeval", type=_positive_int, default=None,
                       help="total black-box budget (solve: 5000n multistart, 500n single; bench: 100)")
        p.add_argument("--maxeval-ls", type=_positive_int, default=None,
                       help="budget of one local search (default 0.7 maxeval)")
        p.add_argument("--whichmodel", type=_whichmodel, default=2,
                       help="surrogate variant 1-4 (default 2)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--no-multistart", action="store_true", help="run a single local search")
        p.add_argument("--feasibility-first", action="store_true",
                       help="skip tangent steps while infeasible")
        p.add_argument("--f-global-optimum", type=float, default=None,
                       help="stop once this objective value is attained")
        p.add_argument("--output", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--verbose", action="store_true", help="JSONL iteration traces on stderr")

    ps = sub.add_parser("solve", help="solve one benchmark problem")
    ps.add_argument("--problem", required=True)
    common(ps)
    pb = sub.add_parser("bench", help="run seeded trials over a suite")
    group = pb.add_mutually_exclusive_group()
    group.add_argument("--problem")
    group.add_argument("--suite", choices=sorted(bench.SUITES))
    pb.add_argument("--trials", type=_positive_int, default=1)
    pb.add_argument("--jobs", type=_positive_int, default=1)
    common(pb)
    sub.add_parser("list", help="list benchmark problems")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        return cmd_list(args)
    if args.command == "solve" and args.mode is None:
        args.mode = BLACK_BOX
    if args.maxeval is not None and args.maxeval_ls is not None and args.maxeval_ls > args.maxeval:
        print("error: --maxeval-ls cannot exceed --maxeval", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return cmd_solve(args) if args.command == "solve" else cmd_bench(args)
    except (ConfigError, UnknownProblem, UnsupportedMode, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

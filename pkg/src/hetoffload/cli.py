"""Command-line entry point: ``hetoffload {generate,solve,oracle,sweep,compare}``.

Exit codes: 0 success, 2 invalid input, 3 solver timeout, 4 instance too large.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, oracle, solver
from .model import Allocation, Scenario, total_cycles, validate_scenario
from .radio import InstanceTooLarge, build_rate_table, dump_rates
from .scenario import GeneratorParams, generate, load_scenario, save_scenario

log = logging.getLogger("hetoffload")

EXIT_OK, EXIT_INVALID, EXIT_TIMEOUT, EXIT_TOO_LARGE = 0, 2, 3, 4
TIME_BUDGET_ENV = "HETOFFLOAD_TIME_BUDGET"
ALGS = ("optimal", "lc", "no-offload", "full-offload")
AXES = {
    "computation-load": "total_cycles",
    "bpc": "bpc_fixed",
    "subchannels": "n_channels",
    "tasks-per-user": "tasks_per_user",
}
SWEEP_FIELDS = [
    "axis", "value", "seed", "algorithm", "status", "objective", "zeta_star",
    "iterations", "user_energies", "e_comp", "e_tx", "offloaded_gcycles",
    "local_gcycles", "channels_used", "runtime_s",
]


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_INVALID):
        super().__init__(msg)
        self.code = code


# ---------------------------------------------------------------- helpers


def _env_budget() -> float | None:
    v = os.environ.get(TIME_BUDGET_ENV)
    if not v:
        return None
    try:
        return float(v)
    except ValueError:
        raise CliError(f"{TIME_BUDGET_ENV} must be a number, got {v!r}")


def _opt_type(tp):
    # GeneratorParams annotations are strings under postponed evaluation
    tp = str(tp)
    if "bool" in tp:
        return lambda s: s.lower() in ("1", "true", "yes", "on")
    if "int" in tp:
        return int
    return float


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generator parameters")
    for f in dataclasses.fields(GeneratorParams):
        g.add_argument("--" + f.name.replace("_", "-"), dest="gp_" + f.name, type=_opt_type(f.type), default=None)


def _generator_params(args) -> GeneratorParams:
    kw = {k[3:]: v for k, v in vars(args).items() if k.startswith("gp_") and v is not None}
    try:
        return GeneratorParams(**kw)
    except (TypeError, ValueError) as e:
        raise CliError(str(e))


def _load(path: str) -> Scenario:
    try:
        s = load_scenario(path)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise CliError(f"cannot read scenario {path}: {e}")
    problems = validate_scenario(s)
    if problems:
        raise CliError("invalid scenario: " + "; ".join(problems))
    return s


def _emit(rows: list[dict], fmt: str, out=None, fields=None) -> None:
    out = out or sys.stdout
    if fmt == "json-lines":
        for r in rows:
            out.write(json.dumps(r) + "\n")
        return
    fields = fields or (list(rows[0]) if rows else [])
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (";".join(f"{v:.9g}" for v in r[k]) if isinstance(r.get(k), list) else r.get(k)) for k in fields})


def _user_energies(s: Scenario, a: Allocation) -> list[float]:
    return [u.weight * (a.e_comp[k] + a.e_tx[k]) for k, u in enumerate(s.users)]


def _cycles_split(s: Scenario, a: Allocation) -> tuple[list[float], list[float]]:
    local, off = [], []
    for k, u in enumerate(s.users):
        loc = sum(t.cycles for t, xl in zip(u.tasks, a.x[k]) if xl)
        local.append(loc)
        off.append(total_cycles(u) - loc)
    return local, off


def _solver_options(args) -> solver.SolverOptions:
    return solver.SolverOptions(
        ilp_backend=getattr(args, "ilp_backend", "bnb"),
        ilp_time_budget=getattr(args, "ilp_time_budget", None),
        dump_dir=getattr(args, "dump_blp", None),
        workers=getattr(args, "user_threads", 1),
    )


def _run_alg(s: Scenario, alg: str, eps: float, budget, opts) -> dict:
    t0 = time.perf_counter()
    a, trace = solver.run(s, alg, eps, budget, opts)
    rt = time.perf_counter() - t0
    row = {"algorithm": alg, "runtime_s": round(rt, 6)}
    if a is None:
        row.update(status="timeout" if trace is not None and trace.timed_out else "infeasible", objective=None)
        row["trace"] = trace
        return row
    local, off = _cycles_split(s, a)
    row.update(
        status="timeout" if trace is not None and trace.timed_out else "ok",
        objective=a.objective,
        zeta_star=None if trace is None else trace.zeta_star,
        iterations=None if trace is None else len(trace.iterations),
        user_energies=_user_energies(s, a),
        e_comp=list(a.e_comp),
        e_tx=list(a.e_tx),
        offloaded_gcycles=sum(off) / 1e9,
        local_gcycles=sum(local) / 1e9,
        channels_used=int(np.asarray(a.rho).sum()),
    )
    row["allocation"], row["trace"] = a, trace
    return row


def _public(row: dict) -> dict:
    return {k: v for k, v in row.items() if k not in ("allocation", "trace")}


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    p = _generator_params(args)
    try:
        s = generate(p, args.seed)
    except ValueError as e:
        raise CliError(str(e))
    if args.out:
        save_scenario(s, args.out)
    else:
        from .scenario import dumps_scenario

        sys.stdout.write(dumps_scenario(s) + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    s = _load(args.scenario)
    budget = args.time_budget if args.time_budget is not None else _env_budget()
    if args.dump_rates:
        dump_rates(build_rate_table(s), args.dump_rates)
    row = _run_alg(s, args.alg, args.epsilon, budget, _solver_options(args))
    a, trace = row.get("allocation"), row.get("trace")
    if args.out and a is not None:
        Path(args.out).write_text(json.dumps(a.to_dict(), indent=1))
    if args.trace and trace is not None:
        Path(args.trace).write_text(json.dumps(trace.to_dict(), indent=1))
    _emit([_public(row)], args.format, fields=["algorithm", "status", "objective", "zeta_star", "iterations", "offloaded_gcycles", "local_gcycles", "channels_used", "runtime_s"])
    if row["status"] == "timeout":
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_oracle(args) -> int:
    s = _load(args.scenario)
    obj, a = oracle.brute_force(s, cap=args.cap, full_offload=args.full_offload)
    if args.out and a is not None:
        Path(args.out).write_text(json.dumps(a.to_dict(), indent=1))
    row = {"algorithm": "oracle-full-offload" if args.full_offload else "oracle", "status": "ok" if a else "infeasible", "objective": obj if a else None}
    _emit([row], args.format)
    return EXIT_OK


def _sweep_cell(cell) -> list[dict]:
    idx, axis, value, seed, algs, params, eps, budget, opts_kw, fig4 = cell
    p = params.with_(**{AXES[axis]: value})
    s = generate(p, seed)
    out = []
    for alg in algs:
        base = {"axis": axis, "value": value, "seed": seed, "algorithm": alg}
        try:
            row = _run_alg(s, alg, eps, budget, solver.SolverOptions(**opts_kw))
        except Exception as e:  # recorded per row, the sweep carries on
            out.append({**base, "status": f"error:{type(e).__name__}", "runtime_s": None})
            continue
        a = row.get("allocation")
        if fig4 and a is not None:
            local, off = _cycles_split(s, a)
            row["fig4"] = [
                {**base, "user": k, "cell": u.cell, "local_gcycles": local[k] / 1e9, "offloaded_gcycles": off[k] / 1e9}
                for k, u in enumerate(s.users)
            ]
        row = _public(row)
        row.update(base)
        out.append(row)
    return out


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and range of the objective over seeds, per (axis value, algorithm)."""
    groups: dict[tuple, list[float]] = {}
    order = []
    for r in rows:
        key = (r["axis"], r["value"], r["algorithm"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        if r.get("objective") is not None and r.get("status") in ("ok", "timeout"):
            groups[key].append(float(r["objective"]))
    out = []
    for key in order:
        v = groups[key]
        out.append({
            "axis": key[0], "value": key[1], "algorithm": key[2], "n": len(v),
            "mean": float(np.mean(v)) if v else None,
            "min": min(v) if v else None,
            "max": max(v) if v else None,
        })
    return out


def _chart(summary: list[dict], axis: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for alg in dict.fromkeys(r["algorithm"] for r in summary):
        pts = [r for r in summary if r["algorithm"] == alg and r["mean"] is not None]
        if not pts:
            continue
        xs = [float(r["value"]) for r in pts]
        ax.plot(xs, [r["mean"] for r in pts], marker="o", label=alg)
        ax.fill_between(xs, [r["min"] for r in pts], [r["max"] for r in pts], alpha=0.2)
    if axis == "bpc":
        ax.set_xscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("min-max weighted energy (J)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _fig4_chart(rows: list[dict], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    algs = list(dict.fromkeys(r["algorithm"] for r in rows))
    fig, axes = plt.subplots(1, len(algs), figsize=(4 * len(algs), 3.5), squeeze=False)
    for ax, alg in zip(axes[0], algs):
        sel = [r for r in rows if r["algorithm"] == alg]
        first = (sel[0]["value"], sel[0]["seed"])
        sel = [r for r in sel if (r["value"], r["seed"]) == first]
        users = [r["user"] for r in sel]
        loc = [r["local_gcycles"] for r in sel]
        ax.bar(users, loc, label="local")
        ax.bar(users, [r["offloaded_gcycles"] for r in sel], bottom=loc, label="offloaded")
        ax.set_title(alg)
        ax.set_xlabel("user")
        ax.set_ylabel("Gcycles")
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _parse_values(axis: str, raw: list[str]) -> list:
    conv = int if AXES[axis] in ("n_channels", "tasks_per_user") else float
    try:
        return [conv(v) for v in raw]
    except ValueError as e:
        raise CliError(f"bad value for axis {axis}: {e}")


def run_sweep(axis, values, seeds, base_seed, algs, params, eps=solver.DEFAULT_EPSILON, budget=None,
              opts_kw=None, fig4=False, workers=1) -> tuple[list[dict], list[dict]]:
    """Run every (value, replication, algorithm) cell; rows come back in cell order."""
    if axis not in AXES:
        raise CliError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    cells = []
    for value in values:
        for r in range(seeds):
            cells.append((len(cells), axis, value, base_seed + r, list(algs), params, eps, budget, dict(opts_kw or {}), fig4))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows, f4 = [], []
    for res in results:
        for row in res:
            f4.extend(row.pop("fig4", []))
            rows.append(row)
    return rows, f4


def cmd_sweep(args) -> int:
    params = _generator_params(args)
    if args.axis not in AXES:
        raise CliError(f"unknown axis {args.axis!r}")
    values = _parse_values(args.axis, args.values)
    budget = args.time_budget if args.time_budget is not None else _env_budget()
    opts_kw = {"ilp_backend": args.ilp_backend, "ilp_time_budget": args.ilp_time_budget, "workers": args.user_threads}
    rows, f4 = run_sweep(args.axis, values, args.seeds, args.seed, args.algs, params, args.epsilon, budget,
                         opts_kw, args.fig4, args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "jsonl"
    with open(out / f"sweep.{ext}", "w") as fh:
        _emit(rows, args.format, fh, SWEEP_FIELDS)
    summary = summarize(rows)
    with open(out / f"summary.{ext}", "w") as fh:
        _emit(summary, args.format, fh)
    if not args.no_chart:
        _chart(summary, args.axis, out / "sweep.svg")
    if args.fig4 and f4:
        with open(out / f"fig4.{ext}", "w") as fh:
            _emit(f4, args.format, fh)
        if not args.no_chart:
            _fig4_chart(f4, out / "fig4.svg")
    _emit(summary, args.format)
    return EXIT_OK


def compare(s: Scenario, algs, eps=solver.DEFAULT_EPSILON, budget=None, opts=None) -> dict:
    """Objectives, pairwise ratios and savings versus no-offload."""
    rows = {alg: _run_alg(s, alg, eps, budget, opts) for alg in algs}
    obj = {a: r["objective"] for a, r in rows.items()}
    ratios = {}
    for a in algs:
        for b in algs:
            if a != b and obj[a] is not None and obj[b]:
                ratios[f"{a}/{b}"] = obj[a] / obj[b]
    report = {"objectives": obj, "status": {a: r["status"] for a, r in rows.items()}, "ratios": ratios}
    if obj.get("no-offload"):
        report["savings_vs_no_offload"] = {
            a: 1.0 - obj[a] / obj["no-offload"] for a in algs if a != "no-offload" and obj[a] is not None
        }
    if obj.get("lc") is not None and obj.get("optimal") is not None:
        report["lc_gap"] = obj["lc"] - obj["optimal"]
    report["timed_out"] = any(r["status"] == "timeout" for r in rows.values())
    return report


def cmd_compare(args) -> int:
    s = _load(args.scenario)
    budget = args.time_budget if args.time_budget is not None else _env_budget()
    rep = compare(s, args.algs, args.epsilon, budget, _solver_options(args))
    if args.format == "json-lines":
        sys.stdout.write(json.dumps(rep) + "\n")
    else:
        rows = []
        for a in args.algs:
            rows.append({
                "algorithm": a,
                "status": rep["status"][a],
                "objective": rep["objectives"][a],
                "savings_vs_no_offload": rep.get("savings_vs_no_offload", {}).get(a),
            })
        _emit(rows, "csv")
        for k, v in rep["ratios"].items():
            sys.stdout.write(f"# ratio {k} = {v:.6g}\n")
        if "lc_gap" in rep:
            sys.stdout.write(f"# lc_gap = {rep['lc_gap']:.6g}\n")
    return EXIT_TIMEOUT if rep["timed_out"] else EXIT_OK


# ---------------------------------------------------------------- parser


def _add_solver_flags(p, with_alg=True):
    p.add_argument("--epsilon", type=float, default=solver.DEFAULT_EPSILON)
    p.add_argument("--time-budget", type=float, default=None,
                   help=f"overall seconds per algorithm (default: ${TIME_BUDGET_ENV} or unlimited)")
    p.add_argument("--ilp-time-budget", type=float, default=None, help="seconds per 0/1 program")
    p.add_argument("--ilp-backend", choices=("bnb", "highs"), default="bnb")
    p.add_argument("--user-threads", type=int, default=1, help="threads for the per-user programs of a level")
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetoffload", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="draw a random scenario")
    _add_generator_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one scenario file")
    s.add_argument("scenario")
    s.add_argument("--alg", choices=ALGS, default="optimal")
    _add_solver_flags(s)
    s.add_argument("--out", help="allocation JSON")
    s.add_argument("--trace", help="bisection trace JSON")
    s.add_argument("--dump-rates", help="rate table CSV")
    s.add_argument("--dump-blp", help="directory for every built program in LP format")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exhaustive optimum of a tiny scenario")
    o.add_argument("scenario")
    o.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    o.add_argument("--full-offload", action="store_true")
    o.add_argument("--out")
    o.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    o.set_defaults(func=cmd_oracle)

    w = sub.add_parser("sweep", help="parameter sweep over generated scenarios")
    w.add_argument("--axis", required=True, choices=tuple(AXES))
    w.add_argument("--values", nargs="+", required=True)
    w.add_argument("--seeds", type=int, default=15, help="replications; replication r uses seed+r")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--algs", nargs="+", choices=ALGS, default=["optimal", "lc", "no-offload"])
    w.add_argument("--out-dir", default="sweep_out")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--fig4", action="store_true", help="also write per-user local/offloaded cycles")
    w.add_argument("--no-chart", action="store_true")
    _add_solver_flags(w)
    _add_generator_flags(w)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="run several algorithms on one scenario")
    c.add_argument("scenario")
    c.add_argument("--algs", nargs="+", choices=ALGS, default=["optimal", "lc", "no-offload"])
    _add_solver_flags(c)
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (InstanceTooLarge, oracle.SearchTooLarge) as e:
        print(f"error: instance too large: {e}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

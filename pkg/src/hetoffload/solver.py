"""Bisection on the min-max weighted energy level and the baseline schemes.

At each level ``zeta`` every user first solves its own minimum-offloaded-bits
program. Users who can stay fully local are pinned local and drop out of the
radio problem; the others have the tasks that program sends to the cloud
pinned offloaded. The joint 0/1 program then decides feasibility. The
low-complexity variant solves the macro tier first (fewest channels) and
gives the small cells whatever is left.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import ilp
from .energy import allocate, best_local_clock, check, evaluate
from .ilp import Status
from .linearize import CompiledProgram, Mode, UserFixing, build_p2_feasibility, build_ps1, build_ps2
from .model import MACRO, Allocation, Scenario, one_hot
from .radio import DEFAULT_COMBO_CAP, RateTable, build_rate_table

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3


class _LevelTimeout(Exception):
    """A sub-program ran out of time; the level counts as not certified."""


@dataclass
class Iteration:
    zeta: float
    feasible: bool
    status: str
    objective: float | None = None
    elapsed: float = 0.0


@dataclass
class BisectionTrace:
    algorithm: str
    epsilon: float
    zeta_min: float
    zeta_max: float
    iterations: list[Iteration] = field(default_factory=list)
    allocation: Allocation | None = None
    timed_out: bool = False
    infeasible: bool = False

    @property
    def zeta_star(self) -> float:
        return self.zeta_max

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "epsilon": self.epsilon,
            "zeta_min": self.zeta_min,
            "zeta_max": self.zeta_max,
            "timed_out": self.timed_out,
            "infeasible": self.infeasible,
            "iterations": [vars(it) for it in self.iterations],
            "objective": None if self.allocation is None else self.allocation.objective,
        }


@dataclass
class SolverOptions:
    ilp_backend: str = "bnb"
    lp: str = "highs"
    ilp_time_budget: float | None = None
    combo_cap: int = DEFAULT_COMBO_CAP
    dump_dir: str | Path | None = None
    workers: int = 1  # threads for the per-user programs of one level


class _Dumper:
    def __init__(self, root, alg: str):
        self.root = None if root is None else Path(root)
        self.alg = alg
        self.iteration = 0
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def __call__(self, p: ilp.BinaryLinearProgram, label: str) -> None:
        if self.root is not None:
            ilp.export_lp(p, self.root / f"{self.alg}_it{self.iteration:02d}_{label}.lp")


def _solve_ilp(p, opts: SolverOptions, deadline: float | None) -> ilp.IlpResult:
    budget = opts.ilp_time_budget
    if deadline is not None:
        left = max(deadline - time.perf_counter(), 0.0)
        budget = left if budget is None else min(budget, left)
    return ilp.solve(p, budget, backend=opts.ilp_backend, lp=opts.lp)


def solve_no_offload(s: Scenario) -> Allocation:
    """Everything local; each user runs the cheapest clock meeting its deadline."""
    x, mu = [], []
    for k, u in enumerate(s.users):
        ones = [1] * u.n_tasks
        v = best_local_clock(u, ones)
        if v is None:
            log.warning("user %d has no clock level meeting tau1 locally", k)
            v = u.n_levels - 1
        x.append(ones)
        mu.append(list(one_hot(v, u.n_levels)))
    rho = [[0] * s.n_channels for _ in s.users]
    return allocate(s, x, mu, rho)


def user_fixing(s: Scenario, zeta: float, opts: SolverOptions, deadline=None, dump=None) -> dict[int, UserFixing]:
    """Per-user min-bits program at ``zeta``: zero optimum pins the user local,
    otherwise the tasks it offloads are pinned offloaded."""
    progs = [build_ps1(u, zeta, tag=str(k)) for k, u in enumerate(s.users)]
    if dump:
        for k, p in enumerate(progs):
            dump(p, f"ps1_user{k}")
    solve = lambda p: _solve_ilp(p, opts, deadline)
    if opts.workers > 1 and len(progs) > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            results = list(pool.map(solve, progs))
    else:
        results = [solve(p) for p in progs]
    out = {}
    for k, (u, p, r) in enumerate(zip(s.users, progs, results)):
        if r.status is Status.TIMEOUT:
            raise _LevelTimeout(f"user {k}")
        if r.status is not Status.OPTIMAL:
            raise RuntimeError(f"per-user program for user {k} returned {r.status.value}")
        if r.objective <= 1e-9 * max(p.offset, 1.0):
            out[k] = UserFixing.local()
        else:
            vals = r.assignment
            out[k] = UserFixing.offload(l for l in range(u.n_tasks) if vals[f"x_{k}_{l}"] == 0)
    return out


def _merge(s: Scenario, fixing: dict[int, UserFixing], parts: dict) -> Allocation:
    x, mu, rho = [], [], []
    for k, u in enumerate(s.users):
        if k in parts:
            xk, mk, rk = parts[k]
        else:
            xk = [1] * u.n_tasks
            v = best_local_clock(u, xk)
            mk = list(one_hot(u.n_levels - 1 if v is None else v, u.n_levels))
            rk = [0] * s.n_channels
        x.append(xk)
        mu.append(mk)
        rho.append(rk)
    return allocate(s, x, mu, rho)


def _bisect(
    s: Scenario,
    name: str,
    check_level: Callable[[float], tuple[str, Allocation | None]],
    lo: float,
    hi: float,
    witness: Allocation | None,
    eps: float,
    deadline: float | None,
    dump: _Dumper,
) -> BisectionTrace:
    trace = BisectionTrace(name, eps, lo, hi, allocation=witness)
    while trace.zeta_max - trace.zeta_min >= eps:
        if deadline is not None and time.perf_counter() >= deadline:
            trace.timed_out = True
            break
        zeta = 0.5 * (trace.zeta_max + trace.zeta_min)
        dump.iteration = len(trace.iterations) + 1
        t0 = time.perf_counter()
        try:
            status, alloc = check_level(zeta)
        except _LevelTimeout:
            status, alloc = "timeout", None
        ok = status == "feasible"
        trace.iterations.append(
            Iteration(zeta, ok, status, None if alloc is None else alloc.objective, time.perf_counter() - t0)
        )
        if status == "timeout":
            trace.timed_out = True
        if ok:
            trace.zeta_max = zeta
            trace.allocation = alloc
        else:
            trace.zeta_min = zeta
    return trace


def _verified(s: Scenario, alloc: Allocation, zeta: float) -> bool:
    ev = evaluate(s, alloc.x, alloc.mu, alloc.rho, zeta, rtol=1e-7)
    return ev.feasible_at_level


def _status_of(r: ilp.IlpResult) -> str:
    if r.status is Status.OPTIMAL:
        return "feasible"
    if r.status is Status.TIMEOUT:
        return "timeout"
    return "infeasible"


def solve_optimal(
    s: Scenario,
    epsilon: float = DEFAULT_EPSILON,
    time_budget: float | None = None,
    opts: SolverOptions | None = None,
    rt: RateTable | None = None,
) -> tuple[Allocation, BisectionTrace]:
    """Min-max weighted energy within ``epsilon`` of optimal via joint feasibility checks."""
    opts = opts or SolverOptions()
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    rt = rt or build_rate_table(s, opts.combo_cap)
    start = solve_no_offload(s)
    if not start.feasible:
        raise ValueError("scenario has a user that cannot meet tau1 locally")
    dump = _Dumper(opts.dump_dir, "optimal")

    def check_level(zeta):
        fixing = user_fixing(s, zeta, opts, deadline, dump)
        cp = build_p2_feasibility(s, rt, zeta, fixing, cap=opts.combo_cap)
        if not cp.offloading_users:
            return "feasible", _merge(s, fixing, {})
        dump(cp.blp, "p2")
        r = _solve_ilp(cp.blp, opts, deadline)
        if r.status is not Status.OPTIMAL:
            return _status_of(r), None
        alloc = _merge(s, fixing, cp.decode(s, r.values))
        if not _verified(s, alloc, zeta):
            log.warning("decoded witness fails direct evaluation at zeta=%g", zeta)
            return "infeasible", None
        return "feasible", alloc

    trace = _bisect(s, "optimal", check_level, 0.0, start.objective, start, epsilon, deadline, dump)
    return trace.allocation, trace


def solve_lc(
    s: Scenario,
    epsilon: float = DEFAULT_EPSILON,
    time_budget: float | None = None,
    opts: SolverOptions | None = None,
    rt: RateTable | None = None,
) -> tuple[Allocation, BisectionTrace]:
    """Decoupled scheme: macro users take the fewest channels, small cells share the rest.

    One shared level ``zeta`` drives both stages inside a single bisection.
    """
    opts = opts or SolverOptions()
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    rt = rt or build_rate_table(s, opts.combo_cap)
    start = solve_no_offload(s)
    if not start.feasible:
        raise ValueError("scenario has a user that cannot meet tau1 locally")
    dump = _Dumper(opts.dump_dir, "lc")
    mues, sues = set(s.mues), set(s.sues)

    def check_level(zeta):
        fixing = user_fixing(s, zeta, opts, deadline, dump)
        parts: dict = {}
        used: set[int] = set()
        if any(fixing[k].mode is not Mode.LOCAL for k in mues):
            cp = build_ps2(s, rt, zeta, fixing, cap=opts.combo_cap)
            dump(cp.blp, "ps2")
            r = _solve_ilp(cp.blp, opts, deadline)
            if r.values is None:
                return _status_of(r), None
            parts.update(cp.decode(s, r.values))
            used = {n for k in mues if k in parts for n, on in enumerate(parts[k][2]) if on}
        if any(fixing[k].mode is not Mode.LOCAL for k in sues):
            free = [n for n in range(s.n_channels) if n not in used]
            cp = build_p2_feasibility(s, rt, zeta, fixing, channels=free, users=sorted(sues), cap=opts.combo_cap)
            dump(cp.blp, "p2_sc")
            r = _solve_ilp(cp.blp, opts, deadline)
            if r.status is not Status.OPTIMAL:
                return _status_of(r), None
            parts.update(cp.decode(s, r.values))
        alloc = _merge(s, fixing, parts)
        if not _verified(s, alloc, zeta):
            log.warning("decoded LC witness fails direct evaluation at zeta=%g", zeta)
            return "infeasible", None
        return "feasible", alloc

    trace = _bisect(s, "lc", check_level, 0.0, start.objective, start, epsilon, deadline, dump)
    return trace.allocation, trace


def full_offload_bound(s: Scenario) -> float:
    """Level no full-offload decision can exceed: transmit for tau2 on every channel."""
    hi = 0.0
    for u in s.users:
        if any(t.bits > 0 for t in u.tasks):
            p = s.radio.total_power(u.cell)
            hi = max(hi, u.weight * u.tau2 * p * s.radio.bandwidth * s.n_channels)
    return hi


def solve_full_offload(
    s: Scenario,
    epsilon: float = DEFAULT_EPSILON,
    time_budget: float | None = None,
    opts: SolverOptions | None = None,
    rt: RateTable | None = None,
) -> tuple[Allocation | None, BisectionTrace]:
    """Every task offloaded; bisection over the level with the joint machinery.

    Returns ``(None, trace)`` with ``trace.infeasible`` set when the channels
    or transmit deadlines cannot carry every task.
    """
    opts = opts or SolverOptions()
    deadline = None if time_budget is None else time.perf_counter() + time_budget
    rt = rt or build_rate_table(s, opts.combo_cap)
    dump = _Dumper(opts.dump_dir, "full")
    fixing = {k: UserFixing.offload(range(u.n_tasks)) for k, u in enumerate(s.users)}

    def check_level(zeta):
        cp = build_p2_feasibility(s, rt, zeta, fixing, cap=opts.combo_cap)
        dump(cp.blp, "p2_full")
        r = _solve_ilp(cp.blp, opts, deadline)
        if r.status is not Status.OPTIMAL:
            return _status_of(r), None
        alloc = _merge(s, fixing, cp.decode(s, r.values))
        if not _verified(s, alloc, zeta):
            return "infeasible", None
        return "feasible", alloc

    hi = full_offload_bound(s)
    status, top = check_level(hi)
    if status != "feasible":
        trace = BisectionTrace(
            "full-offload", epsilon, hi, hi, [Iteration(hi, False, status)], None,
            timed_out=status == "timeout", infeasible=status == "infeasible",
        )
        return None, trace
    trace = _bisect(s, "full-offload", check_level, 0.0, hi, top, epsilon, deadline, dump)
    trace.iterations.insert(0, Iteration(hi, True, "feasible", top.objective))
    return trace.allocation, trace


ALGORITHMS = {
    "optimal": solve_optimal,
    "lc": solve_lc,
    "full-offload": solve_full_offload,
}


def run(s: Scenario, alg: str, epsilon=DEFAULT_EPSILON, time_budget=None, opts=None):
    """Dispatch by name; returns ``(allocation or None, trace or None)``."""
    if alg == "no-offload":
        return solve_no_offload(s), None
    return ALGORITHMS[alg](s, epsilon, time_budget, opts)

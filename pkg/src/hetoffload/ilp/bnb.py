"""Branch-and-bound over LP relaxations for 0/1 programs.

Node selection is depth-first; among open nodes of equal depth the one with
the better relaxation bound goes first, then creation order. The branching
variable is the most fractional one, lowest index on ties. Both children are
solved when created, so their own bounds drive the ordering and infeasible
children never enter the queue.
"""

from __future__ import annotations

import heapq
import logging
import math
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .blp import BinaryLinearProgram, IlpResult, Sense, Status
from .lp import PreparedLP, solve_prepared

log = logging.getLogger(__name__)

INT_TOL = 1e-6
OBJ_TOL = 1e-9


def _most_fractional(x: np.ndarray) -> int | None:
    frac = np.abs(x - np.round(x))
    j = int(np.argmax(frac))  # argmax returns the lowest index on ties
    if frac[j] <= INT_TOL:
        return None
    return j


def solve(
    p: BinaryLinearProgram,
    time_budget: float | None = None,
    *,
    backend: str = "bnb",
    lp: str = "highs",
    node_limit: int | None = None,
    log_bounds: bool = False,
) -> IlpResult:
    """Solve ``p`` exactly.

    ``backend="bnb"`` runs the in-house search; ``backend="highs"`` hands the
    whole program to HiGHS' MIP solver (for instances too large for the
    in-house engine). ``lp`` picks the relaxation route for ``bnb``.
    TIMEOUT results carry the best incumbent found so far, if any.
    """
    if backend == "highs":
        return _solve_highs_mip(p, time_budget)
    if backend != "bnb":
        raise ValueError(f"unknown backend {backend!r}")

    t0 = time.perf_counter()
    deadline = math.inf if time_budget is None else t0 + time_budget
    prep = PreparedLP(p)
    n = p.n_vars
    feas_only = p.sense is Sense.FEASIBILITY
    res = IlpResult(Status.INFEASIBLE, names=list(p.names))

    if n == 0:
        if prep.trivially_infeasible:
            res.elapsed = time.perf_counter() - t0
            return res
        res.status, res.values, res.objective = Status.OPTIMAL, np.zeros(0, dtype=int), p.offset
        res.elapsed = time.perf_counter() - t0
        return res

    best_x: np.ndarray | None = None
    best_obj = math.inf
    seq = 0
    heap: list = []

    def relax(lo, hi):
        res.lp_solves += 1
        return solve_prepared(prep, lo, hi, lp)

    lo0, hi0 = np.zeros(n), np.ones(n)
    root = relax(lo0, hi0)
    if root.status is Status.OPTIMAL:
        heapq.heappush(heap, (0, root.objective, seq, 0, lo0, hi0, root.x))
    node_id = 0
    timed_out = False

    while heap:
        if time.perf_counter() > deadline or (node_limit is not None and res.nodes >= node_limit):
            timed_out = True
            break
        neg_depth, bound, _, nid, lo, hi, x = heapq.heappop(heap)
        if best_x is not None and bound >= best_obj - OBJ_TOL * max(1.0, abs(best_obj)):
            continue
        res.nodes += 1
        j = _most_fractional(x)
        if j is None:
            xr = np.round(x).astype(int)
            if p.is_satisfied(xr):
                obj = p.objective_value(xr)
                if obj < best_obj - OBJ_TOL * max(1.0, abs(best_obj)) or best_x is None:
                    best_x, best_obj = xr, obj
                if feas_only:
                    break
                continue
            # integral within tolerance yet violating some row: force a split on the least-integral variable
            frac = np.abs(x - xr)
            frac[lo == hi] = -1
            j = int(np.argmax(frac))
            if frac[j] <= 0:
                continue
        first = 1 if x[j] >= 0.5 else 0
        for val in (first, 1 - first):
            clo, chi = lo.copy(), hi.copy()
            clo[j] = chi[j] = val
            child = relax(clo, chi)
            if child.status is not Status.OPTIMAL:
                continue
            node_id += 1
            seq += 1
            if log_bounds:
                res.bound_log.append((nid, node_id, child.objective))
            cb = child.objective
            if best_x is not None and cb >= best_obj - OBJ_TOL * max(1.0, abs(best_obj)):
                continue
            heapq.heappush(heap, (neg_depth - 1, cb, seq, node_id, clo, chi, child.x))

    if log_bounds and root.status is Status.OPTIMAL:
        res.bound_log.insert(0, (-1, 0, root.objective))
    res.elapsed = time.perf_counter() - t0
    if best_x is not None:
        res.values, res.objective = best_x, best_obj
        res.status = Status.TIMEOUT if (timed_out and not feas_only) else Status.OPTIMAL
    elif timed_out:
        res.status = Status.TIMEOUT
    return res


def _solve_highs_mip(p: BinaryLinearProgram, time_budget: float | None) -> IlpResult:
    t0 = time.perf_counter()
    prep = PreparedLP(p)
    n = p.n_vars
    res = IlpResult(Status.INFEASIBLE, names=list(p.names))
    if prep.trivially_infeasible:
        return res
    if n == 0:
        res.status, res.values, res.objective = Status.OPTIMAL, np.zeros(0, dtype=int), p.offset
        return res
    cons = []
    if prep.A_ub.shape[0]:
        cons.append(LinearConstraint(prep.A_ub, -np.inf, prep.b_ub))
    if prep.A_eq.shape[0]:
        cons.append(LinearConstraint(prep.A_eq, prep.b_eq, prep.b_eq))
    opts = {"disp": False, "mip_rel_gap": 0.0}
    if time_budget is not None:
        opts["time_limit"] = float(time_budget)
    c = prep.c if p.sense is Sense.MINIMIZE else np.zeros(n)
    r = milp(c, integrality=np.ones(n), bounds=Bounds(0, 1), constraints=cons, options=opts)
    res.nodes = int(getattr(r, "mip_node_count", 0) or 0)
    res.elapsed = time.perf_counter() - t0
    if r.x is not None:
        xr = np.round(r.x).astype(int)
        if p.is_satisfied(xr, tol=1e-6):
            res.values, res.objective = xr, p.objective_value(xr)
            res.status = Status.OPTIMAL if r.status == 0 or p.sense is Sense.FEASIBILITY else Status.TIMEOUT
            return res
        log.warning("HiGHS returned a point violating rows beyond tolerance; treating as no solution")
    if r.status == 1:
        res.status = Status.TIMEOUT
    return res

"""Dense two-phase tableau simplex for small bounded LPs.

Used as the in-house LP route inside branch-and-bound on small programs and
as an independent cross-check of the HiGHS route. Dantzig pricing by default;
if the iteration guard trips, the solve restarts from scratch under Bland's
rule, which cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blp import Status

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class _IterationLimit(RuntimeError):
    pass


@dataclass
class TableauResult:
    status: Status
    x: np.ndarray | None
    objective: float
    iterations: int
    rule: str


def _pivot(T: np.ndarray, obj: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    if obj[col] != 0.0:
        obj -= obj[col] * T[row]
    basis[row] = col


def _run(T, obj, basis, allowed: int, rule: str, limit: int) -> tuple[str, int]:
    """Iterate on tableau ``T`` with reduced-cost row ``obj``. Columns >= ``allowed`` never enter."""
    it = 0
    while True:
        red = obj[:allowed]
        if rule == "bland":
            cand = np.flatnonzero(red < -FEAS_TOL)
            if cand.size == 0:
                return "optimal", it
            col = int(cand[0])
        else:
            col = int(np.argmin(red))
            if red[col] >= -FEAS_TOL:
                return "optimal", it
        colv = T[:, col]
        pos = np.flatnonzero(colv > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", it
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        # lowest basic index among ties (Bland's leaving rule; harmless under Dantzig)
        row = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, obj, basis, row, col)
        it += 1
        if it > limit:
            raise _IterationLimit


def _solve(c, A_ub, b_ub, A_eq, b_eq, lo, hi, rule: str) -> TableauResult:
    n = c.size
    free = hi - lo > 0
    fcols = np.flatnonzero(free)
    nf = fcols.size

    rows, rhs, kinds = [], [], []
    if A_ub.shape[0]:
        shifted = b_ub - A_ub @ lo
        for a, b in zip(A_ub[:, fcols], shifted):
            rows.append(a)
            rhs.append(b)
            kinds.append("le")
    if A_eq.shape[0]:
        shifted = b_eq - A_eq @ lo
        for a, b in zip(A_eq[:, fcols], shifted):
            rows.append(a)
            rhs.append(b)
            kinds.append("eq")
    ub = (hi - lo)[fcols]
    for j in range(nf):
        a = np.zeros(nf)
        a[j] = 1.0
        rows.append(a)
        rhs.append(ub[j])
        kinds.append("le")

    # trivial rows with no free columns decide feasibility on their own
    keep = []
    for i, a in enumerate(rows):
        if nf == 0 or not np.any(a):
            b = rhs[i]
            if (kinds[i] == "le" and b < -FEAS_TOL) or (kinds[i] == "eq" and abs(b) > FEAS_TOL):
                return TableauResult(Status.INFEASIBLE, None, np.nan, 0, rule)
        else:
            keep.append(i)
    rows = [rows[i] for i in keep]
    rhs = [rhs[i] for i in keep]
    kinds = [kinds[i] for i in keep]
    m = len(rows)

    if m == 0 or nf == 0:
        x = lo.copy()
        # bounded variables with nonpositive cost move to their upper bound
        x[fcols] = np.where(c[fcols] < 0, hi[fcols], lo[fcols])
        return TableauResult(Status.OPTIMAL, x, float(c @ x), 0, rule)

    A = np.array(rows, dtype=float).reshape(m, nf)
    b = np.array(rhs, dtype=float)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            if kinds[i] == "le":
                kinds[i] = "ge"

    n_slack = sum(k != "eq" for k in kinds)
    n_art = sum(k != "le" for k in kinds)
    width = nf + n_slack + n_art
    T = np.zeros((m, width + 1))
    T[:, :nf] = A
    T[:, -1] = b
    basis = [0] * m
    s = nf
    a_col = nf + n_slack
    for i, k in enumerate(kinds):
        if k == "le":
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif k == "ge":
            T[i, s] = -1.0
            s += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            a_col += 1
        else:
            T[i, a_col] = 1.0
            basis[i] = a_col
            a_col += 1

    limit = 50 * (m + width) + 100
    iters = 0
    art_start = nf + n_slack
    if n_art:
        cost1 = np.zeros(width + 1)
        cost1[art_start:width] = 1.0
        obj = cost1.copy()
        for i, bi in enumerate(basis):
            if cost1[bi]:
                obj -= T[i]
        status, it = _run(T, obj, basis, width, rule, limit)
        iters += it
        if -obj[-1] > FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return TableauResult(Status.INFEASIBLE, None, np.nan, iters, rule)
        # drive zero-valued artificials out of the basis
        drop = []
        for i in range(m):
            if basis[i] >= art_start:
                cand = np.flatnonzero(np.abs(T[i, :art_start]) > 1e-9)
                if cand.size:
                    _pivot(T, obj, basis, i, int(cand[0]))
                else:
                    drop.append(i)
        if drop:
            keep_rows = [i for i in range(m) if i not in drop]
            T = T[keep_rows]
            basis = [basis[i] for i in keep_rows]
        T = np.hstack([T[:, :art_start], T[:, -1:]])
        width = art_start

    cost = np.zeros(width + 1)
    cost[:nf] = c[fcols]
    obj = cost.copy()
    for i, bi in enumerate(basis):
        if cost[bi]:
            obj -= cost[bi] * T[i]
    status, it = _run(T, obj, basis, width, rule, limit)
    iters += it
    if status == "unbounded":
        return TableauResult(Status.UNBOUNDED, None, -np.inf, iters, rule)

    y = np.zeros(width)
    for i, bi in enumerate(basis):
        y[bi] = T[i, -1]
    x = lo.astype(float).copy()
    x[fcols] += np.clip(y[:nf], 0.0, None)
    return TableauResult(Status.OPTIMAL, x, float(c @ x), iters, rule)


def tableau_simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lo=None, hi=None, rule: str = "dantzig") -> TableauResult:
    """Minimise ``c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lo <= x <= hi`` (finite bounds)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lo = np.zeros(n) if lo is None else np.asarray(lo, dtype=float)
    hi = np.ones(n) if hi is None else np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        return TableauResult(Status.INFEASIBLE, None, np.nan, 0, rule)
    try:
        return _solve(c, A_ub, b_ub, A_eq, b_eq, lo, hi, rule)
    except _IterationLimit:
        if rule == "bland":
            raise RuntimeError("simplex failed to converge under Bland's rule")
        return _solve(c, A_ub, b_ub, A_eq, b_eq, lo, hi, "bland")

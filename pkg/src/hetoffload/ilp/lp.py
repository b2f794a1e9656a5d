"""LP relaxation of a :class:`BinaryLinearProgram` over box bounds.

Rows are scaled to unit max-abs coefficient and exact duplicates removed once
per program; every relaxation solve then only changes the variable bounds.
Two routes are available: HiGHS dual simplex on a persistent model (bound
changes warm-start from the previous basis, which is what makes deep
branch-and-bound affordable), and the in-house dense tableau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import highspy
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .blp import BinaryLinearProgram, Relation, Status
from .simplex import tableau_simplex

LP_FEAS_TOL = 1e-9

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": LP_FEAS_TOL,
    "dual_feasibility_tolerance": LP_FEAS_TOL,
}


@dataclass
class LpResult:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    dual_bound: float = math.nan


class PreparedLP:
    """Scaled, de-duplicated ``A_ub x <= b_ub`` / ``A_eq x = b_eq`` form.

    Not thread-safe: the HiGHS model is shared by every solve on the program.
    """

    def __init__(self, p: BinaryLinearProgram):
        self.n = p.n_vars
        self.c = p.objective
        self.offset = p.offset
        self.trivially_infeasible = False
        seen = set()
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for con in p.constraints:
            if not con.index:
                if (con.relation is Relation.LE and 0 > con.rhs + LP_FEAS_TOL) or (
                    con.relation is Relation.GE and 0 < con.rhs - LP_FEAS_TOL
                ) or (con.relation is Relation.EQ and abs(con.rhs) > LP_FEAS_TOL):
                    self.trivially_infeasible = True
                continue
            scale = max(abs(v) for v in con.coef)
            coef = tuple(v / scale for v in con.coef)
            rhs = con.rhs / scale
            if con.relation is Relation.GE:
                coef = tuple(-v for v in coef)
                rhs = -rhs
            key = (con.index, coef, con.relation is Relation.EQ, rhs)
            if key in seen:
                continue
            seen.add(key)
            if con.relation is Relation.EQ:
                eq_rows.append((con.index, coef))
                eq_rhs.append(rhs)
            else:
                ub_rows.append((con.index, coef))
                ub_rhs.append(rhs)
        self.A_ub = _csr(ub_rows, self.n)
        self.b_ub = np.array(ub_rhs, dtype=float)
        self.A_eq = _csr(eq_rows, self.n)
        self.b_eq = np.array(eq_rhs, dtype=float)
        self._dense = None
        self._highs = None

    @property
    def dense(self):
        if self._dense is None:
            self._dense = (self.A_ub.toarray(), self.A_eq.toarray())
        return self._dense


def _csr(rows, n) -> sp.csr_matrix:
    r, c, v = [], [], []
    for i, (idx, coef) in enumerate(rows):
        r.extend([i] * len(idx))
        c.extend(idx)
        v.extend(coef)
    return sp.csr_matrix((v, (r, c)), shape=(len(rows), n))


def _persistent(prep: PreparedLP) -> highspy.Highs:
    if prep._highs is None:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", LP_FEAS_TOL)
        h.setOptionValue("dual_feasibility_tolerance", LP_FEAS_TOL)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("solver", "simplex")
        A = sp.vstack([prep.A_ub, prep.A_eq]).tocsr()
        lp = highspy.HighsLp()
        lp.num_col_ = prep.n
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = np.asarray(prep.c, dtype=float)
        lp.col_lower_ = np.zeros(prep.n)
        lp.col_upper_ = np.ones(prep.n)
        lp.row_lower_ = np.concatenate([np.full(prep.A_ub.shape[0], -highspy.kHighsInf), prep.b_eq])
        lp.row_upper_ = np.concatenate([prep.b_ub, prep.b_eq])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.num_col_ = prep.n
        lp.a_matrix_.num_row_ = A.shape[0]
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        h.passModel(lp)
        prep._highs = h
    return prep._highs


def _solve_persistent(prep: PreparedLP, lo, hi) -> LpResult | None:
    h = _persistent(prep)
    h.changeColsBounds(prep.n, np.arange(prep.n, dtype=np.int32), lo, hi)
    h.run()
    st = h.getModelStatus()
    if st == highspy.HighsModelStatus.kInfeasible:
        return LpResult(Status.INFEASIBLE)
    if st == highspy.HighsModelStatus.kUnbounded:
        return LpResult(Status.UNBOUNDED, objective=-math.inf)
    if st != highspy.HighsModelStatus.kOptimal:
        # drop the warm start and let the caller use the cold route
        h.clearSolver()
        return None
    sol = h.getSolution()
    x = np.clip(np.asarray(sol.col_value, dtype=float), lo, hi)
    y = np.asarray(sol.row_dual, dtype=float)
    d = np.asarray(sol.col_dual, dtype=float)
    rhs = np.concatenate([prep.b_ub, prep.b_eq])
    dual = float(rhs @ y) + float(np.where(d > 0, lo, hi) @ d)
    return LpResult(Status.OPTIMAL, x, float(prep.c @ x) + prep.offset, dual + prep.offset)


def _solve_highs(prep: PreparedLP, lo, hi) -> LpResult:
    if prep.n:
        r = _solve_persistent(prep, lo, hi)
        if r is not None:
            return r
    kw = {}
    if prep.A_ub.shape[0]:
        kw["A_ub"], kw["b_ub"] = prep.A_ub, prep.b_ub
    if prep.A_eq.shape[0]:
        kw["A_eq"], kw["b_eq"] = prep.A_eq, prep.b_eq
    bounds = np.column_stack([lo, hi]) if prep.n else None
    c = prep.c if prep.n else np.zeros(0)
    res = None
    for method in ("highs-ds", "highs-ipm"):
        res = linprog(c, bounds=bounds, method=method, options=_HIGHS_OPTIONS, **kw)
        if res.status in (0, 2, 3):
            break
    if res.status == 2:
        return LpResult(Status.INFEASIBLE)
    if res.status == 3:
        return LpResult(Status.UNBOUNDED, objective=-math.inf)
    if res.status != 0:
        # last resort for numerically awkward small programs
        if prep.n * (prep.A_ub.shape[0] + prep.A_eq.shape[0]) <= 200_000:
            return _solve_tableau(prep, lo, hi)
        raise RuntimeError(f"LP solve failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    dual = 0.0
    if prep.A_ub.shape[0]:
        dual += float(prep.b_ub @ res.ineqlin.marginals)
    if prep.A_eq.shape[0]:
        dual += float(prep.b_eq @ res.eqlin.marginals)
    if prep.n:
        dual += float(lo @ res.lower.marginals + hi @ res.upper.marginals)
    return LpResult(Status.OPTIMAL, x, float(prep.c @ x) + prep.offset, dual + prep.offset)


def _solve_tableau(prep: PreparedLP, lo, hi) -> LpResult:
    A_ub, A_eq = prep.dense
    r = tableau_simplex(prep.c, A_ub, prep.b_ub, A_eq, prep.b_eq, lo, hi)
    if r.status is not Status.OPTIMAL:
        return LpResult(r.status)
    return LpResult(Status.OPTIMAL, r.x, r.objective + prep.offset)


def solve_prepared(prep: PreparedLP, lo=None, hi=None, method: str = "highs") -> LpResult:
    lo = np.zeros(prep.n) if lo is None else np.asarray(lo, dtype=float)
    hi = np.ones(prep.n) if hi is None else np.asarray(hi, dtype=float)
    if prep.trivially_infeasible or np.any(lo > hi):
        return LpResult(Status.INFEASIBLE)
    if method == "highs":
        return _solve_highs(prep, lo, hi)
    if method == "tableau":
        return _solve_tableau(prep, lo, hi)
    raise ValueError(f"unknown LP method {method!r}")


def solve_lp_relaxation(p: BinaryLinearProgram, lo=None, hi=None, method: str = "highs") -> LpResult:
    """Relax ``x in {0,1}`` to ``lo <= x <= hi`` (default ``[0, 1]``) and solve."""
    return solve_prepared(PreparedLP(p), lo, hi, method)

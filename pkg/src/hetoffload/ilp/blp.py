from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Sense(str, enum.Enum):
    MINIMIZE = "minimize"
    FEASIBILITY = "feasibility"


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Constraint:
    index: tuple[int, ...]
    coef: tuple[float, ...]
    relation: Relation
    rhs: float
    name: str = ""


class BinaryLinearProgram:
    """A 0/1 program: minimise ``c @ x + offset`` over linear rows.

    Variables are added by name and referenced by integer index. Rows are kept
    in insertion order; callers build the program once and then hand it to a
    solver.
    """

    def __init__(self, sense: Sense = Sense.MINIMIZE, name: str = "blp"):
        self.sense = Sense(sense)
        self.name = name
        self.names: list[str] = []
        self._index: dict[str, int] = {}
        self._obj: list[float] = []
        self.offset = 0.0
        self.constraints: list[Constraint] = []
        self._csr = None

    # -- construction -------------------------------------------------------
    def add_var(self, name: str, obj: float = 0.0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        i = len(self.names)
        self.names.append(name)
        self._index[name] = i
        self._obj.append(float(obj))
        self._csr = None
        return i

    def var(self, name: str) -> int:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def set_obj(self, i: int, coef: float) -> None:
        self._obj[i] = float(coef)

    def add_constraint(self, terms: Mapping[int, float] | Iterable[tuple[int, float]], relation, rhs: float, name: str = "") -> None:
        merged: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for i, c in items:
            merged[i] = merged.get(i, 0.0) + float(c)
        idx = tuple(sorted(i for i, c in merged.items() if c != 0.0))
        coef = tuple(merged[i] for i in idx)
        if not all(math.isfinite(c) for c in coef) or not math.isfinite(rhs):
            raise ValueError(f"non-finite coefficient in row {name!r}")
        self.constraints.append(Constraint(idx, coef, Relation(relation), float(rhs), name))
        self._csr = None

    # -- views ---------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def objective(self) -> np.ndarray:
        return np.array(self._obj, dtype=float)

    def matrix(self) -> sp.csr_matrix:
        if self._csr is None:
            rows, cols, vals = [], [], []
            for r, con in enumerate(self.constraints):
                rows.extend([r] * len(con.index))
                cols.extend(con.index)
                vals.extend(con.coef)
            self._csr = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_constraints, self.n_vars))
        return self._csr

    def objective_value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float)) + self.offset

    def violations(self, x, tol: float = 1e-9) -> list[int]:
        """Indices of rows violated by ``x``; slack is measured on max-abs-scaled rows."""
        x = np.asarray(x, dtype=float)
        lhs = self.matrix() @ x if self.n_constraints else np.zeros(0)
        bad = []
        for r, con in enumerate(self.constraints):
            scale = max((abs(c) for c in con.coef), default=1.0)
            a, b = lhs[r] / scale, con.rhs / scale
            t = tol * max(1.0, abs(b))
            if con.relation is Relation.LE and a > b + t:
                bad.append(r)
            elif con.relation is Relation.GE and a < b - t:
                bad.append(r)
            elif con.relation is Relation.EQ and abs(a - b) > t:
                bad.append(r)
        return bad

    def is_satisfied(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x)
        if x.shape != (self.n_vars,) or np.any((x != 0) & (x != 1)):
            return False
        return not self.violations(x, tol)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryLinearProgram):
            return NotImplemented
        return (
            self.sense == other.sense
            and self.names == other.names
            and self._obj == other._obj
            and self.offset == other.offset
            and [(c.index, c.coef, c.relation, c.rhs) for c in self.constraints]
            == [(c.index, c.coef, c.relation, c.rhs) for c in other.constraints]
        )

    def __repr__(self) -> str:
        return f"BinaryLinearProgram({self.name!r}, vars={self.n_vars}, rows={self.n_constraints}, sense={self.sense.value})"


@dataclass
class IlpResult:
    status: Status
    values: np.ndarray | None = None
    objective: float = math.nan
    nodes: int = 0
    lp_solves: int = 0
    elapsed: float = 0.0
    names: list[str] = field(default_factory=list, repr=False)
    bound_log: list[tuple[int, int, float]] = field(default_factory=list, repr=False)

    @property
    def assignment(self) -> dict[str, int]:
        if self.values is None:
            return {}
        return {n: int(v) for n, v in zip(self.names, self.values)}

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

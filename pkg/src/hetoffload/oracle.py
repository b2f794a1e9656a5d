"""Exhaustive ground truth for tiny instances.

:func:`brute_force` works on the original nonlinear model through the
``energy`` functions and never touches the linearisation or the rate table.
Once every channel's occupant is fixed the users no longer interact, so for
each channel assignment the per-user minimum over (placement, clock) is
exact; every leaf is still scored, with per-user results cached on
(user, rate, channel count).
"""

from __future__ import annotations

import itertools
import math
import numpy as np

from .energy import allocate, local_energy, satisfies_c4, tx_energy, tx_time
from .ilp import BinaryLinearProgram, IlpResult, Sense, Status
from .model import MACRO, Allocation, Scenario, one_hot
from .radio import IDLE, enumerate_combos, rate, sinr

DEFAULT_CAP = 100_000_000


class SearchTooLarge(ValueError):
    pass


def _channel_states(s: Scenario) -> list[tuple]:
    states: list[tuple] = [("idle",)]
    states += [("mue", k) for k in s.mues]
    states += [("combo", c) for c in enumerate_combos(s)]
    return states


def _state_rates(s: Scenario, n: int, st: tuple) -> list[tuple[int, float]]:
    w = s.radio.bandwidth
    if st[0] == "mue":
        k = st[1]
        return [(k, rate(sinr(s, k, MACRO, n), w))]
    if st[0] == "combo":
        occ = [k for k in st[1] if k != IDLE]
        return [(k, rate(sinr(s, k, s.users[k].cell, n, [j for j in occ if j != k]), w)) for k in occ]
    return []


def search_size(s: Scenario, full_offload: bool = False) -> int:
    per_user = sum((1 if full_offload else 2 ** u.n_tasks) * u.n_levels for u in s.users)
    return len(_channel_states(s)) ** s.n_channels * max(per_user, 1)


def _placements(n_tasks: int, full_offload: bool):
    if full_offload:
        return [(0,) * n_tasks]
    return list(itertools.product((0, 1), repeat=n_tasks))


def brute_force(s: Scenario, cap: int = DEFAULT_CAP, full_offload: bool = False) -> tuple[float, Allocation | None]:
    """Exact min-max weighted energy by exhaustive search.

    Returns ``(inf, None)`` when no decision satisfies C1-C7.
    """
    size = search_size(s, full_offload)
    if size > cap:
        raise SearchTooLarge(f"search size {size} exceeds cap {cap}")
    N = s.n_channels
    states = _channel_states(s)
    contrib = [[_state_rates(s, n, st) for st in states] for n in range(N)]
    placements = [_placements(u.n_tasks, full_offload) for u in s.users]
    memo: dict[tuple[int, float, int], tuple[float, tuple, int]] = {}

    def best_for(k: int, r: float, nch: int):
        key = (k, r, nch)
        hit = memo.get(key)
        if hit is not None:
            return hit
        u = s.users[k]
        power = s.radio.total_power(u.cell)
        best = (math.inf, None, -1)
        for x in placements[k]:
            if tx_time(u, x, r) > u.tau2 * (1 + 1e-9):
                continue
            et = tx_energy(u, x, r, nch, power, s.radio.bandwidth)
            for v in range(u.n_levels):
                if not satisfies_c4(u, x, v):
                    continue
                e = u.weight * (local_energy(u, x, v) + et)
                if e < best[0]:
                    best = (e, x, v)
        memo[key] = best
        return best

    best_obj, best_assign = math.inf, None
    K = s.n_users
    for assign in itertools.product(range(len(states)), repeat=N):
        rates = [0.0] * K
        nch = [0] * K
        for n, st in enumerate(assign):
            for k, r in contrib[n][st]:
                rates[k] += r
                nch[k] += 1
        worst = 0.0
        for k in range(K):
            e = best_for(k, rates[k], nch[k])[0]
            if e > worst:
                worst = e
                if worst >= best_obj:
                    break
        if worst < best_obj:
            best_obj, best_assign = worst, (assign, list(rates), list(nch))

    if best_assign is None:
        return math.inf, None
    assign, rates, nch = best_assign
    x, mu = [], []
    for k, u in enumerate(s.users):
        _, xk, v = best_for(k, rates[k], nch[k])
        x.append(list(xk))
        mu.append(list(one_hot(v, u.n_levels)))
    rho = [[0] * N for _ in range(K)]
    for n, st in enumerate(assign):
        for k, _ in contrib[n][st]:
            rho[k][n] = 1
    return best_obj, allocate(s, x, mu, rho)


def satisfied_mask(p: BinaryLinearProgram, X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Row-wise ``p.is_satisfied`` for a stack of 0/1 points ``X`` (one per row)."""
    X = np.asarray(X, dtype=float)
    ok = np.ones(X.shape[0], dtype=bool)
    if not p.n_constraints:
        return ok
    rel = np.array([c.relation.value for c in p.constraints])
    rhs = np.array([c.rhs for c in p.constraints], dtype=float)
    scale = np.array([max((abs(v) for v in c.coef), default=1.0) for c in p.constraints], dtype=float)
    lhs = np.asarray(p.matrix() @ X.T).T / scale
    b = rhs / scale
    t = tol * np.maximum(1.0, np.abs(b))
    le, ge, eq = rel == "<=", rel == ">=", rel == "="
    if le.any():
        ok &= np.all(lhs[:, le] <= b[le] + t[le], axis=1)
    if ge.any():
        ok &= np.all(lhs[:, ge] >= b[ge] - t[ge], axis=1)
    if eq.any():
        ok &= np.all(np.abs(lhs[:, eq] - b[eq]) <= t[eq], axis=1)
    return ok


def brute_force_blp(p: BinaryLinearProgram, cap: int = 1 << 22, chunk: int = 1 << 14) -> IlpResult:
    """Scan all ``2**n`` assignments (first variable most significant).

    Ties keep the first assignment in scan order.
    """
    n = p.n_vars
    if 2**n > cap:
        raise SearchTooLarge(f"2^{n} assignments exceed cap {cap}")
    res = IlpResult(Status.INFEASIBLE, names=list(p.names))
    obj = p.objective
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_val, best_x = math.inf, None
    for start in range(0, 2**n, chunk):
        ids = np.arange(start, min(start + chunk, 2**n), dtype=np.int64)
        X = ((ids[:, None] >> shifts[None, :]) & 1).astype(float)
        ok = satisfied_mask(p, X)
        if not ok.any():
            continue
        if p.sense is Sense.FEASIBILITY:
            best_x = X[int(np.flatnonzero(ok)[0])].astype(int)
            break
        vals = X[ok] @ obj
        i = int(np.argmin(vals))
        if best_x is None or vals[i] < best_val - 1e-9 * max(1.0, abs(best_val)):
            best_val, best_x = float(vals[i]), X[ok][i].astype(int)
    res.nodes = 2**n
    if best_x is not None:
        res.status, res.values = Status.OPTIMAL, best_x
        res.objective = p.objective_value(best_x)
    return res

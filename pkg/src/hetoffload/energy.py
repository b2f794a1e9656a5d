"""Closed-form energy, latency and constraint evaluation.

Infeasible quantities (positive local load on a zero clock, offloaded bits
with no rate) evaluate to ``math.inf`` rather than raising, so callers can
compare and filter without special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import MACRO, Allocation, Scenario, User, as_rows
from .radio import rate, sinr

RTOL = 1e-9


def energy_per_cycle(u: User, v: int) -> float:
    f = u.clock_levels[v]
    if f <= 0:
        return 0.0
    return (u.beta1 * f**u.beta2 + u.beta3) / f


def clock_coeffs(u: User) -> tuple[float, ...]:
    """F_v for every clock level (zero for a zero level)."""
    return tuple(energy_per_cycle(u, v) for v in range(u.n_levels))


def local_load(u: User, x: Sequence[int]) -> float:
    return math.fsum(t.cycles for t, xl in zip(u.tasks, x) if xl)


def offloaded_bits(u: User, x: Sequence[int]) -> float:
    return math.fsum(t.bits for t, xl in zip(u.tasks, x) if not xl)


def local_energy(u: User, x: Sequence[int], v: int) -> float:
    load = local_load(u, x)
    if load == 0:
        return 0.0
    if u.clock_levels[v] <= 0:
        return math.inf
    return energy_per_cycle(u, v) * load


def local_delay(u: User, x: Sequence[int], v: int) -> float:
    load = local_load(u, x)
    if load == 0:
        return 0.0
    f = u.clock_levels[v]
    return load / f if f > 0 else math.inf


def satisfies_c4(u: User, x: Sequence[int], v: int, rtol: float = RTOL) -> bool:
    return local_delay(u, x, v) <= u.tau1 * (1 + rtol)


def tx_time(u: User, x: Sequence[int], r: float) -> float:
    bits = offloaded_bits(u, x)
    if bits == 0:
        return 0.0
    return bits / r if r > 0 else math.inf


def tx_energy(u: User, x: Sequence[int], r: float, channels_used: int, power: float, bandwidth: float) -> float:
    t = tx_time(u, x, r)
    if t == 0:
        return 0.0
    if math.isinf(t):
        return math.inf
    return t * power * bandwidth * channels_used


def user_rate(s: Scenario, k: int, rho: Sequence[Sequence[int]]) -> float:
    """Uplink rate of user ``k`` recomputed from the channel assignment."""
    cell = s.users[k].cell
    total = 0.0
    for n in range(s.n_channels):
        if not rho[k][n]:
            continue
        if cell == MACRO:
            g = sinr(s, k, MACRO, n)
        else:
            others = [j for j in s.sues if s.users[j].cell != cell and rho[j][n]]
            g = sinr(s, k, cell, n, others)
        total += rate(g, s.radio.bandwidth)
    return total


@dataclass(frozen=True)
class Evaluation:
    e_comp: tuple[float, ...]
    e_tx: tuple[float, ...]
    rates: tuple[float, ...]
    tx_times: tuple[float, ...]
    c1: tuple[bool, ...]
    c4: tuple[bool, ...]
    c7: tuple[bool, ...]
    c8: tuple[bool, ...]
    weighted: tuple[float, ...]
    c2: bool
    binary: bool
    objective: float

    @property
    def feasible(self) -> bool:
        """C1-C7 all hold (C8 is checked separately against a level)."""
        return self.binary and self.c2 and all(self.c1) and all(self.c4) and all(self.c7)

    @property
    def feasible_at_level(self) -> bool:
        return self.feasible and all(self.c8)


def _c2_holds(s: Scenario, rho: Sequence[Sequence[int]]) -> bool:
    mues = s.mues
    for n in range(s.n_channels):
        macro = sum(rho[k][n] for k in mues)
        if macro > 1:
            return False
        for m in range(1, s.topology.n_sc + 1):
            if macro + sum(rho[k][n] for k in s.cell_users(m)) > 1:
                return False
    return True


def evaluate(s: Scenario, x, mu, rho, zeta: float | None = None, rtol: float = RTOL) -> Evaluation:
    """Exact energies and constraint truth values of a candidate decision."""
    K, N = s.n_users, s.n_channels
    if len(x) != K or len(mu) != K or len(rho) != K:
        raise ValueError("allocation shape does not match scenario")
    for k, u in enumerate(s.users):
        if len(x[k]) != u.n_tasks or len(mu[k]) != u.n_levels or len(rho[k]) != N:
            raise ValueError(f"allocation shape mismatch for user {k}")

    binary = all(v in (0, 1) for rows in (x, mu, rho) for r in rows for v in r)
    e_comp, e_tx, rates, times, c1, c4, c7, c8, weighted = [], [], [], [], [], [], [], [], []
    for k, u in enumerate(s.users):
        one_hot = sum(mu[k]) == 1
        c7.append(one_hot)
        if one_hot:
            v = list(mu[k]).index(1)
            ec = local_energy(u, x[k], v)
            c4.append(satisfies_c4(u, x[k], v, rtol))
        else:
            ec = math.inf
            c4.append(False)
        r = user_rate(s, k, rho)
        t = tx_time(u, x[k], r)
        et = tx_energy(u, x[k], r, sum(rho[k]), s.radio.total_power(u.cell), s.radio.bandwidth)
        c1.append(t <= u.tau2 * (1 + rtol))
        e_comp.append(ec)
        e_tx.append(et)
        rates.append(r)
        times.append(t)
        wk = u.weight * (ec + et)
        weighted.append(wk)
        c8.append(True if zeta is None else wk <= zeta * (1 + rtol) + 1e-15)
    obj = max(weighted) if weighted else 0.0
    return Evaluation(
        e_comp=tuple(e_comp),
        e_tx=tuple(e_tx),
        rates=tuple(rates),
        tx_times=tuple(times),
        c1=tuple(c1),
        c4=tuple(c4),
        c7=tuple(c7),
        c8=tuple(c8),
        weighted=tuple(weighted),
        c2=_c2_holds(s, rho),
        binary=binary,
        objective=obj,
    )


def allocate(s: Scenario, x, mu, rho) -> Allocation:
    """Build an :class:`Allocation` with exact energies filled in."""
    ev = evaluate(s, x, mu, rho)
    return Allocation(
        x=as_rows(x),
        mu=as_rows(mu),
        rho=as_rows(rho),
        e_comp=ev.e_comp,
        e_tx=ev.e_tx,
        objective=ev.objective,
        feasible=ev.feasible,
    )


def check(a: Allocation, s: Scenario, zeta: float | None = None) -> bool:
    """True when ``a`` satisfies C1-C7 (and C8 at ``zeta`` if given) and its stored energies are exact."""
    ev = evaluate(s, a.x, a.mu, a.rho, zeta)
    if not (ev.feasible and all(ev.c8)):
        return False
    if a.e_comp and not all(math.isclose(p, q, rel_tol=1e-12, abs_tol=0) for p, q in zip(a.e_comp, ev.e_comp)):
        return False
    if a.e_tx and not all(math.isclose(p, q, rel_tol=1e-12, abs_tol=0) for p, q in zip(a.e_tx, ev.e_tx)):
        return False
    return True


def best_local_clock(u: User, x: Sequence[int]) -> int | None:
    """Clock index minimising local energy under C4; lower frequency wins ties."""
    best, best_e = None, math.inf
    for v in range(u.n_levels):
        if not satisfies_c4(u, x, v):
            continue
        e = local_energy(u, x, v)
        if e < best_e:
            best, best_e = v, e
    return best

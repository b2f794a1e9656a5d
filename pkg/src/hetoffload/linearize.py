"""Compile the offloading constraints into 0/1 linear programs.

Three builders share one set of row generators:

* :func:`build_ps1` - per-user minimum offloaded bits under a compute-energy cap.
* :func:`build_p2_feasibility` - joint feasibility at a fixed level ``zeta``.
* :func:`build_ps2` - macro-tier minimum channel count at ``zeta``.

Nonlinear pieces are removed as follows. The rate of a user is a constant
(from the :class:`~hetoffload.radio.RateTable`) times a channel indicator:
``rho[k,n]`` for a MUE, a combo indicator ``alpha[n,c]`` for a SUE. The
weighted-energy cap is multiplied through by the rate, which leaves products
of binaries; each product gets its own variable with the standard three-row
(or four-row) envelope.

Product variables are only created where they can be nonzero and carry a
nonzero coefficient: a (clock, task) pair whose cycles cannot finish within
``tau1`` at that clock is excluded by the linear C4 row already, and a zero
clock has zero energy per cycle.

Variable counts (``V`` levels, ``R`` residual tasks, ``P`` admissible
(clock, task) pairs, ``Rb`` residual tasks with positive bits, ``J`` channel
indicators of the user)::

    ps1:  |L| + V + P
    p2:   sum_mue |N| + sum_sue |N| + |N| * |C|
          + sum_user (R + V + J*P + J*Rb + [no fixed bits] * P)

with ``J = |N|`` for a MUE and ``J = |N| * prod_{m' != m}(|K_m'| + 1)`` for a SUE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .energy import clock_coeffs
from .ilp import BinaryLinearProgram, Relation, Sense
from .model import MACRO, Scenario, User
from .radio import DEFAULT_COMBO_CAP, IDLE, InstanceTooLarge, RateTable, enumerate_combos

C4_RTOL = 1e-9


@dataclass(frozen=True)
class ProductVar:
    name: str
    index: int
    factors: tuple[int, ...]


def linearize_product(p: BinaryLinearProgram, factors: Sequence[int], name: str) -> ProductVar:
    """Add ``y = prod(factors)`` as a new binary with its linear envelope."""
    if not 2 <= len(factors) <= 3:
        raise ValueError("products of 2 or 3 binaries only")
    y = p.add_var(name)
    terms = {y: 1.0}
    for s in factors:
        terms[s] = terms.get(s, 0.0) - 1.0
    p.add_constraint(terms, Relation.GE, 1 - len(factors))
    for s in factors:
        p.add_constraint({y: 1.0, s: -1.0}, Relation.LE, 0.0)
    return ProductVar(name, y, tuple(factors))


class Mode(str, enum.Enum):
    FREE = "free"
    LOCAL = "local"
    OFFLOAD = "offload"


@dataclass(frozen=True)
class UserFixing:
    """How a user enters the joint program.

    LOCAL users are left out (all tasks on the device, no rate). OFFLOAD users
    have ``offloaded`` tasks pinned to the cloud and the rest free. FREE users
    have every task free.
    """

    mode: Mode = Mode.FREE
    offloaded: frozenset[int] = frozenset()

    @classmethod
    def local(cls) -> "UserFixing":
        return cls(Mode.LOCAL)

    @classmethod
    def offload(cls, tasks: Iterable[int]) -> "UserFixing":
        return cls(Mode.OFFLOAD, frozenset(tasks))


FREE = UserFixing()


def admissible_pairs(u: User, tasks: Iterable[int]) -> list[tuple[int, int]]:
    """(clock, task) pairs that can carry nonzero compute energy under C4."""
    out = []
    for v, f in enumerate(u.clock_levels):
        if f <= 0:
            continue
        for l in tasks:
            if u.tasks[l].cycles <= u.tau1 * f * (1 + C4_RTOL):
                out.append((v, l))
    return out


def _add_clock_rows(p: BinaryLinearProgram, u: User, xs: Mapping[int, int], mus: list[int], tag: str) -> None:
    p.add_constraint({m: 1.0 for m in mus}, Relation.EQ, 1.0, f"c7_{tag}")
    terms: dict[int, float] = {xs[l]: u.tasks[l].cycles for l in xs}
    for v, m in enumerate(mus):
        terms[m] = terms.get(m, 0.0) - u.tau1 * u.clock_levels[v]
    p.add_constraint(terms, Relation.LE, 0.0, f"c4_{tag}")
    for v, m in enumerate(mus):
        if u.clock_levels[v] <= 0:
            for l, x in xs.items():
                p.add_constraint({x: 1.0, m: 1.0}, Relation.LE, 1.0, f"zero_{tag}_{v}_{l}")


def _add_compute_cap(p: BinaryLinearProgram, u: User, xs, mus, cap: float, tag: str) -> list[ProductVar]:
    """sum_{v,l} F_v c_l z_{v,l} <= cap with z = mu_v x_l."""
    F = clock_coeffs(u)
    zs = []
    terms = {}
    for v, l in admissible_pairs(u, xs):
        z = linearize_product(p, (mus[v], xs[l]), f"z_{tag}_{v}_{l}")
        zs.append(z)
        terms[z.index] = F[v] * u.tasks[l].cycles
    p.add_constraint(terms, Relation.LE, cap, f"c9_{tag}")
    return zs


def build_ps1(u: User, zeta: float, w: float | None = None, tag: str = "u") -> BinaryLinearProgram:
    """Minimum offloaded bits subject to ``w * E_c <= zeta`` and C4/C7.

    Always feasible: every task offloaded with any nonzero clock meets both rows.
    """
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    w = u.weight if w is None else w
    p = BinaryLinearProgram(Sense.MINIMIZE, name=f"ps1_{tag}")
    xs = {l: p.add_var(f"x_{tag}_{l}", -t.bits) for l, t in enumerate(u.tasks)}
    p.offset = math.fsum(t.bits for t in u.tasks)
    mus = [p.add_var(f"mu_{tag}_{v}") for v in range(u.n_levels)]
    _add_clock_rows(p, u, xs, mus, tag)
    _add_compute_cap(p, u, xs, mus, zeta / w, tag)
    return p


@dataclass
class CompiledProgram:
    """A built program plus the index maps needed to read a solution back."""

    blp: BinaryLinearProgram
    zeta: float
    channels: tuple[int, ...]
    users: tuple[int, ...]
    fixed: dict[int, UserFixing]
    x_vars: dict[int, dict[int, int]] = field(default_factory=dict)
    mu_vars: dict[int, list[int]] = field(default_factory=dict)
    rho_vars: dict[tuple[int, int], int] = field(default_factory=dict)
    alpha_vars: dict[tuple[int, int], int] = field(default_factory=dict)
    products: list[ProductVar] = field(default_factory=list)
    combos: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def offloading_users(self) -> list[int]:
        return [k for k in self.users if self.fixed[k].mode is not Mode.LOCAL]

    def decode(self, s: Scenario, values) -> dict[int, tuple[list[int], list[int], list[int]]]:
        """Per offloading user: full ``x``, one-hot ``mu`` and channel row ``rho``."""
        vals = np.asarray(values)
        out = {}
        for k in self.offloading_users:
            u = s.users[k]
            x = [0 if l in self.fixed[k].offloaded else 1 for l in range(u.n_tasks)]
            for l, i in self.x_vars[k].items():
                x[l] = int(vals[i])
            mu = [int(vals[i]) for i in self.mu_vars[k]]
            rho = [0] * s.n_channels
            for n in self.channels:
                i = self.rho_vars.get((k, n))
                if i is not None:
                    rho[n] = int(vals[i])
            out[k] = (x, mu, rho)
        return out

    def encode(self, s: Scenario, x, mu, rho) -> np.ndarray:
        """Full variable vector for an original decision (products set to their factors' product).

        The decision must leave LOCAL/excluded users out and keep every
        offloaded-pinned task at zero; otherwise the encoding is meaningless.
        """
        vals = np.zeros(self.blp.n_vars, dtype=int)
        for k in self.offloading_users:
            for l, i in self.x_vars[k].items():
                vals[i] = x[k][l]
            for v, i in enumerate(self.mu_vars[k]):
                vals[i] = mu[k][v]
            for n in self.channels:
                i = self.rho_vars.get((k, n))
                if i is not None:
                    vals[i] = rho[k][n]
        for (n, c), i in self.alpha_vars.items():
            occ = self.combos[c]
            on = all((rho[j][n] == 1) if j != IDLE else True for j in occ)
            cells = [m for m, j in enumerate(occ, start=1) if j == IDLE]
            # idle cells must carry no offloading SUE on n
            idle_ok = all(
                not rho[j][n] for j in self.offloading_users if s.users[j].cell in cells
            )
            vals[i] = int(on and idle_ok)
        for pv in self.products:
            vals[pv.index] = int(all(vals[f] for f in pv.factors))
        return vals


def _channel_terms(s: Scenario, rt: RateTable, cp: CompiledProgram, k: int) -> list[tuple[int, float]]:
    u = s.users[k]
    if u.cell == MACRO:
        return [(cp.rho_vars[(k, n)], float(rt.mue_rate[k, n])) for n in cp.channels]
    pos = u.cell - 1
    out = []
    for n in cp.channels:
        for c, occ in enumerate(cp.combos):
            if occ[pos] == k:
                out.append((cp.alpha_vars[(n, c)], float(rt.sue_rate[n, rt.combo_id(occ), pos])))
    return out


def _build_joint(
    s: Scenario,
    rt: RateTable,
    zeta: float,
    users: Sequence[int] | None,
    fixed: Mapping[int, UserFixing] | None,
    channels: Sequence[int] | None,
    sense: Sense,
    name: str,
    cap: int,
) -> CompiledProgram:
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    users = tuple(range(s.n_users)) if users is None else tuple(users)
    channels = tuple(range(s.n_channels)) if channels is None else tuple(channels)
    fixed = {k: (fixed or {}).get(k, FREE) for k in users}
    p = BinaryLinearProgram(sense, name=name)
    cp = CompiledProgram(p, zeta, channels, users, fixed)
    off = cp.offloading_users
    off_mue = [k for k in off if s.users[k].cell == MACRO]
    off_sue = [k for k in off if s.users[k].cell != MACRO]

    cp.combos = enumerate_combos(s, off_sue) if off_sue else []
    if len(cp.combos) * len(channels) > cap:
        raise InstanceTooLarge(f"{len(cp.combos)} combos x {len(channels)} channels exceeds cap {cap}")

    # channel structure
    for n in channels:
        for k in off_mue:
            cp.rho_vars[(k, n)] = p.add_var(f"rho_{k}_{n}", 1.0 if sense is Sense.MINIMIZE else 0.0)
        for c, occ in enumerate(cp.combos):
            cp.alpha_vars[(n, c)] = p.add_var("a_" + str(n) + "_" + "_".join("i" if j == IDLE else str(j) for j in occ))
        for k in off_sue:
            cp.rho_vars[(k, n)] = p.add_var(f"rho_{k}_{n}")
    for n in channels:
        excl = {cp.alpha_vars[(n, c)]: 1.0 for c in range(len(cp.combos))}
        excl.update({cp.rho_vars[(k, n)]: 1.0 for k in off_mue})
        if excl:
            p.add_constraint(excl, Relation.LE, 1.0, f"excl_{n}")
        for k in off_sue:
            pos = s.users[k].cell - 1
            link = {cp.rho_vars[(k, n)]: 1.0}
            for c, occ in enumerate(cp.combos):
                if occ[pos] == k:
                    link[cp.alpha_vars[(n, c)]] = -1.0
            p.add_constraint(link, Relation.EQ, 0.0, f"link_{k}_{n}")

    radio = s.radio
    for k in off:
        u = s.users[k]
        fx = fixed[k]
        tag = str(k)
        resid = [l for l in range(u.n_tasks) if l not in fx.offloaded]
        xs = {l: p.add_var(f"x_{k}_{l}") for l in resid}
        mus = [p.add_var(f"mu_{k}_{v}") for v in range(u.n_levels)]
        cp.x_vars[k] = xs
        cp.mu_vars[k] = mus
        _add_clock_rows(p, u, xs, mus, tag)

        fixed_bits = math.fsum(u.tasks[l].bits for l in fx.offloaded)
        all_bits = fixed_bits + math.fsum(u.tasks[l].bits for l in resid)
        chans = _channel_terms(s, rt, cp, k)

        # C1: offloaded bits <= tau2 * rate
        c1 = {xs[l]: -u.tasks[l].bits for l in resid}
        for i, r in chans:
            c1[i] = c1.get(i, 0.0) - u.tau2 * r
        p.add_constraint(c1, Relation.LE, -all_bits, f"c1_{tag}")

        # C8 multiplied through by the rate
        pw = radio.total_power(u.cell) * radio.bandwidth
        level = zeta / u.weight
        F = clock_coeffs(u)
        pairs = admissible_pairs(u, resid)
        c8: dict[int, float] = {}
        for i, r in chans:
            c8[i] = c8.get(i, 0.0) + pw * all_bits - level * r
            for v, l in pairs:
                q = linearize_product(p, (mus[v], xs[l], i), f"q_{k}_{p.names[i]}_{v}_{l}")
                cp.products.append(q)
                c8[q.index] = r * F[v] * u.tasks[l].cycles
            for l in resid:
                if u.tasks[l].bits > 0:
                    uv = linearize_product(p, (xs[l], i), f"u_{k}_{p.names[i]}_{l}")
                    cp.products.append(uv)
                    c8[uv.index] = -pw * u.tasks[l].bits
        p.add_constraint(c8, Relation.LE, 0.0, f"c8_{tag}")

        # without pinned bits the user may end up with no rate; cap compute energy directly
        if fixed_bits == 0:
            cp.products.extend(_add_compute_cap(p, u, xs, mus, level, tag))
    return cp


def build_p2_feasibility(
    s: Scenario,
    rt: RateTable,
    zeta: float,
    fixed: Mapping[int, UserFixing] | None = None,
    channels: Sequence[int] | None = None,
    users: Sequence[int] | None = None,
    cap: int = DEFAULT_COMBO_CAP,
) -> CompiledProgram:
    """Joint feasibility of C1-C8 at level ``zeta``.

    ``fixed`` maps users to :class:`UserFixing` (default FREE); ``channels``
    restricts the usable subchannels; ``users`` restricts the participants.
    """
    return _build_joint(s, rt, zeta, users, fixed, channels, Sense.FEASIBILITY, "p2", cap)


def build_ps2(
    s: Scenario,
    rt: RateTable,
    zeta: float,
    fixed: Mapping[int, UserFixing] | None = None,
    channels: Sequence[int] | None = None,
    cap: int = DEFAULT_COMBO_CAP,
) -> CompiledProgram:
    """Macro-tier program: fewest MUE subchannels meeting C1, C4, C7, C8 at ``zeta``."""
    return _build_joint(s, rt, zeta, s.mues, fixed, channels, Sense.MINIMIZE, "ps2", cap)

"""Domain types for a two-tier HetNet offloading instance and its solutions.

Cell 0 is the macro cell; cells 1..M are small cells. Users are stored in a
flat list and each carries its cell index, so ``K_m`` is recovered with
:meth:`Scenario.cell_users`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

MACRO = 0


@dataclass(frozen=True)
class Topology:
    macro_radius: float
    sc_radius: float
    sc_centers: tuple[tuple[float, float], ...] = ()

    @property
    def n_sc(self) -> int:
        return len(self.sc_centers)

    @property
    def cells(self) -> range:
        return range(self.n_sc + 1)

    def bs_position(self, m: int) -> tuple[float, float]:
        if m == MACRO:
            return (0.0, 0.0)
        return self.sc_centers[m - 1]


@dataclass(frozen=True)
class Task:
    cycles: float
    bits: float


@dataclass(frozen=True)
class User:
    cell: int
    position: tuple[float, float]
    tasks: tuple[Task, ...]
    clock_levels: tuple[float, ...]
    beta1: float
    beta2: float
    beta3: float
    weight: float
    tau1: float
    tau2: float

    @property
    def n_levels(self) -> int:
        return len(self.clock_levels)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)


def total_cycles(u: User) -> float:
    """CPU cycles needed to run every task of ``u`` locally."""
    return math.fsum(t.cycles for t in u.tasks)


@dataclass(frozen=True, eq=False)
class RadioConfig:
    """Radio parameters. Power figures are spectral densities in W/Hz.

    ``gains[k, m, n]`` is the linear power gain from user ``k`` to BS ``m`` on
    subchannel ``n``.
    """

    n_channels: int
    bandwidth: float
    noise_density: float
    pt_macro: float
    pt_sc: float
    gains: np.ndarray
    circuit_fraction: float = 0.5

    def __post_init__(self):
        g = np.array(self.gains, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    def tx_power(self, cell: int) -> float:
        return self.pt_macro if cell == MACRO else self.pt_sc

    def total_power(self, cell: int) -> float:
        """P = P_t + P_c with the circuit part a fixed fraction of P_t."""
        pt = self.tx_power(cell)
        return pt + self.circuit_fraction * pt

    def __eq__(self, other):
        if not isinstance(other, RadioConfig):
            return NotImplemented
        return (
            self.n_channels == other.n_channels
            and self.bandwidth == other.bandwidth
            and self.noise_density == other.noise_density
            and self.pt_macro == other.pt_macro
            and self.pt_sc == other.pt_sc
            and self.circuit_fraction == other.circuit_fraction
            and self.gains.shape == other.gains.shape
            and bool(np.array_equal(self.gains, other.gains))
        )


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    users: tuple[User, ...]
    radio: RadioConfig
    T: float
    seed: int | None = None

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_channels(self) -> int:
        return self.radio.n_channels

    def cell_users(self, m: int) -> list[int]:
        return [k for k, u in enumerate(self.users) if u.cell == m]

    @property
    def mues(self) -> list[int]:
        return self.cell_users(MACRO)

    @property
    def sues(self) -> list[int]:
        return [k for k, u in enumerate(self.users) if u.cell != MACRO]

    def to_dict(self) -> dict[str, Any]:
        topo = self.topology
        return {
            "topology": {
                "macro_radius": topo.macro_radius,
                "sc_radius": topo.sc_radius,
                "sc_centers": [list(c) for c in topo.sc_centers],
            },
            "users": [
                {
                    "cell": u.cell,
                    "position": list(u.position),
                    "tasks": [{"cycles": t.cycles, "bits": t.bits} for t in u.tasks],
                    "clock_levels": list(u.clock_levels),
                    "beta1": u.beta1,
                    "beta2": u.beta2,
                    "beta3": u.beta3,
                    "weight": u.weight,
                    "tau1": u.tau1,
                    "tau2": u.tau2,
                }
                for u in self.users
            ],
            "radio": {
                "n_channels": self.radio.n_channels,
                "bandwidth": self.radio.bandwidth,
                "noise_density": self.radio.noise_density,
                "pt_macro": self.radio.pt_macro,
                "pt_sc": self.radio.pt_sc,
                "circuit_fraction": self.radio.circuit_fraction,
                "gains": self.radio.gains.tolist(),
            },
            "T": self.T,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Scenario":
        t = d["topology"]
        topo = Topology(
            macro_radius=float(t["macro_radius"]),
            sc_radius=float(t["sc_radius"]),
            sc_centers=tuple(tuple(map(float, c)) for c in t["sc_centers"]),
        )
        users = tuple(
            User(
                cell=int(u["cell"]),
                position=tuple(map(float, u["position"])),
                tasks=tuple(Task(float(x["cycles"]), float(x["bits"])) for x in u["tasks"]),
                clock_levels=tuple(map(float, u["clock_levels"])),
                beta1=float(u["beta1"]),
                beta2=float(u["beta2"]),
                beta3=float(u["beta3"]),
                weight=float(u["weight"]),
                tau1=float(u["tau1"]),
                tau2=float(u["tau2"]),
            )
            for u in d["users"]
        )
        r = d["radio"]
        n = int(r["n_channels"])
        gains = np.array(r["gains"], dtype=float).reshape(len(users), topo.n_sc + 1, n)
        radio = RadioConfig(
            n_channels=n,
            bandwidth=float(r["bandwidth"]),
            noise_density=float(r["noise_density"]),
            pt_macro=float(r["pt_macro"]),
            pt_sc=float(r["pt_sc"]),
            gains=gains,
            circuit_fraction=float(r.get("circuit_fraction", 0.5)),
        )
        seed = d.get("seed")
        return cls(topo, users, radio, float(d["T"]), None if seed is None else int(seed))


@dataclass(frozen=True)
class Allocation:
    """A complete decision: placement ``x``, clock one-hot ``mu``, channels ``rho``.

    ``x[k][l] = 1`` keeps task ``l`` of user ``k`` on the device. ``rho`` is a
    users x channels 0/1 matrix. Energies are filled by
    :func:`hetoffload.energy.allocate`.
    """

    x: tuple[tuple[int, ...], ...]
    mu: tuple[tuple[int, ...], ...]
    rho: tuple[tuple[int, ...], ...]
    e_comp: tuple[float, ...] = ()
    e_tx: tuple[float, ...] = ()
    objective: float = math.nan
    feasible: bool = False

    def clock_index(self, k: int) -> int:
        return self.mu[k].index(1)

    def channels_of(self, k: int) -> list[int]:
        return [n for n, r in enumerate(self.rho[k]) if r]

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": [list(r) for r in self.x],
            "mu": [list(r) for r in self.mu],
            "rho": [list(r) for r in self.rho],
            "e_comp": list(self.e_comp),
            "e_tx": list(self.e_tx),
            "objective": self.objective,
            "feasible": self.feasible,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Allocation":
        return cls(
            x=tuple(tuple(int(v) for v in r) for r in d["x"]),
            mu=tuple(tuple(int(v) for v in r) for r in d["mu"]),
            rho=tuple(tuple(int(v) for v in r) for r in d["rho"]),
            e_comp=tuple(float(v) for v in d.get("e_comp", ())),
            e_tx=tuple(float(v) for v in d.get("e_tx", ())),
            objective=float(d.get("objective", math.nan)),
            feasible=bool(d.get("feasible", False)),
        )


def one_hot(index: int, size: int) -> tuple[int, ...]:
    return tuple(1 if v == index else 0 for v in range(size))


def as_rows(a: Sequence[Sequence[Any]] | np.ndarray) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in r) for r in a)


def validate_scenario(s: Scenario) -> list[str]:
    """Return human-readable invariant violations; empty when ``s`` is well formed."""
    out: list[str] = []
    topo = s.topology
    if topo.macro_radius <= 0 or topo.sc_radius <= 0:
        out.append("topology: radii must be positive")
    for m, (cx, cy) in enumerate(topo.sc_centers, start=1):
        if math.hypot(cx, cy) > topo.macro_radius:
            out.append(f"topology: small cell {m} center outside macro disk")

    r = s.radio
    if r.n_channels < 0:
        out.append("radio: negative channel count")
    if r.bandwidth <= 0:
        out.append("radio: bandwidth must be positive")
    if r.noise_density <= 0:
        out.append("radio: noise density must be positive")
    if r.pt_macro <= 0 or r.pt_sc <= 0:
        out.append("radio: transmit power must be positive")
    expected = (s.n_users, topo.n_sc + 1, r.n_channels)
    if r.gains.shape != expected:
        out.append(f"radio: gains shape {r.gains.shape} != {expected}")
    elif r.gains.size and not np.all(r.gains > 0):
        out.append("radio: all gains must be positive")

    if not s.T > 0:
        out.append("scenario: period T must be positive")

    for k, u in enumerate(s.users):
        if not 0 <= u.cell <= topo.n_sc:
            out.append(f"user {k}: invalid cell index {u.cell}")
        for l, t in enumerate(u.tasks):
            if not t.cycles > 0:
                out.append(f"user {k}: task {l} cycles must be positive")
            if t.bits < 0:
                out.append(f"user {k}: task {l} bits must be nonnegative")
        levels = u.clock_levels
        if any(f < 0 for f in levels):
            out.append(f"user {k}: negative clock level")
        if list(levels) != sorted(levels):
            out.append(f"user {k}: clock levels must be ascending")
        load = total_cycles(u)
        if not any(f > 0 and load / f <= u.tau1 for f in levels):
            out.append(f"user {k}: no feasible clock level")
        if not u.weight > 0:
            out.append(f"user {k}: weight must be positive")
        if not u.tau2 > 0:
            out.append(f"user {k}: tau2 must be positive")
        elif not u.tau2 < s.T:
            out.append(f"user {k}: tau2 must be below T")
        if not 0 < u.tau1 <= s.T:
            out.append(f"user {k}: tau1 must lie in (0, T]")
    return out

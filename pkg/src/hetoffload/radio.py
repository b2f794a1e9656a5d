"""Per-channel SINR and the precomputed rate coefficients.

Small-cell co-channel occupancy is enumerated as *combos*: one occupant per
small cell, each either a SUE of that cell or :data:`IDLE`. The all-idle tuple
is left out, so an unused channel is simply every combo variable at zero.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import MACRO, Scenario

IDLE = -1
DEFAULT_COMBO_CAP = 1_000_000


class InstanceTooLarge(ValueError):
    """The combo enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class ComboIndex:
    channel: int
    occupants: tuple[int, ...]

    def __post_init__(self):
        if all(k == IDLE for k in self.occupants):
            raise ValueError("all-idle combo is not a valid index")


def sinr(s: Scenario, k: int, m: int, n: int, cochannel: Iterable[int] = ()) -> float:
    """SINR of user ``k`` at its serving BS ``m`` on channel ``n``.

    ``cochannel`` lists the SUEs of *other* small cells transmitting on ``n``.
    """
    u = s.users[k]
    if u.cell != m:
        raise ValueError(f"user {k} is not associated with BS {m}")
    inter = list(cochannel)
    r = s.radio
    if m == MACRO:
        if inter:
            raise ValueError("macro band carries no co-channel interference")
        return r.pt_macro * float(r.gains[k, MACRO, n]) / r.noise_density
    total = 0.0
    for j in inter:
        cell = s.users[j].cell
        if cell == MACRO or cell == m:
            raise ValueError(f"user {j} cannot interfere with cell {m}")
        total += r.pt_sc * float(r.gains[j, m, n])
    return r.pt_sc * float(r.gains[k, m, n]) / (total + r.noise_density)


def rate(gamma: float, bandwidth: float) -> float:
    """Shannon rate in bit/s."""
    if gamma < 0:
        raise ValueError("negative SINR")
    return bandwidth * math.log2(1.0 + gamma)


def enumerate_combos(s: Scenario, users: Sequence[int] | None = None) -> list[tuple[int, ...]]:
    """Occupant tuples over small cells 1..M, all-idle excluded.

    ``users`` restricts the candidate SUEs (others are treated as silent).
    Order is ``itertools.product`` order with IDLE first in every cell.
    """
    allowed = None if users is None else set(users)
    pools = []
    for m in range(1, s.topology.n_sc + 1):
        members = [k for k in s.cell_users(m) if allowed is None or k in allowed]
        pools.append([IDLE] + members)
    if not pools:
        return []
    return [c for c in itertools.product(*pools) if any(k != IDLE for k in c)]


def combo_count(s: Scenario) -> int:
    if s.topology.n_sc == 0:
        return 0
    return math.prod(len(s.cell_users(m)) + 1 for m in range(1, s.topology.n_sc + 1)) - 1


@dataclass(frozen=True, eq=False)
class RateTable:
    """``mue_rate[k, n]`` for MUEs (zero rows for SUEs) and ``sue_rate[n, c, m-1]``.

    ``combos[c]`` gives the occupants of combo ``c``; ``sue_rate`` holds the
    rate of small cell ``m``'s occupant under exactly that co-channel set.
    """

    mue_rate: np.ndarray
    combos: tuple[tuple[int, ...], ...]
    sue_rate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.combos)})

    def combo_id(self, occupants: tuple[int, ...]) -> int:
        return self._index[tuple(occupants)]

    def rate_of(self, n: int, occupants: tuple[int, ...], m: int) -> float:
        return float(self.sue_rate[n, self.combo_id(occupants), m - 1])

    @property
    def n_entries(self) -> int:
        return int(self.sue_rate.shape[0] * self.sue_rate.shape[1])


def build_rate_table(s: Scenario, cap: int = DEFAULT_COMBO_CAP) -> RateTable:
    n_ch = s.n_channels
    n_sc = s.topology.n_sc
    if combo_count(s) * n_ch > cap:
        raise InstanceTooLarge(f"{combo_count(s)} combos x {n_ch} channels exceeds cap {cap}")
    w = s.radio.bandwidth

    mue = np.zeros((s.n_users, n_ch))
    for k in s.mues:
        for n in range(n_ch):
            mue[k, n] = rate(sinr(s, k, MACRO, n), w)

    combos = enumerate_combos(s)
    table = np.zeros((n_ch, len(combos), n_sc))
    for c, occ in enumerate(combos):
        for pos, k in enumerate(occ):
            if k == IDLE:
                continue
            others = [j for j in occ if j != IDLE and j != k]
            for n in range(n_ch):
                table[n, c, pos] = rate(sinr(s, k, pos + 1, n, others), w)
    mue.setflags(write=False)
    table.setflags(write=False)
    return RateTable(mue, tuple(combos), table)


def dump_rates(rt: RateTable, path) -> None:
    n_ch = rt.sue_rate.shape[0] if rt.sue_rate.size else rt.mue_rate.shape[1]
    n_sc = rt.sue_rate.shape[2] if rt.sue_rate.ndim == 3 else 0
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["channel", "kind", "occupants"] + [f"rate_cell{m}" for m in range(n_sc + 1)])
        for n in range(n_ch):
            for k in np.flatnonzero(rt.mue_rate[:, n]):
                wr.writerow([n, "mue", str(k), repr(float(rt.mue_rate[k, n]))] + [""] * n_sc)
            for c, occ in enumerate(rt.combos):
                names = ";".join("-" if k == IDLE else str(k) for k in occ)
                wr.writerow([n, "combo", names, ""] + [repr(float(v)) for v in rt.sue_rate[n, c]])

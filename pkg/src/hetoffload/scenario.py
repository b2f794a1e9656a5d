"""Random HetNet instances and their on-disk form.

Every random quantity comes from its own PCG64 stream keyed off the seed, so
changing the channel count leaves positions, tasks and the fading of the
existing channels untouched. Only ``Generator.random`` (53-bit uniforms) is
used and all distributions are derived from it, which keeps instances
identical across platforms and numpy releases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .model import MACRO, RadioConfig, Scenario, Task, Topology, User

# stream keys
_TOPOLOGY, _POSITIONS, _USERS, _FADING = 0, 1, 2, 3


@dataclass(frozen=True)
class GeneratorParams:
    n_sc: int = 3
    mues: int = 12
    sues_per_sc: int = 2
    n_channels: int = 20
    bandwidth: float = 180e3
    noise_dbm_hz: float = -140.0
    pt_macro_dbm_hz: float = -33.0
    pt_sc_dbm_hz: float = -43.0
    circuit_fraction: float = 0.5
    macro_radius: float = 400.0
    sc_radius: float = 30.0
    min_distance: float = 10.0
    tasks_per_user: int = 3
    total_cycles: float = 0.2e9
    random_split: bool = False
    clock_levels: int = 11
    clock_max: float = 2e9
    bpc_lo: float = 1e-5
    bpc_hi: float = 1e-3
    bpc_multiplier: float = 1.0
    bpc_fixed: float | None = None
    weight_lo: float = 0.8
    weight_hi: float = 1.0
    T: float = 0.1
    tau1_fraction: float = 1.0
    tau2_lo: float = 0.7
    tau2_hi: float = 0.9
    beta2: float = 3.0
    beta1: float | None = None
    beta3: float = 0.35

    @property
    def beta1_value(self) -> float:
        # 0.34 W at 1 GHz expressed per Hz^beta2
        if self.beta1 is not None:
            return self.beta1
        return 0.34 * (1e-9) ** self.beta2

    def with_(self, **kw) -> "GeneratorParams":
        return replace(self, **kw)


def dbm_hz_to_w_hz(x: float) -> float:
    return 10.0 ** (x / 10.0) * 1e-3


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def pathloss_macro(d_km):
    """3GPP macro pathloss in dB at distance ``d_km``."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = -128.1 - 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def pathloss_sc(d_km):
    """3GPP small-cell pathloss in dB at distance ``d_km``."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = -127.0 - 30.0 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    return lo + (hi - lo) * rng.random(size)


def _point_in_disk(rng, cx, cy, radius, min_dist):
    # inverse-CDF on the annulus [min_dist, radius]
    u, v = rng.random(2)
    r0 = min(min_dist, radius)
    r = math.sqrt(r0 * r0 + u * (radius * radius - r0 * r0))
    th = 2.0 * math.pi * v
    return (cx + r * math.cos(th), cy + r * math.sin(th))


def _place_small_cells(rng, p: GeneratorParams) -> list[tuple[float, float]]:
    centers: list[tuple[float, float]] = []
    limit = p.macro_radius - p.sc_radius
    for _ in range(p.n_sc):
        for _attempt in range(10_000):
            c = _point_in_disk(rng, 0.0, 0.0, limit, 0.0)
            if math.hypot(*c) < p.sc_radius + p.min_distance:
                continue
            if all(math.dist(c, o) >= 2 * p.sc_radius for o in centers):
                centers.append(c)
                break
        else:
            raise ValueError("cannot place small cells with the requested separation")
    return centers


def _split_cycles(rng, p: GeneratorParams) -> list[float]:
    n = p.tasks_per_user
    if n == 0:
        return []
    if not p.random_split:
        return [p.total_cycles / n] * n
    # flat Dirichlet through normalised exponentials
    e = -np.log1p(-rng.random(n))
    return list(p.total_cycles * e / e.sum())


def generate(p: GeneratorParams, seed: int = 0) -> Scenario:
    """Draw a scenario. Deterministic in ``(p, seed)``."""
    topo_rng = _stream(seed, _TOPOLOGY)
    centers = _place_small_cells(topo_rng, p)
    topo = Topology(p.macro_radius, p.sc_radius, tuple(centers))

    pos_rng = _stream(seed, _POSITIONS)
    cells: list[int] = [MACRO] * p.mues
    positions = [_point_in_disk(pos_rng, 0.0, 0.0, p.macro_radius, p.min_distance) for _ in range(p.mues)]
    for m, (cx, cy) in enumerate(centers, start=1):
        for _ in range(p.sues_per_sc):
            cells.append(m)
            positions.append(_point_in_disk(pos_rng, cx, cy, p.sc_radius, p.min_distance))

    levels = tuple(float(f) for f in np.linspace(0.0, p.clock_max, p.clock_levels)) if p.clock_levels > 1 else (p.clock_max,)
    beta1 = p.beta1_value
    user_rng = _stream(seed, _USERS)
    users = []
    for cell, pos in zip(cells, positions):
        w = float(_uniform(user_rng, p.weight_lo, p.weight_hi))
        tau2 = float(_uniform(user_rng, p.tau2_lo, p.tau2_hi)) * p.T
        split = _split_cycles(user_rng, p)
        tasks = []
        for c in split:
            bpc = float(_uniform(user_rng, p.bpc_lo, p.bpc_hi))
            if p.bpc_fixed is not None:
                bpc = p.bpc_fixed
            tasks.append(Task(cycles=float(c), bits=float(c * bpc * p.bpc_multiplier)))
        users.append(
            User(
                cell=cell,
                position=pos,
                tasks=tuple(tasks),
                clock_levels=levels,
                beta1=beta1,
                beta2=p.beta2,
                beta3=p.beta3,
                weight=w,
                tau1=p.tau1_fraction * p.T,
                tau2=tau2,
            )
        )

    k = len(users)
    bs = [topo.bs_position(m) for m in topo.cells]
    dist_km = np.array([[max(math.dist(u.position, b), 1e-3) / 1e3 for b in bs] for u in users]).reshape(k, len(bs))
    pl_db = np.empty_like(dist_km)
    if k:
        pl_db[:, 0] = pathloss_macro(dist_km[:, 0])
        if len(bs) > 1:
            pl_db[:, 1:] = pathloss_sc(dist_km[:, 1:])
    pathgain = db_to_linear(pl_db)
    gains = np.empty((k, len(bs), p.n_channels))
    for n in range(p.n_channels):
        u = _stream(seed, _FADING, n).random((k, len(bs)))
        gains[:, :, n] = -np.log1p(-u) * pathgain

    radio = RadioConfig(
        n_channels=p.n_channels,
        bandwidth=p.bandwidth,
        noise_density=dbm_hz_to_w_hz(p.noise_dbm_hz),
        pt_macro=dbm_hz_to_w_hz(p.pt_macro_dbm_hz),
        pt_sc=dbm_hz_to_w_hz(p.pt_sc_dbm_hz),
        gains=gains,
        circuit_fraction=p.circuit_fraction,
    )
    return Scenario(topo, tuple(users), radio, p.T, seed)


def params_fields() -> list[tuple[str, Any, Any]]:
    return [(f.name, f.type, f.default) for f in fields(GeneratorParams)]


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=1)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s) + "\n")


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))

import numpy as np
import pytest

from hetoffload.model import RadioConfig, Scenario, Task, Topology, User
from hetoffload.scenario import GeneratorParams, dbm_hz_to_w_hz, generate

# reference coefficients: beta1 = 0.34 W at 1 GHz, cubic, beta3 = 0.35
BETA1 = 0.34e-27
BETA2 = 3.0
BETA3 = 0.35
LEVELS11 = tuple(float(f) for f in np.linspace(0.0, 2e9, 11))
NOISE = dbm_hz_to_w_hz(-140.0)
PT_MACRO = dbm_hz_to_w_hz(-33.0)
PT_SC = dbm_hz_to_w_hz(-43.0)


def make_user(cell=0, cycles=(0.2e9,), bits=None, levels=LEVELS11, weight=1.0, tau1=0.1, tau2=0.08, position=(50.0, 0.0)):
    bits = [c * 5e-4 for c in cycles] if bits is None else bits
    return User(
        cell=cell,
        position=position,
        tasks=tuple(Task(float(c), float(b)) for c, b in zip(cycles, bits)),
        clock_levels=tuple(levels),
        beta1=BETA1,
        beta2=BETA2,
        beta3=BETA3,
        weight=weight,
        tau1=tau1,
        tau2=tau2,
    )


def make_scenario(users, gains=None, n_channels=1, sc_centers=(), T=0.1, bandwidth=180e3, noise=NOISE, seed=None):
    """Hand-built scenario; ``gains[k, m, n]`` defaults to a uniform 1e-12."""
    k = len(users)
    cells = len(sc_centers) + 1
    if gains is None:
        gains = np.full((k, cells, n_channels), 1e-12)
    gains = np.asarray(gains, dtype=float).reshape(k, cells, n_channels)
    radio = RadioConfig(n_channels, bandwidth, noise, PT_MACRO, PT_SC, gains)
    return Scenario(Topology(400.0, 30.0, tuple(sc_centers)), tuple(users), radio, T, seed)


TINY = GeneratorParams(n_sc=2, mues=2, sues_per_sc=2, n_channels=4, tasks_per_user=2, clock_levels=3)
SMALL = GeneratorParams(n_sc=1, mues=1, sues_per_sc=2, n_channels=2, tasks_per_user=2, clock_levels=3)


def tiny(seed, **kw):
    return generate(TINY.with_(**kw), seed)


def small(seed, **kw):
    return generate(SMALL.with_(**kw), seed)


@pytest.fixture
def small_scenario():
    return small(3)

"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are written past
pytest's capture so they show up in the normal ``-v`` output.
"""

import itertools
import math
import time

import numpy as np
import pytest

from hetoffload import ilp, solver
from hetoffload.energy import evaluate, local_energy, satisfies_c4, tx_energy, tx_time
from hetoffload.model import MACRO
from hetoffload.oracle import brute_force, brute_force_blp
from hetoffload.radio import rate
from hetoffload.scenario import GeneratorParams, generate

from _blp import random_blp
from _exact import check_exactness, tiny_instance
from conftest import LEVELS11, TINY, make_scenario, make_user

EPS = 1e-3
HIGHS = solver.SolverOptions(ilp_backend="highs")
REDUCED = GeneratorParams(n_sc=3, mues=4, sues_per_sc=2, n_channels=12, T=0.1)
FULL = GeneratorParams()
SWEEP = GeneratorParams(n_sc=1, mues=2, sues_per_sc=2, tasks_per_user=2, n_channels=12)


@pytest.fixture
def gate(capsys):
    def report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return report


# criterion 2 and 5 share one instance set
_TINY_CACHE: dict[int, tuple[float, float, float]] = {}


def _tiny_results(seeds=range(30)):
    for seed in seeds:
        if seed not in _TINY_CACHE:
            s = generate(TINY, seed)
            best, _ = brute_force(s)
            opt = solver.solve_optimal(s, EPS)[0].objective
            lc = solver.solve_lc(s, EPS)[0].objective
            _TINY_CACHE[seed] = (best, opt, lc)
    return [_TINY_CACHE[s] for s in seeds]


def test_criterion_1_linearization_exactness(gate):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    n_inst, per_level, points, bad = 24, [], 0, 0
    for _ in range(n_inst):
        s = tiny_instance(rng)
        levels, n, mm = check_exactness(s, n_levels=5)
        per_level.append(len(levels))
        points += n * len(levels)
        bad += mm
    dt = time.perf_counter() - t0
    ok = bad == 0 and min(per_level) >= 5 and dt < 300
    gate(1, ok, f"{n_inst} instances, >= {min(per_level)} levels each, {points} (decision, level) checks, "
                f"{bad} mismatches, {dt:.0f} s")


def test_criterion_2_oracle_equivalence(gate):
    t0 = time.perf_counter()
    res = _tiny_results()
    dt = time.perf_counter() - t0
    gaps = [abs(opt - best) for best, opt, _ in res]
    ok = max(gaps) <= EPS and dt < 600
    gate(2, ok, f"30 tiny seeds, max |optimal - oracle| = {max(gaps):.2e} J (eps {EPS}), {dt:.0f} s")


def test_criterion_3_ilp_engine(gate):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    bad, feas = 0, 0
    for _ in range(200):
        p = random_blp(rng, n=int(rng.integers(1, 15)))
        a, b = ilp.solve(p), brute_force_blp(p)
        same = a.status == b.status and (not b.ok or a.objective == b.objective)
        feas += b.ok
        bad += not same
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 120
    gate(3, ok, f"200 random BLPs (<= 14 vars, {feas} feasible), {bad} status/objective mismatches, {dt:.0f} s")


def _solo_cap(s) -> float:
    """Largest saving any decision can reach: each user alone, every channel, no interference."""
    r = s.radio
    worst = 0.0
    for k, u in enumerate(s.users):
        pt = r.pt_macro if u.cell == MACRO else r.pt_sc
        rates = sorted((rate(pt * r.gains[k, u.cell, n] / r.noise_density, r.bandwidth) for n in range(s.n_channels)), reverse=True)
        cum = np.r_[0.0, np.cumsum(rates)]
        best = math.inf
        for j, rj in enumerate(cum):
            for x in itertools.product((0, 1), repeat=u.n_tasks):
                if tx_time(u, x, rj) > u.tau2 * (1 + 1e-9):
                    continue
                et = tx_energy(u, x, rj, j, r.total_power(u.cell), r.bandwidth)
                for v in range(u.n_levels):
                    if satisfies_c4(u, x, v):
                        best = min(best, u.weight * (local_energy(u, x, v) + et))
        worst = max(worst, best)
    return 1.0 - worst / solver.solve_no_offload(s).objective


def test_criterion_4_energy_saving(gate):
    t0 = time.perf_counter()
    red = []
    for seed in range(15):
        s = generate(REDUCED, seed)
        no = solver.solve_no_offload(s).objective
        opt = solver.solve_optimal(s, EPS, opts=HIGHS)[0].objective
        lc = solver.solve_lc(s, EPS, opts=HIGHS)[0].objective
        red.append((1 - opt / no, 1 - lc / no, _solo_cap(s)))
    full = []
    for seed in range(15):
        s = generate(FULL, seed)
        no = solver.solve_no_offload(s).objective
        lc = solver.solve_lc(s, EPS, opts=HIGHS)[0].objective
        full.append((1 - lc / no, _solo_cap(s)))
    dt = time.perf_counter() - t0
    r_opt, r_lc, r_cap = (np.array(c) for c in zip(*red))
    f_lc, f_cap = (np.array(c) for c in zip(*full))
    fmt = lambda a: "[" + " ".join(f"{v:.0%}" for v in a) + "]"
    ok = r_opt.mean() >= 0.30 and r_lc.mean() >= 0.30 and f_lc.mean() >= 0.40
    gate(4, ok,
         f"reduced mean saving optimal {r_opt.mean():.1%}, LC {r_lc.mean():.1%} (need 30%); "
         f"full-config LC {f_lc.mean():.1%} (need 40%; reference figure 55%); {dt:.0f} s. "
         f"per-seed reduced optimal {fmt(r_opt)}, single-user caps {fmt(r_cap)}; "
         f"full LC {fmt(f_lc)}, caps {fmt(f_cap)}")


def test_criterion_5_lc_near_optimal(gate):
    res = _tiny_results()
    ratios = [lc / opt if opt > 0 else (1.0 if lc <= EPS else math.inf) for _, opt, lc in res]
    good = sum(r <= 1.10 for r in ratios)
    ok = good >= 0.9 * len(res)
    gate(5, ok, f"LC <= 1.10 x optimal on {good}/{len(res)} tiny seeds (need 90%), worst ratio {max(ratios):.3f}")


def test_criterion_6_monotone_sweeps(gate):
    t0 = time.perf_counter()
    n_values = [8, 12, 16, 20, 24]
    bpc_values = [1e-5, 1e-4, 3e-4, 6e-4, 1e-3]
    viol_n = viol_b = 0
    for seed in range(10):
        on = [solver.solve_optimal(generate(SWEEP.with_(n_channels=n), seed), EPS, opts=HIGHS)[0].objective for n in n_values]
        ob = [solver.solve_optimal(generate(SWEEP.with_(bpc_fixed=b), seed), EPS, opts=HIGHS)[0].objective for b in bpc_values]
        viol_n += sum(b > a + EPS for a, b in zip(on, on[1:]))
        viol_b += sum(b < a - EPS for a, b in zip(ob, ob[1:]))
    dt = time.perf_counter() - t0
    ok = viol_n == 0 and viol_b == 0
    gate(6, ok, f"10 seeds, N in {n_values}: {viol_n} increases; BPC in {bpc_values}: {viol_b} decreases "
                f"(beyond eps), {dt:.0f} s")


def test_criterion_7_no_offload_closed_form(gate):
    a = solver.solve_no_offload(make_scenario([make_user(tau1=0.1)]))
    e = a.e_comp[0]
    f_fast = LEVELS11[a.clock_index(0)]
    b = solver.solve_no_offload(make_scenario([make_user(tau1=0.3)], T=0.3))
    f_slow = LEVELS11[b.clock_index(0)]
    fstar = (0.35 / (2 * 0.34e-27)) ** (1 / 3)
    ok = abs(e - 0.307) <= 1e-3 and f_fast == 2e9 and f_slow == pytest.approx(0.8e9)
    gate(7, ok, f"tau1 0.1 s: E_c = {e:.4f} J at {f_fast / 1e9:.1f} GHz; tau1 0.3 s: {f_slow / 1e9:.1f} GHz "
                f"(continuous f* = {fstar / 1e9:.3f} GHz)")


def _trace_ok(s, a, tr) -> bool:
    lo, hi = 0.0, solver.solve_no_offload(s).objective
    for it in tr.iterations:
        if not math.isclose(it.zeta, (lo + hi) / 2, rel_tol=1e-12):
            return False
        width = hi - lo
        lo, hi = (lo, it.zeta) if it.feasible else (it.zeta, hi)
        if not math.isclose(hi - lo, width / 2, rel_tol=1e-9):
            return False
    if (lo, hi) != (tr.zeta_min, tr.zeta_max) or not hi - lo < tr.epsilon:
        return False
    return evaluate(s, a.x, a.mu, a.rho, tr.zeta_max, rtol=1e-7).feasible_at_level


def test_criterion_8_bisection_contract(gate):
    n = bad = 0
    for seed in range(10):
        s = generate(TINY, 100 + seed)
        for alg in ("optimal", "lc"):
            a, tr = solver.run(s, alg, EPS)
            n += 1
            bad += not _trace_ok(s, a, tr)
    gate(8, bad == 0, f"{n} traces (optimal and LC on 10 tiny seeds): halving, final width < eps and "
                      f"evaluate-verified witness; {bad} violations")

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetoffload import ilp, solver
from hetoffload.energy import evaluate
from hetoffload.linearize import build_p2_feasibility, build_ps1
from hetoffload.model import one_hot
from hetoffload.oracle import brute_force
from hetoffload.radio import build_rate_table
from hetoffload.scenario import GeneratorParams, generate

from conftest import LEVELS11, make_scenario, make_user, small, tiny

EPS = solver.DEFAULT_EPSILON


def _scan_single(s):
    """Exhaustive (placement, clock, channel subset) scan for a one-user scenario."""
    u = s.users[0]
    best = math.inf
    for x in itertools.product((0, 1), repeat=u.n_tasks):
        for v in range(u.n_levels):
            for row in itertools.product((0, 1), repeat=s.n_channels):
                ev = evaluate(s, [list(x)], [list(one_hot(v, u.n_levels))], [list(row)])
                if ev.feasible:
                    best = min(best, ev.objective)
    return best


@pytest.mark.parametrize("seed", range(4))
def test_single_mue_matches_exhaustive_scan(seed):
    s = generate(GeneratorParams(n_sc=0, mues=1, n_channels=3, tasks_per_user=2), seed)
    a, trace = solver.solve_optimal(s)
    assert a.feasible
    assert abs(a.objective - _scan_single(s)) <= EPS


def _assert_trace_contract(s, a, trace, start):
    its = trace.iterations
    lo, hi = 0.0, start
    for it in its:
        assert it.zeta == pytest.approx(0.5 * (lo + hi), rel=1e-12)
        if it.feasible:
            hi = it.zeta
        else:
            lo = it.zeta
    assert (trace.zeta_min, trace.zeta_max) == (lo, hi)
    assert trace.zeta_max - trace.zeta_min < trace.epsilon
    # each step halves the bracket, so the count is fixed by the start width
    assert len(its) == math.floor(math.log2(start / trace.epsilon)) + 1
    ev = evaluate(s, a.x, a.mu, a.rho, trace.zeta_max, rtol=1e-7)
    assert ev.feasible_at_level
    feas = [it.zeta for it in its if it.feasible]
    infeas = [it.zeta for it in its if not it.feasible]
    if feas and infeas:
        assert min(feas) >= max(infeas)


@pytest.mark.parametrize("alg", ["optimal", "lc"])
@pytest.mark.parametrize("seed", range(3))
def test_bisection_trace_contract(alg, seed):
    s = small(seed)
    start = solver.solve_no_offload(s).objective
    a, trace = solver.run(s, alg)
    assert not trace.timed_out
    _assert_trace_contract(s, a, trace, start)


def test_loose_epsilon_skips_the_loop():
    s = small(0)
    start = solver.solve_no_offload(s)
    a, trace = solver.solve_optimal(s, epsilon=2 * start.objective)
    assert trace.iterations == [] and a == start


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_ordering_optimal_lc_no_offload(seed):
    s = small(seed)
    no = solver.solve_no_offload(s).objective
    a, ta = solver.solve_optimal(s)
    b, tb = solver.solve_lc(s)
    assert a.objective <= ta.zeta_max * (1 + 1e-7)
    assert b.objective <= tb.zeta_max * (1 + 1e-7)
    assert ta.zeta_max <= tb.zeta_max + EPS
    assert tb.zeta_max <= no + EPS
    assert b.objective <= no + EPS


@pytest.mark.parametrize("seed", range(3))
def test_lc_equals_optimal_without_small_cells(seed):
    s = generate(GeneratorParams(n_sc=0, mues=3, n_channels=3, tasks_per_user=2, clock_levels=3), seed)
    _, ta = solver.solve_optimal(s)
    _, tb = solver.solve_lc(s)
    assert ta.zeta_max == tb.zeta_max


def test_lc_tiers_use_disjoint_channels():
    s = tiny(2, n_channels=6)
    a, _ = solver.solve_lc(s)
    macro = {n for k in s.mues for n in a.channels_of(k)}
    small_ = {n for k in s.sues for n in a.channels_of(k)}
    assert not macro & small_
    assert len(macro) < s.n_channels


@pytest.mark.parametrize("seed", range(4))
def test_optimal_matches_oracle_on_small(seed):
    s = small(seed)
    best, _ = brute_force(s)
    a, _ = solver.solve_optimal(s)
    assert abs(a.objective - best) <= EPS


def test_no_offload_examples():
    s = make_scenario([make_user()])
    a = solver.solve_no_offload(s)
    assert a.objective == pytest.approx(0.307, abs=1e-4)
    assert a.clock_index(0) == 10
    s = make_scenario([make_user(tau1=0.3)], T=0.3)
    a = solver.solve_no_offload(s)
    assert LEVELS11[a.clock_index(0)] == pytest.approx(0.8e9)
    s = make_scenario([make_user(cycles=(), bits=())])
    assert solver.solve_no_offload(s).objective == 0.0
    assert all(r == (0,) for r in solver.solve_no_offload(make_scenario([make_user()])).rho)


def test_solvers_refuse_locally_infeasible_scenarios():
    s = make_scenario([make_user(tau1=0.05)])
    assert not solver.solve_no_offload(s).feasible
    for f in (solver.solve_optimal, solver.solve_lc):
        with pytest.raises(ValueError):
            f(s)


def test_full_offload_zero_bits():
    s = make_scenario([make_user(bits=[0.0]), make_user(bits=[0.0])], n_channels=1)
    a, trace = solver.solve_full_offload(s)
    assert a is not None and a.objective == 0.0
    assert all(row == (0,) for row in a.x)


def test_full_offload_without_channels_is_infeasible():
    s = make_scenario([make_user()], n_channels=0)
    a, trace = solver.solve_full_offload(s)
    assert a is None and trace.infeasible and not trace.timed_out


@pytest.mark.parametrize("seed", range(3))
def test_full_offload_matches_restricted_oracle(seed):
    s = small(seed)
    best, _ = brute_force(s, full_offload=True)
    a, trace = solver.solve_full_offload(s)
    if math.isinf(best):
        assert a is None and trace.infeasible
    else:
        assert all(v == 0 for row in a.x for v in row)
        assert abs(a.objective - best) <= EPS


def _oracle_levels(best):
    return [0.3 * best, 0.9 * best, best * (1 - 1e-6), best * (1 + 1e-6), 1.5 * best]


@pytest.mark.parametrize("seed", range(4))
def test_local_pinning_never_flips_feasibility(seed):
    s = small(seed)
    rt = build_rate_table(s)
    best, _ = brute_force(s)
    opts = solver.SolverOptions()
    hits = 0
    for zeta in _oracle_levels(best):
        fixing = solver.user_fixing(s, zeta, opts)
        local = {k: f for k, f in fixing.items() if f.mode.value == "local"}
        hits += bool(local)
        pinned = ilp.solve(build_p2_feasibility(s, rt, zeta, local).blp).ok
        full = ilp.solve(build_p2_feasibility(s, rt, zeta, fixing).blp).ok
        assert pinned == (zeta >= best)
        assert full == (zeta >= best)
    assert hits


@pytest.mark.parametrize("seed", range(3))
def test_feasibility_is_monotone_in_level(seed):
    s = small(seed)
    rt = build_rate_table(s)
    top = solver.solve_no_offload(s).objective
    verdicts = []
    for zeta in np.linspace(0.0, top, 12):
        fixing = solver.user_fixing(s, zeta, solver.SolverOptions())
        cp = build_p2_feasibility(s, rt, zeta, fixing)
        verdicts.append(not cp.offloading_users or ilp.solve(cp.blp).ok)
    assert verdicts == sorted(verdicts)
    assert verdicts[-1]


def test_user_fixing_pins_high_level_users_local():
    s = small(0)
    top = solver.solve_no_offload(s).objective
    fixing = solver.user_fixing(s, top * (1 + 1e-9), solver.SolverOptions())
    assert all(f.mode.value == "local" for f in fixing.values())
    fixing = solver.user_fixing(s, 0.0, solver.SolverOptions())
    assert all(f.offloaded == frozenset(range(s.users[k].n_tasks)) for k, f in fixing.items())


def test_user_threads_do_not_change_the_result():
    s = tiny(4)
    a, ta = solver.solve_lc(s)
    b, tb = solver.solve_lc(s, opts=solver.SolverOptions(workers=3))
    assert a == b and ta.zeta_max == tb.zeta_max


def test_highs_backend_agrees():
    s = small(1)
    _, ta = solver.solve_optimal(s)
    _, tb = solver.solve_optimal(s, opts=solver.SolverOptions(ilp_backend="highs"))
    assert abs(ta.zeta_max - tb.zeta_max) <= EPS


def test_zero_budget_returns_start_with_timeout():
    s = small(0)
    a, trace = solver.solve_optimal(s, time_budget=0.0)
    assert trace.timed_out and a == solver.solve_no_offload(s)


def test_dump_dir_writes_programs(tmp_path):
    s = small(0)
    eps = solver.solve_no_offload(s).objective / 3
    solver.solve_optimal(s, epsilon=eps, opts=solver.SolverOptions(dump_dir=tmp_path))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "optimal_it01_ps1_user0.lp" in names
    assert any(n.endswith("_p2.lp") for n in names)
    p = ilp.read_lp(tmp_path / "optimal_it01_ps1_user0.lp")
    assert p == build_ps1(s.users[0], 0.5 * solver.solve_no_offload(s).objective, tag="0")


def test_run_dispatch():
    s = small(0)
    a, t = solver.run(s, "no-offload")
    assert t is None and a == solver.solve_no_offload(s)
    with pytest.raises(KeyError):
        solver.run(s, "nope")
    d = solver.solve_lc(s)[1].to_dict()
    assert d["algorithm"] == "lc" and d["iterations"]

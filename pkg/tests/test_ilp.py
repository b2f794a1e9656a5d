import math

import highspy
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetoffload.ilp import (
    BinaryLinearProgram,
    Relation,
    Sense,
    Status,
    dumps_lp,
    export_lp,
    parse_lp,
    read_lp,
    solve,
    solve_lp_relaxation,
    tableau_simplex,
)
from hetoffload.ilp.lp import PreparedLP, solve_prepared
from hetoffload.linearize import build_ps1
from hetoffload.oracle import SearchTooLarge, brute_force_blp

from _blp import random_blp
from conftest import make_user


# ---------------------------------------------------------------- LP relaxation


def test_lp_simple_cover():
    p = BinaryLinearProgram()
    a, b = p.add_var("a", 1.0), p.add_var("b", 1.0)
    p.add_constraint({a: 1, b: 1}, Relation.GE, 1)
    r = solve_lp_relaxation(p)
    assert r.status is Status.OPTIMAL and r.objective == pytest.approx(1.0)
    assert solve_lp_relaxation(p, method="tableau").objective == pytest.approx(1.0)


def test_lp_infeasible_pair():
    p = BinaryLinearProgram()
    a = p.add_var("a")
    p.add_constraint({a: 1}, Relation.GE, 1)
    p.add_constraint({a: 1}, Relation.LE, 0)
    assert solve_lp_relaxation(p).status is Status.INFEASIBLE
    assert solve_lp_relaxation(p, method="tableau").status is Status.INFEASIBLE


@pytest.mark.parametrize("seed", range(40))
def test_tableau_matches_highs_on_random_relaxations(seed):
    rng = np.random.default_rng(seed)
    p = random_blp(rng, n=8, m=int(rng.integers(1, 7)), sense=Sense.MINIMIZE, integer=False)
    a = solve_lp_relaxation(p, method="highs")
    b = solve_lp_relaxation(p, method="tableau")
    assert a.status == b.status
    if a.status is Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-7)
        assert p.violations(b.x, tol=1e-7) == []


@pytest.mark.parametrize("rule", ["dantzig", "bland"])
def test_tableau_rules_agree(rule):
    c = np.array([-1.0, -2.0, 0.5])
    A = np.array([[1.0, 1.0, 1.0], [1.0, 3.0, 0.0]])
    b = np.array([1.5, 2.0])
    r = tableau_simplex(c, A, b, lo=np.zeros(3), hi=np.ones(3), rule=rule)
    assert r.status is Status.OPTIMAL
    # optimum by hand: x1 at its bound, x2 = 1/3 from the second row, value -5/3
    assert r.objective == pytest.approx(-5.0 / 3.0, abs=1e-9)
    assert np.allclose(r.x, [1.0, 1.0 / 3.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_weak_duality(seed):
    rng = np.random.default_rng(seed)
    p = random_blp(rng, sense=Sense.MINIMIZE, integer=False)
    prep = PreparedLP(p)
    n = p.n_vars
    lo = np.zeros(n)
    hi = np.ones(n)
    fix = rng.choice(n, size=min(n, 3), replace=False)
    lo[fix] = hi[fix] = rng.integers(0, 2, size=len(fix))
    r = solve_prepared(prep, lo, hi)
    if r.status is Status.OPTIMAL:
        assert r.dual_bound <= r.objective + 1e-8 * max(1.0, abs(r.objective))
        assert r.dual_bound == pytest.approx(r.objective, abs=1e-6)


# ---------------------------------------------------------------- branch and bound


def test_zero_objective_equality():
    p = BinaryLinearProgram()
    a = p.add_var("a")
    p.add_var("b")
    p.add_constraint({a: 1}, Relation.EQ, 1)
    r = solve(p)
    assert r.status is Status.OPTIMAL and r.values[a] == 1


def test_zero_variable_programs():
    p = BinaryLinearProgram(Sense.FEASIBILITY)
    assert solve(p).status is Status.OPTIMAL
    assert brute_force_blp(p).status is Status.OPTIMAL
    p.add_constraint({}, Relation.GE, 1.0)
    assert solve(p).status is Status.INFEASIBLE
    assert brute_force_blp(p).status is Status.INFEASIBLE


def test_infeasible_detected():
    p = BinaryLinearProgram()
    a, b = p.add_var("a", 1), p.add_var("b", 1)
    p.add_constraint({a: 1, b: 1}, Relation.EQ, 1)
    p.add_constraint({a: 1, b: -1}, Relation.EQ, 0)
    assert solve(p).status is Status.INFEASIBLE
    assert brute_force_blp(p).status is Status.INFEASIBLE


@pytest.mark.parametrize("seed", range(100))
def test_knapsack_matches_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    p = BinaryLinearProgram()
    cost = rng.integers(1, 20, 12)
    weight = rng.integers(1, 15, 12)
    for i in range(12):
        p.add_var(f"x{i}", float(cost[i]))
    p.add_constraint({i: float(weight[i]) for i in range(12)}, Relation.GE, float(rng.integers(10, int(weight.sum()) + 5)))
    a, b = solve(p), brute_force_blp(p)
    assert a.status == b.status
    if a.ok:
        assert a.objective == b.objective


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_bnb_matches_enumeration_with_float_data(seed):
    rng = np.random.default_rng(seed)
    p = random_blp(rng, integer=False)
    a, b = solve(p), brute_force_blp(p)
    assert a.status == b.status
    if a.ok:
        assert p.is_satisfied(a.values)
        if p.sense is Sense.MINIMIZE:
            assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_tableau_route_and_highs_mip_agree(seed):
    rng = np.random.default_rng(5000 + seed)
    p = random_blp(rng)
    ref = brute_force_blp(p)
    for kw in (dict(lp="tableau"), dict(backend="highs")):
        r = solve(p, **kw)
        assert r.status == ref.status, kw
        if ref.ok and p.sense is Sense.MINIMIZE:
            assert r.objective == ref.objective


def test_feasibility_stops_early():
    rng = np.random.default_rng(3)
    p = BinaryLinearProgram(Sense.FEASIBILITY)
    for i in range(14):
        p.add_var(f"x{i}")
    p.add_constraint({i: float(rng.integers(1, 9)) for i in range(14)}, Relation.GE, 20)
    r = solve(p)
    assert r.status is Status.OPTIMAL and p.is_satisfied(r.values)
    assert r.nodes <= 15


def test_deterministic_node_count():
    rng = np.random.default_rng(11)
    p = random_blp(rng, n=14, m=7, sense=Sense.MINIMIZE)
    a, b = solve(p), solve(p)
    assert (a.status, a.nodes, a.lp_solves, a.objective) == (b.status, b.nodes, b.lp_solves, b.objective)
    assert np.array_equal(a.values, b.values) if a.ok else True


@pytest.mark.parametrize("seed", range(25))
def test_bounds_nondecreasing_along_paths(seed):
    # minimisation: a child relaxation is tighter, so its bound cannot drop below the parent's
    rng = np.random.default_rng(seed)
    p = random_blp(rng, n=12, m=6, sense=Sense.MINIMIZE, integer=False)
    r = solve(p, log_bounds=True)
    bound = {}
    for parent, child, b in r.bound_log:
        bound[child] = b
        if parent >= 0:
            assert b >= bound[parent] - 1e-7 * max(1.0, abs(bound[parent]))


def test_timeout_keeps_incumbent():
    rng = np.random.default_rng(0)
    p = random_blp(rng, n=14, m=3, sense=Sense.MINIMIZE)
    r = solve(p, node_limit=1)
    assert r.status in (Status.TIMEOUT, Status.OPTIMAL, Status.INFEASIBLE)
    r0 = solve(p, time_budget=0.0)
    assert r0.status in (Status.TIMEOUT, Status.INFEASIBLE)
    if r0.values is not None:
        assert p.is_satisfied(r0.values)


def test_assignment_names():
    p = BinaryLinearProgram()
    a = p.add_var("alpha", -1)
    p.add_var("beta", 1)
    r = solve(p)
    assert r.assignment == {"alpha": 1, "beta": 0}
    assert r.values[a] == 1


def test_rejects_nonfinite_rows():
    p = BinaryLinearProgram()
    a = p.add_var("a")
    with pytest.raises(ValueError):
        p.add_constraint({a: math.inf}, Relation.LE, 1)


def test_brute_force_cap():
    p = BinaryLinearProgram()
    for i in range(23):
        p.add_var(f"x{i}")
    with pytest.raises(SearchTooLarge):
        brute_force_blp(p)


def test_scaled_rows_handle_mixed_magnitudes():
    # bits-scale and joule-scale rows in one program
    p = BinaryLinearProgram()
    a, b, c = p.add_var("a", 1.0), p.add_var("b", 2.0), p.add_var("c", 0.5)
    p.add_constraint({a: 3.3e5, b: 6.7e5, c: 1e5}, Relation.GE, 4e5)
    p.add_constraint({a: 1.5e-9, c: 2e-10}, Relation.LE, 1.6e-9)
    assert solve(p).objective == brute_force_blp(p).objective


# ---------------------------------------------------------------- LP format


@pytest.mark.parametrize("seed", range(15))
def test_lp_round_trip(seed, tmp_path):
    rng = np.random.default_rng(seed)
    p = random_blp(rng, integer=False)
    p.offset = float(rng.normal())
    path = tmp_path / "p.lp"
    export_lp(p, path)
    q = read_lp(path)
    assert q == p
    assert dumps_lp(q) == dumps_lp(p)


def test_lp_empty_constraints():
    p = BinaryLinearProgram(name="only_obj")
    p.add_var("a", 2.0)
    p.add_var("b", -1.0)
    text = dumps_lp(p)
    assert "Subject To" in text and "Binary" in text and text.rstrip().endswith("End")
    assert parse_lp(text) == p


def _solve_with_highs_file(path) -> float:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    return h.getInfo().objective_function_value


def test_exported_per_user_program_solves_externally(tmp_path):
    u = make_user(cycles=(0.07e9, 0.07e9, 0.06e9), bits=(3e4, 1e4, 5e4))
    p = build_ps1(u, zeta=0.15)
    path = tmp_path / "ps1.lp"
    export_lp(p, path)
    ours = solve(p)
    ext = _solve_with_highs_file(path)
    assert ours.objective == pytest.approx(ext + p.offset, rel=1e-9)

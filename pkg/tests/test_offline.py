from fractions import Fraction

import numpy as np
import pytest

from mssms.generators import gen_integrality_gap, gen_random
from mssms.metric import line_space, uniform_space
from mssms.offline import (
    BudgetExceededError,
    Instance,
    InstanceError,
    Schedule,
    ScheduleError,
    build_lp,
    lp_point_from_schedule,
    opt_bruteforce,
    opt_dp,
    opt_kserver_flow,
    opt_mss_path,
    round_to_kl,
    schedule_from_lp_point,
    solve_lp,
    solve_lp_float,
    verify_schedule,
)


@pytest.fixture
def small_instance():
    """Two servers on a line, requests of width two."""
    space = line_space([0, 1, 3, 7, 12])
    return Instance.build(space, [0, 4], [(1, 2), (2, 3), (0, 3), (1, 4)], name="small")


@pytest.fixture
def random_instances():
    rng = np.random.default_rng(21)
    out = []
    for _ in range(25):
        k, l = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        out.append(gen_random({"kind": "line", "coords": [0, 2, 3, 7, 8, 11]}, k, l, 5, rng))
    return out


def test_instance_build_normalizes(small_instance):
    """Test canonical ordering and the inferred width."""
    assert small_instance.k == 2
    assert small_instance.l == 2
    assert small_instance.m == 4
    inst = Instance.build(uniform_space(3), [2, 0], [[2, 1]])
    assert inst.initial == (0, 2)
    assert inst.requests == ((1, 2),)


def test_instance_validation():
    """Test that malformed instances are refused."""
    space = uniform_space(3)
    with pytest.raises(InstanceError):
        Instance(space, 1, 1, (0,), ((1, 2),))
    with pytest.raises(InstanceError):
        Instance(space, 2, 1, (0,), ())
    with pytest.raises(InstanceError):
        Instance.build(space, [0], [(5,)])


def test_opt_dp_simple_value():
    """Test a hand-computed optimum."""
    inst = Instance.build(uniform_space(4), [0, 1], [(2, 3), (0, 2), (1, 3)])
    cost, schedule = opt_dp(inst)
    assert cost == 1
    assert verify_schedule(inst, schedule) == 1


def test_opt_dp_matches_bruteforce(random_instances):
    """Test the configuration DP against exhaustive search."""
    for inst in random_instances:
        cost, schedule = opt_dp(inst)
        assert cost == opt_bruteforce(inst)
        assert verify_schedule(inst, schedule) == cost


def test_opt_dp_pruning_is_exact(random_instances):
    """Test that pruned and unpruned DPs agree."""
    for inst in random_instances:
        assert opt_dp(inst, prune=True)[0] == opt_dp(inst)[0]


def test_budget_exceeded(small_instance):
    """Test that the solvers refuse instances over budget."""
    with pytest.raises(BudgetExceededError):
        opt_dp(small_instance, budget=10)
    with pytest.raises(BudgetExceededError):
        opt_bruteforce(small_instance, budget=10)


def test_budget_from_environment(small_instance, monkeypatch):
    """Test that MSSMS_BUDGET bounds the DP."""
    monkeypatch.setenv("MSSMS_BUDGET", "5")
    with pytest.raises(BudgetExceededError):
        opt_dp(small_instance)


def test_bruteforce_budget_from_environment(monkeypatch):
    """Test that MSSMS_BUDGET also bounds the brute-force leaves."""
    inst = gen_random({"kind": "uniform", "n": 5}, 2, 2, 4, np.random.default_rng(8))
    monkeypatch.setenv("MSSMS_BUDGET", "10")
    with pytest.raises(BudgetExceededError):
        opt_bruteforce(inst)
    monkeypatch.delenv("MSSMS_BUDGET")
    assert opt_bruteforce(inst) == opt_dp(inst)[0]


def test_kserver_flow_matches_dp():
    """Test the min-cost flow against the DP on single-point requests."""
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = gen_random({"kind": "line", "coords": [0, 1, 4, 9, 10, 15]}, 2, 1, 7, rng)
        cost, schedule = opt_kserver_flow(inst)
        assert cost == opt_dp(inst)[0]
        assert verify_schedule(inst, schedule) == cost


def test_kserver_flow_needs_singletons(small_instance):
    """Test that wide requests are refused by the flow solver."""
    with pytest.raises(InstanceError):
        opt_kserver_flow(small_instance)


def test_mss_path_matches_dp():
    """Test the single-server shortest path against the DP."""
    rng = np.random.default_rng(8)
    for _ in range(20):
        inst = gen_random({"kind": "line", "coords": [0, 2, 5, 6, 10]}, 1, 2, 6, rng)
        assert opt_mss_path(inst) == opt_dp(inst)[0]
    with pytest.raises(InstanceError):
        opt_mss_path(Instance.build(uniform_space(3), [0, 1], [(2,)]))


def test_verify_schedule_rejects_bad_schedules(small_instance):
    """Test unserved requests, wrong starts and wrong costs."""
    cost, schedule = opt_dp(small_instance)
    with pytest.raises(ScheduleError, match="recorded cost"):
        verify_schedule(small_instance, Schedule(schedule.initial_positions, schedule.moves, cost + 1))
    with pytest.raises(ScheduleError, match="not served"):
        verify_schedule(small_instance, Schedule((0, 4), [[], [], [], []], Fraction(0)))
    with pytest.raises(ScheduleError, match="wrong configuration"):
        verify_schedule(small_instance, Schedule((1, 4), schedule.moves, cost))


def test_lp_sizes_on_gap_instance():
    """Test variable and row counts of the LP on the k=l=2, m=3 gap instance."""
    model = build_lp(gen_integrality_gap(2, 2, 3))
    assert model.n_vars == 684
    assert len(model.program.rows) == 56
    dump = model.dump()
    assert dump.startswith("min: ")
    assert "cover18:" in dump
    assert dump.endswith("bounds: 0 <= x <= 1")


def test_lp_integrality_gap_single_block():
    """Test LP <= k against an integral optimum of 3 on one block of the gap family."""
    inst = gen_integrality_gap(2, 2, 1)
    model = build_lp(inst)
    sol = solve_lp(model)
    assert sol.verify(model)
    assert sol.objective <= 2
    assert opt_dp(inst)[0] == 3
    assert solve_lp_float(model) == pytest.approx(float(sol.objective), abs=1e-6)


def test_rounding_to_kl_servers():
    """Test that rounding yields a kl-server schedule of cost at most l times the LP."""
    inst = gen_integrality_gap(2, 2, 1)
    model = build_lp(inst)
    sol = solve_lp(model)
    result = round_to_kl(inst, sol, model)
    assert result.instance.k == 4
    assert all(p in r for p, r in zip(result.chosen, inst.requests))
    assert result.cost <= inst.l * sol.objective
    assert verify_schedule(inst, result.schedule, initial=list(inst.initial) * inst.l) == result.cost


def test_lp_below_opt_and_rounding_bound(random_instances):
    """Test LP <= OPT and the rounding guarantee on random instances."""
    for inst in random_instances[:10]:
        model = build_lp(inst)
        sol = solve_lp(model)
        assert sol.objective <= opt_dp(inst)[0]
        assert round_to_kl(inst, sol, model).cost <= inst.l * sol.objective


def test_schedule_lp_point_round_trip(small_instance):
    """Test that an optimal schedule maps to a feasible LP point of the same cost and back."""
    model = build_lp(small_instance)
    cost, schedule = opt_dp(small_instance)
    point = lp_point_from_schedule(model, schedule)
    assert model.is_feasible(point)
    assert model.objective_value(point) == cost
    back = schedule_from_lp_point(model, point)
    assert verify_schedule(small_instance, back) == cost
    with pytest.raises(ScheduleError):
        schedule_from_lp_point(model, {key: Fraction(1, 2) for key in point})

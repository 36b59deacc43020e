import math
import random

import pytest

from dvrp.construction import construct
from dvrp.improvement import (ImprovementBudget, ImprovementConfig, ImprovementMethod,
                              InfeasibleSolutionError, descend, improve)
from dvrp.model import Customer, Instance, Trip, check_feasible, make_solution
from oracle import instance_i3, instance_i4, optimal_cost, random_small_instance

METHODS = list(ImprovementMethod)
SMALL = ImprovementBudget(time_limit=None, max_iters=5000, seed=1)


def i4_bad():
    inst = instance_i4()
    return inst, make_solution(inst, [Trip(0, (1, 3, 2))])


def test_descend_fixes_i4():
    inst, sol = i4_bad()
    out = descend(inst, sol)
    assert math.isclose(out.cost, 40.0)


def test_descend_leaves_optimal_i3_alone():
    inst = instance_i3()
    sol = make_solution(inst, [Trip(0, (1, 2, 3))])
    assert math.isclose(descend(inst, sol).cost, 20.0)


def test_zero_iteration_budget_returns_input():
    inst, sol = i4_bad()
    assert descend(inst, sol, ImprovementBudget(None, 0)) is sol
    for m in METHODS:
        assert improve(inst, sol, m, ImprovementBudget(None, 0)) is sol


def test_tabu_search_on_i4():
    inst, sol = i4_bad()
    assert math.isclose(improve(inst, sol, "tabu-search", ImprovementBudget(None, 50)).cost, 40.0)


@pytest.mark.parametrize("method", METHODS)
def test_single_customer_unchanged(method):
    inst = Instance((0, 0), 1, 5, (Customer(1, 3, 4, 2),))
    sol = make_solution(inst, [Trip(0, (1,))])
    assert improve(inst, sol, method).cost == sol.cost


def test_simulated_annealing_is_seeded():
    inst = random_small_instance(random.Random(9), n=8)
    sol = construct(inst, "path-cheapest-arc")
    b = ImprovementBudget(None, 3000, seed=42)
    assert improve(inst, sol, "simulated-annealing", b) == improve(inst, sol, "simulated-annealing", b)


@pytest.mark.parametrize("method", METHODS)
def test_infeasible_input_rejected(method):
    inst = instance_i4()
    inst = Instance(inst.depot, 3, 2, inst.customers)
    sol = make_solution(inst, [Trip(0, (1, 2, 3))])
    with pytest.raises(InfeasibleSolutionError):
        improve(inst, sol, method)
    with pytest.raises(InfeasibleSolutionError):
        descend(inst, sol)


@pytest.mark.parametrize("method", METHODS)
def test_never_worse_and_feasible(method):
    rng = random.Random(21)
    cfg = ImprovementConfig(validate=True)
    for k in range(25):
        inst = random_small_instance(rng)
        sol = construct(inst, "path-cheapest-arc")
        out = improve(inst, sol, method, SMALL.with_seed(k), cfg)
        assert out.cost <= sol.cost + 1e-9
        assert check_feasible(inst, out) == []
        assert len({t.vehicle_id for t in out.trips}) <= inst.fleet_size


@pytest.mark.parametrize("method", METHODS)
def test_reaches_optimum_on_tiny_instances(method):
    rng = random.Random(31)
    hits = 0
    for k in range(40):
        inst = random_small_instance(rng)
        out = improve(inst, construct(inst, "savings"), method, ImprovementBudget(1.0, 100_000, k))
        hits += out.cost <= optimal_cost(inst) + 1e-6
    assert hits >= 36


def test_multi_trip_may_exceed_fleet():
    inst = Instance((0, 0), 1, 2, tuple(Customer(i, 10 * i, 0, 2) for i in range(1, 4)))
    sol = construct(inst, "savings", enforce_fleet=False)
    out = improve(inst, sol, "tabu-search", multi_trip=True)
    assert check_feasible(inst, out) == []
    assert len(out.trips) == 3


def test_budget_needs_a_limit():
    with pytest.raises(ValueError):
        ImprovementBudget(None, None)


def test_config_from_dict():
    cfg = ImprovementConfig.from_dict({"gls_alpha": 0.2, "ts_tenure": 7})
    assert cfg.gls_alpha == 0.2 and cfg.ts_tenure == 7
    with pytest.raises(ValueError):
        ImprovementConfig.from_dict({"nope": 1})


def test_anchored_trip_start_and_lock_survive():
    inst = Instance((0, 0), 2, 10, tuple(Customer(i, (i * 37) % 50, (i * 11) % 40, 2) for i in range(1, 8)))
    seed = Trip(1, (3,), start=(20.0, 5.0), capacity=6, locked=1)
    sol = construct(inst, "savings", targeted=[1, 2, 4, 5, 6, 7], seeds=[seed], enforce_fleet=False)
    for m in METHODS:
        out = improve(inst, sol, m, SMALL, multi_trip=True)
        anchored = [t for t in out.trips if t.anchored]
        assert len(anchored) == 1
        t = anchored[0]
        assert t.vehicle_id == 1 and t.visits[0] == 3 and t.start == (20.0, 5.0)
        assert sum(inst.customer(c).demand for c in t.visits) <= 6
        assert check_feasible(inst, out, range(1, 8)) == []

import math
import random

import pytest

from dvrp.construction import ConstructionMethod, InfeasibleConstructionError, construct, savings_list
from dvrp.model import Customer, Instance, Trip, check_feasible, solution_cost
from oracle import instance_i2, instance_i3, optimal_cost, random_small_instance

METHODS = list(ConstructionMethod)


def test_savings_on_i3_builds_the_square():
    sol = construct(instance_i3(), "savings")
    assert [t.visits for t in sol.trips] in ([(1, 2, 3)], [(3, 2, 1)])
    assert math.isclose(sol.cost, 20.0)


def test_savings_on_i2_keeps_trips_apart():
    sol = construct(instance_i2(), ConstructionMethod.SAVINGS)
    assert sorted(t.visits for t in sol.trips) == [(1,), (2,)]
    assert sol.cost == 40.0


def test_path_cheapest_arc_on_i3_breaks_tie_by_id():
    sol = construct(instance_i3(), "path-cheapest-arc")
    assert [t.visits for t in sol.trips] == [(1, 2, 3)]
    assert math.isclose(sol.cost, 20.0)


@pytest.mark.parametrize("method", METHODS)
def test_single_customer(method):
    inst = Instance((1, 1), 1, 5, (Customer(3, 4, 5, 2),))
    sol = construct(inst, method)
    assert [t.visits for t in sol.trips] == [(3,)]
    assert sol.cost == 10.0


def test_savings_values_on_i3():
    s = {(i, j): v for i, j, v in savings_list(instance_i3())}
    assert math.isclose(s[1, 2], math.sqrt(50), rel_tol=1e-12)
    assert math.isclose(s[1, 2], 7.0711, abs_tol=1e-4)
    assert math.isclose(s[1, 3], 10 - math.sqrt(50), rel_tol=1e-12)
    assert math.isclose(s[1, 3], 2.9289, abs_tol=1e-4)


def test_savings_order_and_ties():
    lst = savings_list(instance_i3())
    assert [(i, j) for i, j, _ in lst] == [(1, 2), (2, 3), (1, 3)]


def test_coincident_customers_at_depot_save_nothing():
    inst = Instance((2, 2), 1, 10, (Customer(1, 2, 2, 1), Customer(2, 2, 2, 1)))
    assert savings_list(inst) == [(1, 2, 0.0)]


def test_demand_above_capacity_names_customer():
    inst = Instance((0, 0), 2, 5, (Customer(1, 1, 0, 2), Customer(7, 0, 1, 6)))
    with pytest.raises(InfeasibleConstructionError) as err:
        construct(inst, "savings")
    assert err.value.customer_id == 7


def test_fleet_limit_is_enforced_unless_relaxed():
    inst = Instance((0, 0), 1, 10, instance_i2().customers)
    with pytest.raises(InfeasibleConstructionError):
        construct(inst, "savings")
    sol = construct(inst, "savings", enforce_fleet=False)
    assert len(sol.trips) == 2
    assert {t.vehicle_id for t in sol.trips} == {0}


@pytest.mark.parametrize("method", METHODS)
def test_random_instances_feasible_and_bounded(method):
    rng = random.Random(11)
    for _ in range(60):
        inst = random_small_instance(rng)
        sol = construct(inst, method, enforce_fleet=False)
        assert check_feasible(inst, sol) == []
        trivial = sum(2 * math.dist(inst.depot, c.pos) for c in inst.customers)
        assert optimal_cost(inst, max_trips=inst.n) - 1e-9 <= sol.cost <= trivial + 1e-9


@pytest.mark.parametrize("method", METHODS)
def test_deterministic(method):
    inst = random_small_instance(random.Random(3), n=8)
    assert construct(inst, method) == construct(inst, method)


def test_targeted_subset():
    inst = instance_i3()
    sol = construct(inst, "global-cheapest-arc", targeted=[1, 3])
    assert check_feasible(inst, sol, [1, 3]) == []


def test_savings_merges_strictly_reduce_cost():
    rng = random.Random(8)
    for _ in range(30):
        inst = random_small_instance(rng)
        singles = sum(2 * math.dist(inst.depot, c.pos) for c in inst.customers)
        merged = construct(inst, "savings", enforce_fleet=False)
        positive = all(s > 0 for _, _, s in savings_list(inst))
        if positive and len(merged.trips) < inst.n:
            assert merged.cost < singles


@pytest.mark.parametrize("method", METHODS)
def test_seed_trip_keeps_its_prefix(method):
    inst = Instance((0, 0), 2, 10, tuple(Customer(i, i, 3, 3) for i in range(1, 6)))
    seed = Trip(1, (2,), start=(1.0, 1.0), capacity=7, locked=1)
    sol = construct(inst, method, targeted=[1, 3, 4, 5], seeds=[seed], enforce_fleet=False)
    first = sol.trips[0]
    assert first.vehicle_id == 1 and first.visits[0] == 2 and first.start == (1.0, 1.0)
    assert check_feasible(inst, sol, [1, 2, 3, 4, 5]) == []
    assert sum(3 for _ in first.visits) <= 7
    assert math.isclose(sol.cost, solution_cost(inst, sol))

"""Exhaustive reference solver for tiny instances.

Enumerates every set partition of the customers into capacity-feasible
trips and every visiting order of each trip. Deliberately shares no code
with the package beyond the data classes.
"""

from __future__ import annotations

import itertools
import math
import random

from dvrp.model import Customer, Instance


def _d(a, b):
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)


def best_tour(depot, pts):
    """Cheapest closed tour depot -> pts (some order) -> depot, by enumeration."""
    if not pts:
        return 0.0, ()
    best = (math.inf, ())
    for perm in itertools.permutations(range(len(pts))):
        if len(perm) > 1 and perm[0] > perm[-1]:
            continue  # mirror image of an order already seen
        cost = _d(depot, pts[perm[0]])
        for a, b in zip(perm, perm[1:]):
            cost += _d(pts[a], pts[b])
        cost += _d(pts[perm[-1]], depot)
        if cost < best[0]:
            best = (cost, perm)
    return best


def optimal_cost(instance: Instance, max_trips: int | None = None) -> float:
    custs = list(instance.customers)
    n = len(custs)
    depot = instance.depot
    q = instance.capacity
    max_trips = instance.fleet_size if max_trips is None else max_trips
    block_cost = {}
    for mask in range(1, 1 << n):
        members = [custs[i] for i in range(n) if mask >> i & 1]
        if sum(c.demand for c in members) <= q:
            block_cost[mask] = best_tour(depot, [c.pos for c in members])[0]

    full = (1 << n) - 1
    best = math.inf

    def rec(remaining, acc, k):
        nonlocal best
        if remaining == 0:
            best = min(best, acc)
            return
        if k == max_trips or acc >= best:
            return
        low = remaining & -remaining
        rest = remaining ^ low
        sub = rest
        while True:
            block = sub | low
            c = block_cost.get(block)
            if c is not None:
                rec(remaining ^ block, acc + c, k + 1)
            if sub == 0:
                break
            sub = (sub - 1) & rest

    rec(full, 0.0, 0)
    return best


def random_small_instance(rng: random.Random, n: int | None = None) -> Instance:
    n = rng.randint(2, 8) if n is None else n
    q = rng.randint(10, 30)
    custs = [Customer(i + 1, round(rng.uniform(0, 100), 2), round(rng.uniform(0, 100), 2),
                      rng.randint(1, min(q, 12))) for i in range(n)]
    return Instance((round(rng.uniform(0, 100), 2), round(rng.uniform(0, 100), 2)), n, q, custs)


# -- hand-checked reference instances -----------------------------------------

def instance_i2() -> Instance:
    return Instance((0, 0), 2, 10, (Customer(1, 0, 10, 6), Customer(2, 10, 0, 6)))


def instance_i3() -> Instance:
    return Instance((0, 0), 3, 10, (Customer(1, 0, 5, 3), Customer(2, 5, 5, 3), Customer(3, 5, 0, 3)))


def instance_i4() -> Instance:
    return Instance((0, 0), 3, 3, (Customer(1, 10, 0, 1), Customer(2, 10, 10, 1), Customer(3, 0, 10, 1)))


def sample_std(xs):
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))

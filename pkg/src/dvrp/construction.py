"""First-stage route construction: Savings, Path Cheapest Arc, Global Cheapest Arc.

All three builders accept *seed* trips: anchored partial trips (a vehicle
already out on the road) that may only be extended at their tail. Without
seeds they reduce to the textbook depot-anchored heuristics.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Sequence

from ._graph import Graph
from .model import Instance, Solution, Trip, assign_vehicles, make_solution


class ConstructionMethod(str, Enum):
    SAVINGS = "savings"
    PATH_CHEAPEST_ARC = "path-cheapest-arc"
    GLOBAL_CHEAPEST_ARC = "global-cheapest-arc"

    def __str__(self):
        return self.value


class InfeasibleConstructionError(RuntimeError):
    def __init__(self, message, customer_id=None):
        super().__init__(message)
        self.customer_id = customer_id


class _Route:
    __slots__ = ("nodes", "load", "cap", "anchor")

    def __init__(self, nodes, load, cap, anchor=None):
        self.nodes = nodes
        self.load = load
        self.cap = cap
        self.anchor = anchor  # start node of an anchored route

    def tail(self):
        if self.nodes:
            return self.nodes[-1]
        return self.anchor

    def head(self):
        return self.nodes[0] if self.nodes else self.anchor


class _Fragments:
    """Route fragments merged end to end, shared by Savings and Global Cheapest Arc."""

    def __init__(self, graph: Graph, seed_routes: list[_Route], singles: list[int], capacity: int):
        self.routes: list[_Route | None] = list(seed_routes)
        self.owner: dict[int, int] = {}
        for r, route in enumerate(seed_routes):
            self.owner[route.anchor] = r
            for v in route.nodes:
                self.owner[v] = r
        for v in singles:
            self.owner[v] = len(self.routes)
            self.routes.append(_Route([v], graph.demand[v], capacity))

    def join(self, a: int, b: int) -> bool:
        ra, rb = self.owner[a], self.owner[b]
        if ra == rb:
            return False
        A, B = self.routes[ra], self.routes[rb]
        if B.anchor is not None:
            if A.anchor is not None:
                return False
            a, b, ra, rb, A, B = b, a, rb, ra, B, A
        if A.anchor is not None:
            if a != A.tail():
                return False
        elif a == A.tail():
            pass
        elif a == A.head():
            A.nodes.reverse()
        else:
            return False
        if b == B.head():
            pass
        elif b == B.tail():
            B.nodes.reverse()
        else:
            return False
        if A.load + B.load > A.cap:
            return False
        A.nodes.extend(B.nodes)
        A.load += B.load
        for v in B.nodes:
            self.owner[v] = ra
        self.routes[rb] = None
        return True

    def result(self) -> list[_Route]:
        return [r for r in self.routes if r is not None]


def _savings_pairs(graph: Graph, nodes: Sequence[int]) -> list[tuple[float, int, int]]:
    d = graph.dist
    d0 = d[0]
    out = []
    first_start = graph.first_start
    for k, i in enumerate(nodes):
        di = d[i]
        for j in nodes[k + 1:]:
            if i >= first_start and j >= first_start:
                continue
            out.append((d0[i] + d0[j] - di[j], i, j))
    out.sort(key=lambda t: (-t[0], t[1], t[2]))
    return out


def savings_list(instance: Instance, targeted: Iterable[int] | None = None) -> list[tuple[int, int, float]]:
    """Clarke-Wright savings for every unordered customer pair, best first.

    Ties are broken by ``(min id, max id)`` ascending.
    """
    ids = sorted(c.id for c in instance.customers) if targeted is None else sorted(set(targeted))
    graph = Graph(instance, ids)
    pairs = _savings_pairs(graph, list(range(1, len(ids) + 1)))
    return [(graph.cid(i), graph.cid(j), s) for s, i, j in pairs]


def _seed_routes(graph: Graph, seeds: Sequence[Trip], capacity: int) -> list[_Route]:
    routes = []
    for k, s in enumerate(seeds):
        nodes = [graph.index[c] for c in s.visits]
        load = sum(graph.demand[v] for v in nodes)
        cap = capacity if s.capacity is None else s.capacity
        routes.append(_Route(nodes, load, cap, anchor=graph.first_start + k))
    return routes


def _savings(graph, seed_routes, free, capacity):
    frags = _Fragments(graph, seed_routes, free, capacity)
    nodes = [v for r in seed_routes for v in r.nodes] + list(free)
    nodes += [r.anchor for r in seed_routes]
    nodes.sort()
    for s, i, j in _savings_pairs(graph, nodes):
        if s < 0:
            break
        frags.join(i, j)
    return frags.result()


def _global_cheapest_arc(graph, seed_routes, free, capacity):
    frags = _Fragments(graph, seed_routes, free, capacity)
    nodes = sorted([v for r in seed_routes for v in r.nodes] + list(free)
                   + [r.anchor for r in seed_routes])
    d = graph.dist
    fs = graph.first_start
    arcs = []
    for k, i in enumerate(nodes):
        di = d[i]
        for j in nodes[k + 1:]:
            if i >= fs and j >= fs:
                continue
            arcs.append((di[j], i, j))
    arcs.sort()
    # an arc rejected once can never become admissible later: ends only turn
    # interior, fragments only grow, loads only increase
    for _, i, j in arcs:
        frags.join(i, j)
    return frags.result()


def _path_cheapest_arc(graph, seed_routes, free, capacity):
    d = graph.dist
    demand = graph.demand
    unrouted = set(free)

    def extend(route):
        cur = route.tail() if route.anchor is not None else (route.nodes[-1] if route.nodes else 0)
        while unrouted:
            room = route.cap - route.load
            best = None
            dc = d[cur]
            for v in unrouted:
                if demand[v] <= room:
                    key = (dc[v], v)
                    if best is None or key < best:
                        best = key
            if best is None:
                return
            v = best[1]
            unrouted.discard(v)
            route.nodes.append(v)
            route.load += demand[v]
            cur = v

    routes = list(seed_routes)
    for r in seed_routes:
        extend(r)
    while unrouted:
        r = _Route([], 0, capacity)
        extend(r)
        routes.append(r)
    return routes


_BUILDERS = {
    ConstructionMethod.SAVINGS: _savings,
    ConstructionMethod.PATH_CHEAPEST_ARC: _path_cheapest_arc,
    ConstructionMethod.GLOBAL_CHEAPEST_ARC: _global_cheapest_arc,
}


def construct(instance: Instance, method: ConstructionMethod | str,
              targeted: Iterable[int] | None = None, *,
              seeds: Sequence[Trip] = (), enforce_fleet: bool = True) -> Solution:
    """Build a feasible solution over ``targeted`` customers (all by default).

    ``seeds`` are anchored trips whose visits stay as a fixed prefix. With
    ``enforce_fleet`` the heuristic runs unconstrained and then fails if more
    trips than vehicles were needed; without it vehicles make several trips.
    """
    method = ConstructionMethod(method)
    ids = sorted(c.id for c in instance.customers) if targeted is None else sorted(set(targeted))
    for s in seeds:
        if s.start is None:
            raise ValueError("seed trips must be anchored")
    prefixed = [c for s in seeds for c in s.visits]
    overlap = set(prefixed) & set(ids)
    if overlap:
        raise ValueError(f"customers {sorted(overlap)} are both seeded and targeted")
    for cid in ids:
        c = instance.customer(cid)
        if c.demand > instance.capacity:
            raise InfeasibleConstructionError(
                f"customer {cid} demand {c.demand} exceeds vehicle capacity {instance.capacity}", cid)

    graph = Graph(instance, sorted(ids + prefixed), [s.start for s in seeds])
    seed_routes = _seed_routes(graph, seeds, instance.capacity)
    free = [graph.index[c] for c in ids]
    routes = _BUILDERS[method](graph, seed_routes, free, instance.capacity)

    trips = []
    for k, s in enumerate(seeds):
        r = seed_routes[k]
        trips.append(Trip(s.vehicle_id, tuple(graph.cid(v) for v in r.nodes), s.start,
                          s.capacity, len(s.visits)))
    for r in routes:
        if r.anchor is None and r.nodes:
            trips.append(Trip(-1, tuple(graph.cid(v) for v in r.nodes)))
    if enforce_fleet and len(trips) > instance.fleet_size:
        raise InfeasibleConstructionError(
            f"{method.value} needs {len(trips)} trips but the fleet has {instance.fleet_size} vehicles")
    return make_solution(instance, assign_vehicles(trips, instance.fleet_size))

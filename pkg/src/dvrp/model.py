"""Core routing data model: customers, instances, trips, solutions and costs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import chain
from pathlib import Path
from typing import Iterable, Sequence

Point = tuple[float, float]

# above this many nodes distances are computed on demand instead of tabulated
MATRIX_CAP = 2000


class InstanceFormatError(ValueError):
    """Raised when an instance or solution document is malformed."""


class UnknownCustomerError(KeyError):
    def __init__(self, customer_id):
        super().__init__(customer_id)
        self.customer_id = customer_id

    def __str__(self):
        return f"unknown customer id {self.customer_id}"


@dataclass(frozen=True)
class Customer:
    id: int
    x: float
    y: float
    demand: int
    release_time: float = 0.0

    def __post_init__(self):
        if self.demand < 1:
            raise InstanceFormatError(f"customer {self.id}: demand must be >= 1, got {self.demand}")
        if self.release_time < 0:
            raise InstanceFormatError(f"customer {self.id}: negative release time")

    @property
    def pos(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class Instance:
    """A single-depot instance with a homogeneous fleet.

    Demands above ``capacity`` are allowed to exist here so that callers can
    report them as infeasibility (with the offending id) rather than as a
    parse failure; see :meth:`oversized`.
    """

    depot: Point
    fleet_size: int
    capacity: int
    customers: tuple[Customer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "depot", (float(self.depot[0]), float(self.depot[1])))
        object.__setattr__(self, "customers", tuple(self.customers))
        if self.fleet_size < 1:
            raise InstanceFormatError("fleet_size must be >= 1")
        if self.capacity < 1:
            raise InstanceFormatError("capacity must be >= 1")
        seen = set()
        for c in self.customers:
            if c.id in seen:
                raise InstanceFormatError(f"duplicate customer id {c.id}")
            seen.add(c.id)

    @cached_property
    def by_id(self) -> dict[int, Customer]:
        return {c.id: c for c in self.customers}

    @property
    def n(self) -> int:
        return len(self.customers)

    def customer(self, cid: int) -> Customer:
        try:
            return self.by_id[cid]
        except KeyError:
            raise UnknownCustomerError(cid) from None

    def oversized(self) -> list[Customer]:
        """Customers whose demand can never fit in one vehicle."""
        return [c for c in self.customers if c.demand > self.capacity]

    def with_customers(self, customers: Iterable[Customer]) -> "Instance":
        return Instance(self.depot, self.fleet_size, self.capacity, tuple(customers))


@dataclass(frozen=True)
class Trip:
    """One depot-terminated vehicle trip.

    ``start`` is ``None`` for trips leaving the depot. During simulation a
    trip may instead start wherever the vehicle currently is; ``capacity``
    then holds the vehicle's remaining load and the first ``locked`` visits
    are fixed.
    """

    vehicle_id: int
    visits: tuple[int, ...] = ()
    start: Point | None = None
    capacity: int | None = None
    locked: int = 0

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple(self.visits))

    @property
    def anchored(self) -> bool:
        return self.start is not None

    def replace_visits(self, visits: Sequence[int]) -> "Trip":
        return Trip(self.vehicle_id, tuple(visits), self.start, self.capacity, self.locked)


@dataclass(frozen=True)
class Solution:
    trips: tuple[Trip, ...] = ()
    cost: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "trips", tuple(self.trips))

    def customer_ids(self) -> list[int]:
        return [cid for t in self.trips for cid in t.visits]

    @property
    def vehicles_used(self) -> set[int]:
        return {t.vehicle_id for t in self.trips if t.visits or t.anchored}


@dataclass(frozen=True)
class Violation:
    kind: str  # capacity | missing | duplicate | fleet | unknown | unexpected | locked
    message: str
    trip: int | None = None
    customer: int | None = None


def euclidean_distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class _LazyRow:
    __slots__ = ("_points", "_p")

    def __init__(self, points, i):
        self._points = points
        self._p = points[i]

    def __getitem__(self, j):
        return euclidean_distance(self._p, self._points[j])


class _LazyMatrix:
    def __init__(self, points):
        self._points = list(points)

    def __getitem__(self, i):
        return _LazyRow(self._points, i)

    def __len__(self):
        return len(self._points)


def distance_matrix(points: Sequence[Point], cap: int = MATRIX_CAP):
    """Full distance table as nested lists, or an on-demand equivalent above ``cap``.

    Either result is indexed as ``d[i][j]``.
    """
    if len(points) > cap:
        return _LazyMatrix(points)
    return [[euclidean_distance(p, q) for q in points] for p in points]


def trip_legs(instance: Instance, trip: Trip) -> list[float]:
    start = trip.start if trip.start is not None else instance.depot
    prev = start
    legs = []
    for cid in trip.visits:
        pos = instance.customer(cid).pos
        legs.append(euclidean_distance(prev, pos))
        prev = pos
    if trip.visits or trip.start is not None:
        legs.append(euclidean_distance(prev, instance.depot))
    return legs


def trip_cost(instance: Instance, trip: Trip) -> float:
    return math.fsum(trip_legs(instance, trip))


def solution_cost(instance: Instance, solution: Solution | Iterable[Trip]) -> float:
    trips = solution.trips if isinstance(solution, Solution) else solution
    # fsum over every leg makes the total independent of summation order
    return math.fsum(chain.from_iterable(trip_legs(instance, t) for t in trips))


def make_solution(instance: Instance, trips: Iterable[Trip]) -> Solution:
    trips = tuple(trips)
    return Solution(trips, solution_cost(instance, trips))


def trip_load(instance: Instance, trip: Trip) -> int:
    return sum(instance.customer(c).demand for c in trip.visits)


def check_feasible(instance: Instance, solution: Solution,
                   targeted: Iterable[int] | None = None) -> list[Violation]:
    """Return every constraint violation of ``solution``; an empty list means feasible."""
    if targeted is None:
        targeted = [c.id for c in instance.customers]
    targeted = set(targeted)
    out: list[Violation] = []
    counts: dict[int, int] = {}
    for ti, trip in enumerate(solution.trips):
        load = 0
        for cid in trip.visits:
            counts[cid] = counts.get(cid, 0) + 1
            c = instance.by_id.get(cid)
            if c is None:
                out.append(Violation("unknown", f"trip {ti}: unknown customer id {cid}", ti, cid))
                continue
            load += c.demand
        cap = instance.capacity if trip.capacity is None else trip.capacity
        if load > cap:
            out.append(Violation("capacity", f"trip {ti}: load {load} exceeds capacity {cap}", ti))
        if trip.locked > len(trip.visits):
            out.append(Violation("locked", f"trip {ti}: locked prefix longer than trip", ti))
    for cid, k in sorted(counts.items()):
        if k > 1:
            out.append(Violation("duplicate", f"customer {cid} visited {k} times", customer=cid))
        if cid not in targeted and cid in instance.by_id:
            out.append(Violation("unexpected", f"customer {cid} is not targeted", customer=cid))
    for cid in sorted(targeted - counts.keys()):
        out.append(Violation("missing", f"customer {cid} is not served", customer=cid))
    used = solution.vehicles_used
    if len(used) > instance.fleet_size:
        out.append(Violation("fleet", f"{len(used)} vehicles used, fleet has {instance.fleet_size}"))
    return out


def assign_vehicles(trips: Sequence[Trip], fleet_size: int) -> list[Trip]:
    """Give depot trips vehicle ids, keeping anchored trips on their own vehicle.

    Depot trips go round-robin, vehicles without anchored work first, so with
    at most ``fleet_size`` depot trips and no anchors every trip gets its own
    vehicle.
    """
    busy = sorted({t.vehicle_id for t in trips if t.anchored})
    order = [v for v in range(fleet_size) if v not in busy] + busy
    out = []
    k = 0
    for t in trips:
        if t.anchored:
            out.append(t)
        else:
            out.append(Trip(order[k % len(order)], t.visits, None, t.capacity, t.locked))
            k += 1
    return out


# -- JSON ---------------------------------------------------------------------

def instance_from_dict(doc: dict) -> Instance:
    try:
        customers = tuple(
            Customer(int(c["id"]), float(c["x"]), float(c["y"]), int(c["demand"]),
                     float(c.get("release_time", 0.0)))
            for c in doc["customers"]
        )
        depot = doc["depot"]
        if len(depot) != 2:
            raise InstanceFormatError("depot must be [x, y]")
        return Instance((float(depot[0]), float(depot[1])), int(doc["fleet_size"]),
                        int(doc["capacity"]), customers)
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed instance: {exc!r}") from exc


def instance_to_dict(instance: Instance) -> dict:
    return {
        "depot": list(instance.depot),
        "fleet_size": instance.fleet_size,
        "capacity": instance.capacity,
        "customers": [
            {"id": c.id, "x": c.x, "y": c.y, "demand": c.demand, "release_time": c.release_time}
            for c in instance.customers
        ],
    }


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: invalid JSON: {exc}") from exc
    return instance_from_dict(doc)


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n", encoding="utf-8")


def solution_to_dict(solution: Solution) -> dict:
    trips = []
    for t in solution.trips:
        d = {"vehicle_id": t.vehicle_id, "visits": list(t.visits)}
        if t.start is not None:
            d["start"] = list(t.start)
        if t.capacity is not None:
            d["capacity"] = t.capacity
        if t.locked:
            d["locked"] = t.locked
        trips.append(d)
    return {"cost": solution.cost, "trips": trips}


def solution_from_dict(doc: dict) -> Solution:
    try:
        trips = tuple(
            Trip(int(t["vehicle_id"]), tuple(int(v) for v in t["visits"]),
                 tuple(t["start"]) if t.get("start") is not None else None,
                 t.get("capacity"), int(t.get("locked", 0)))
            for t in doc["trips"]
        )
        return Solution(trips, float(doc["cost"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed solution: {exc!r}") from exc

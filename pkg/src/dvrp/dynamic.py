"""Event-driven simulation of the dynamic problem.

Customers are revealed at their release times and every batch of
arrivals triggers a fresh two-stage plan over the pending customers,
built from where the vehicles currently are.

Vehicle semantics:

* travel is at constant ``speed``; service and reload take no time;
* a vehicle heading somewhere keeps going there (its committed stop) and
  is re-planned from the point it has reached, with that stop locked as
  the first visit of its trip;
* a vehicle that runs out of planned work waits where it is while more
  customers may still appear, and drives back to the depot once none can;
* arriving at the depot restores full capacity; a ``reload`` record is
  logged when the vehicle leaves again for more work.
"""

from __future__ import annotations

import bisect
import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .construction import ConstructionMethod, InfeasibleConstructionError, construct
from .improvement import ImprovementBudget, ImprovementConfig, ImprovementMethod, improve
from .model import Customer, Instance, Point, Solution, Trip, check_feasible, euclidean_distance


class AdmissionError(ValueError):
    def __init__(self, message, customer_id=None):
        super().__init__(message)
        self.customer_id = customer_id


@dataclass(frozen=True, order=True)
class ArrivalEvent:
    time: float
    customer_id: int


@dataclass(frozen=True)
class TimelineRecord:
    t: float
    vehicle: int | None
    action: str  # depart | arrive-customer | serve | arrive-depot | reload | reoptimize
    customer: int | None = None

    def to_dict(self) -> dict:
        d = {"t": self.t, "vehicle": self.vehicle, "action": self.action}
        if self.customer is not None:
            d["customer"] = self.customer
        return d


@dataclass
class SimulationTimeline:
    records: list[TimelineRecord] = field(default_factory=list)
    # wall-clock seconds spent in each reoptimization; never part of the
    # simulated clock
    solver_seconds: list[float] = field(default_factory=list)

    def log(self, t, vehicle, action, customer=None):
        self.records.append(TimelineRecord(t, vehicle, action, customer))

    def actions(self, vehicle: int | None = None) -> list[tuple[str, int | None]]:
        return [(r.action, r.customer) for r in self.records
                if vehicle is None or r.vehicle == vehicle]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def write_jsonl(self, fh: TextIO) -> None:
        fh.write(self.to_jsonl())


@dataclass
class VehicleState:
    id: int
    position: Point
    remaining: int
    moving: bool = False
    dest: int | None = None        # committed stop; None is the depot
    origin: Point | None = None
    t_depart: float = 0.0
    t_arrive: float = 0.0
    route: list[int] = field(default_factory=list)   # current trip after ``dest``
    later: list[list[int]] = field(default_factory=list)
    served: list[tuple[float, int]] = field(default_factory=list)

    def committed(self) -> int | None:
        """Customer the vehicle is driving to, if any."""
        return self.dest if self.moving else None

    def position_at(self, t: float) -> Point:
        if not self.moving or self.t_arrive <= self.t_depart:
            return self.position
        f = min(1.0, max(0.0, (t - self.t_depart) / (self.t_arrive - self.t_depart)))
        (x0, y0), (x1, y1) = self.origin, self.position
        return (x0 + (x1 - x0) * f, y0 + (y1 - y0) * f)


@dataclass
class SimulationState:
    instance: Instance
    clock: float = 0.0
    vehicles: list[VehicleState] = field(default_factory=list)
    pending: dict[int, Customer] = field(default_factory=dict)
    served: dict[int, float] = field(default_factory=dict)
    future: list[ArrivalEvent] = field(default_factory=list)
    plan: Solution = field(default_factory=Solution)
    reoptimizations: int = 0
    legs: list[float] = field(default_factory=list)

    @classmethod
    def start(cls, instance: Instance) -> "SimulationState":
        vehicles = [VehicleState(v, instance.depot, instance.capacity) for v in range(instance.fleet_size)]
        future = sorted(ArrivalEvent(c.release_time, c.id) for c in instance.customers)
        return cls(instance, 0.0, vehicles, future=future)

    def at_depot(self, v: VehicleState) -> bool:
        return not v.moving and v.position == self.instance.depot

    def counts(self) -> tuple[int, int, int]:
        return len(self.served), len(self.pending), len(self.future)


def admit_customer(state: SimulationState, customer: Customer) -> SimulationState:
    """Add a newly released customer to the pending set."""
    if customer.id in state.pending or customer.id in state.served:
        raise AdmissionError(f"customer {customer.id} was already admitted", customer.id)
    if customer.demand > state.instance.capacity:
        raise AdmissionError(
            f"customer {customer.id} demand {customer.demand} exceeds vehicle capacity "
            f"{state.instance.capacity}", customer.id)
    if customer.release_time > state.clock:
        raise AdmissionError(f"customer {customer.id} is not released until t={customer.release_time}",
                             customer.id)
    state.pending[customer.id] = customer
    return state


def _seeds(state: SimulationState) -> list[Trip]:
    seeds = []
    depot = state.instance.depot
    for v in state.vehicles:
        if v.moving and v.dest is not None:
            seeds.append(Trip(v.id, (v.dest,), v.position_at(state.clock), v.remaining, 1))
        elif not v.moving and v.position != depot:
            seeds.append(Trip(v.id, (), v.position, v.remaining))
    return seeds


def _two_stage(instance, targeted, seeds, construction, improvement, budget, config, multi_trip):
    sol = construct(instance, construction, targeted, seeds=seeds, enforce_fleet=not multi_trip)
    if improvement is None:
        return sol
    return improve(instance, sol, improvement, budget, config, multi_trip=multi_trip)


def reoptimize(state: SimulationState, construction: ConstructionMethod | str,
               improvement: ImprovementMethod | str | None,
               budget: ImprovementBudget | None = None,
               config: ImprovementConfig | None = None) -> Solution:
    """Re-plan every pending customer from the vehicles' current positions.

    The plan stays within one trip per vehicle when it can, exactly as a
    static solve would; only when that fails do vehicles get extra trips
    through the depot.
    """
    budget = budget or ImprovementBudget()
    budget = budget.with_seed(budget.seed + state.reoptimizations)
    state.reoptimizations += 1
    if not state.pending:
        state.plan = Solution()
        _install(state, state.plan)
        return state.plan
    instance = state.instance
    seeds = _seeds(state)
    locked = {c for s in seeds for c in s.visits}
    targeted = sorted(set(state.pending) - locked)
    try:
        plan = _two_stage(instance, targeted, seeds, construction, improvement, budget, config, False)
    except InfeasibleConstructionError:
        plan = _two_stage(instance, targeted, seeds, construction, improvement, budget, config, True)
    state.plan = plan
    _install(state, plan)
    return plan


def _install(state: SimulationState, plan: Solution) -> None:
    by_vehicle: dict[int, list[Trip]] = {}
    for t in plan.trips:
        by_vehicle.setdefault(t.vehicle_id, []).append(t)
    for v in state.vehicles:
        trips = by_vehicle.get(v.id, [])
        anchored = [t for t in trips if t.anchored]
        fresh = [list(t.visits) for t in trips if not t.anchored and t.visits]
        if anchored:
            visits = list(anchored[0].visits)
            if v.moving and v.dest is not None:
                assert visits and visits[0] == v.dest, "committed stop must stay first"
                visits = visits[1:]
            v.route = visits
        else:
            v.route = []
        v.later = fresh


def _depart(state: SimulationState, v: VehicleState, dest: int | None, timeline: SimulationTimeline,
            speed: float) -> None:
    target = state.instance.depot if dest is None else state.instance.customer(dest).pos
    d = euclidean_distance(v.position, target)
    state.legs.append(d)
    v.origin = v.position
    v.position = target
    v.dest = dest
    v.moving = True
    v.t_depart = state.clock
    v.t_arrive = state.clock + d / speed
    timeline.log(state.clock, v.id, "depart", dest)


def _dispatch(state: SimulationState, v: VehicleState, timeline: SimulationTimeline, speed: float) -> None:
    """Start the next leg of an idle vehicle, if it has one."""
    if v.moving:
        return
    if v.route:
        _depart(state, v, v.route.pop(0), timeline, speed)
        return
    if state.at_depot(v):
        if v.later:
            v.route = v.later.pop(0)
            _depart(state, v, v.route.pop(0), timeline, speed)
        return
    if v.later or not state.future:
        _depart(state, v, None, timeline, speed)


def _arrive(state: SimulationState, v: VehicleState, timeline: SimulationTimeline, speed: float) -> None:
    v.moving = False
    q = state.instance.capacity
    if v.dest is None:
        timeline.log(state.clock, v.id, "arrive-depot")
        v.remaining = q
        if v.later:
            timeline.log(state.clock, v.id, "reload")
    else:
        cid = v.dest
        c = state.instance.customer(cid)
        timeline.log(state.clock, v.id, "arrive-customer", cid)
        v.remaining -= c.demand
        if v.remaining < 0:
            raise AssertionError(f"vehicle {v.id} overloaded at customer {cid}")
        del state.pending[cid]
        state.served[cid] = state.clock
        v.served.append((state.clock, cid))
        timeline.log(state.clock, v.id, "serve", cid)
    v.dest = None
    _dispatch(state, v, timeline, speed)


def run_simulation(instance: Instance, construction: ConstructionMethod | str,
                   improvement: ImprovementMethod | str | None,
                   budget: ImprovementBudget | None = None, speed: float = 1.0,
                   config: ImprovementConfig | None = None, *,
                   validate: bool = False) -> tuple[SimulationTimeline, float]:
    """Replay ``instance`` arrival by arrival; return the timeline and distance driven.

    ``improvement=None`` runs the first stage alone at every re-plan. With
    ``validate`` the plan and the bookkeeping invariants are checked after
    every event.
    """
    if not speed > 0 or math.isinf(speed):
        raise ValueError("speed must be a positive finite number")
    for c in instance.customers:
        if c.demand > instance.capacity:
            raise AdmissionError(
                f"customer {c.id} demand {c.demand} exceeds vehicle capacity {instance.capacity}", c.id)
    construction = ConstructionMethod(construction)
    improvement = None if improvement is None else ImprovementMethod(improvement)
    state = SimulationState.start(instance)
    timeline = SimulationTimeline()
    n = instance.n

    while True:
        moving = [v for v in state.vehicles if v.moving]
        t_v = min((v.t_arrive for v in moving), default=math.inf)
        t_c = state.future[0].time if state.future else math.inf
        if t_v == math.inf and t_c == math.inf:
            break
        if t_v <= t_c:
            # vehicles first at equal times, lowest id first
            v = min((v for v in moving if v.t_arrive == t_v), key=lambda v: v.id)
            state.clock = max(state.clock, t_v)
            _arrive(state, v, timeline, speed)
        else:
            state.clock = t_c
            k = bisect.bisect_right([e.time for e in state.future], t_c)
            batch, state.future = state.future[:k], state.future[k:]
            for e in batch:
                admit_customer(state, instance.customer(e.customer_id))
            timeline.log(state.clock, None, "reoptimize")
            t0 = time.perf_counter()
            reoptimize(state, construction, improvement, budget, config)
            timeline.solver_seconds.append(time.perf_counter() - t0)
            if validate:
                bad = check_feasible(instance, state.plan, state.pending)
                assert not bad, bad
            for v in state.vehicles:
                _dispatch(state, v, timeline, speed)
        if validate:
            _validate(state, n)

    if state.pending:
        raise AssertionError(f"customers left unserved: {sorted(state.pending)}")
    return timeline, math.fsum(state.legs)


def _validate(state: SimulationState, n: int) -> None:
    served, pending, future = state.counts()
    assert served + pending + future == n, (served, pending, future)
    q = state.instance.capacity
    for v in state.vehicles:
        assert 0 <= v.remaining <= q
    planned = [c for v in state.vehicles for c in
               ([v.dest] if v.moving and v.dest is not None else []) + v.route + [x for t in v.later for x in t]]
    assert sorted(planned) == sorted(state.pending), "plan must cover the pending customers exactly"


def timeline_from_jsonl(lines: Iterable[str]) -> SimulationTimeline:
    tl = SimulationTimeline()
    for line in lines:
        if line.strip():
            d = json.loads(line)
            tl.records.append(TimelineRecord(d["t"], d["vehicle"], d["action"], d.get("customer")))
    return tl

"""Second-stage improvement: steepest descent, guided local search,
simulated annealing and tabu search over the shared neighborhood.

Every method tracks the best solution seen on the true objective and
returns it, so the output is never worse than the input.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import Instance, Solution, check_feasible
from .neighborhood import MoveKind, Search


class ImprovementMethod(str, Enum):
    GUIDED_LOCAL_SEARCH = "guided-local-search"
    SIMULATED_ANNEALING = "simulated-annealing"
    TABU_SEARCH = "tabu-search"

    def __str__(self):
        return self.value


class InfeasibleSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class ImprovementBudget:
    """Stopping limits for one improvement call.

    Results are reproducible for a fixed seed only when the iteration or
    stall limits stop the search before the wall clock does.
    """

    time_limit: float | None = 1.0
    max_iters: int | None = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.time_limit is None and self.max_iters is None:
            raise ValueError("budget needs a time limit or an iteration cap")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def with_seed(self, seed: int) -> "ImprovementBudget":
        return ImprovementBudget(self.time_limit, self.max_iters, seed)


@dataclass(frozen=True)
class ImprovementConfig:
    gls_alpha: float = 0.1
    gls_stall: int = 30           # local optima without a new incumbent
    gls_idle: int = 200           # penalty rounds in a row that move nothing
    sa_initial_temp: float = 0.05  # fraction of the starting cost
    sa_cooling: float = 0.98
    sa_cooling_every: int = 100
    sa_stall: int = 4000          # proposals without a new incumbent
    ts_tenure: int | None = None  # None: max(ceil(n / 4), ts_min_tenure)
    ts_min_tenure: int = 5
    ts_revisit_retries: int = 10
    ts_stall: int = 60            # iterations without a new incumbent
    eps: float = 1e-9
    validate: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "ImprovementConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown improvement settings: {sorted(unknown)}")
        return cls(**doc)


DEFAULT_BUDGET = ImprovementBudget()
DEFAULT_CONFIG = ImprovementConfig()


class _Clock:
    def __init__(self, budget: ImprovementBudget):
        self.deadline = None
        if budget.time_limit is not None:
            self.deadline = time.perf_counter() + budget.time_limit
        self.max_iters = budget.max_iters
        self.iters = 0

    def out(self) -> bool:
        if self.max_iters is not None and self.iters >= self.max_iters:
            return True
        return self.deadline is not None and time.perf_counter() >= self.deadline

    def tick(self):
        self.iters += 1


class _Incumbent:
    def __init__(self, search: Search, cfg: ImprovementConfig, targeted):
        self.search = search
        self.cfg = cfg
        self.targeted = targeted
        self.cost = search.cost
        self.routes = search.snapshot()

    def update(self) -> bool:
        s = self.search
        if self.cfg.validate:
            self._validate()
        if s.cost < self.cost - self.cfg.eps:
            self.cost = s.cost
            self.routes = s.snapshot()
            return True
        return False

    def _validate(self):
        s = self.search
        sol = s.solution()
        bad = check_feasible(s.instance, sol, self.targeted)
        assert not bad, bad
        assert abs(sol.cost - s.cost) <= 1e-6 * max(1.0, sol.cost), (sol.cost, s.cost)


def _check_input(instance: Instance, solution: Solution) -> list[int]:
    targeted = solution.customer_ids()
    bad = check_feasible(instance, solution, targeted)
    if bad:
        raise InfeasibleSolutionError("; ".join(v.message for v in bad))
    return targeted


def _descend(search: Search, clock: _Clock, cfg: ImprovementConfig, inc: _Incumbent) -> bool:
    """Best improvement per kind, restarting from the first kind after each move.

    Returns True at a local optimum, False when the budget ran out first.
    """
    while True:
        for kind in MoveKind:
            if clock.out():
                return False
            res = search.best(kind)
            if res is not None and res[0] < -cfg.eps:
                search.apply(res[1])
                clock.tick()
                inc.update()
                break
        else:
            return True


def _guided_local_search(search, clock, cfg, inc):
    arcs = search.node_arcs()
    lam = cfg.gls_alpha * search.cost / max(1, len(arcs))
    if lam <= 0:
        _descend(search, clock, cfg, inc)
        return
    n = len(search.graph)
    penalty = np.zeros((n, n))
    d = search.np_dist
    stall = idle = 0
    last = None
    while _descend(search, clock, cfg, inc):
        if inc.update():
            stall = 0
        # rounds that leave the solution where it was only add penalty, so
        # they count against a separate, looser limit
        here = search.key()
        if here == last:
            idle += 1
        else:
            stall += 1
            idle = 0
        last = here
        if stall > cfg.gls_stall or idle > cfg.gls_idle or clock.out():
            break
        arcs = sorted({(min(a, b), max(a, b)) for a, b in search.node_arcs()})
        utils = [d[a, b] / (1.0 + penalty[a, b]) for a, b in arcs]
        top = max(utils)
        if top <= 0:
            break
        for (a, b), u in zip(arcs, utils):
            if u >= top * (1 - 1e-12):
                penalty[a, b] += 1
                if a != b:
                    penalty[b, a] += 1
        # augmented arc length: d * (1 + lambda * penalty)
        search.set_eval(d + lam * penalty * d)
        clock.tick()
    search.set_eval(None)


def _simulated_annealing(search, clock, cfg, inc, seed):
    rng = random.Random(seed)
    temp = cfg.sa_initial_temp * search.cost
    kinds = list(MoveKind)
    proposals = 0
    stall = 0
    dead = 0
    while not clock.out() and stall < cfg.sa_stall:
        move = search.random_move(rng, kinds[rng.randrange(len(kinds))])
        proposals += 1
        clock.tick()
        if proposals % cfg.sa_cooling_every == 0:
            temp *= cfg.sa_cooling
        stall += 1
        if move is None:
            dead += 1
            if dead > 50 * len(kinds):
                break
            continue
        dead = 0
        if not search.feasible(move):
            continue
        delta = search.delta(move)
        if delta <= 0 or (temp > 0 and rng.random() < math.exp(-delta / temp)):
            search.apply(move, delta)
            if inc.update():
                stall = 0


def _tabu_search(search, clock, cfg, inc):
    n = search.n_customers
    tenure = cfg.ts_tenure if cfg.ts_tenure is not None else max(math.ceil(n / 4), cfg.ts_min_tenure)
    # routes only grow by one padding trip at a time, bounded by n + current
    tabu = np.zeros((len(search.graph), len(search.routes) + n + 2), dtype=np.int64)
    # trip indices shift as trips empty and refill, so attributes alone let
    # the search cycle; never step back into a solution already visited
    seen = {search.key()}
    it = 0
    stall = 0
    while not clock.out() and stall < cfg.ts_stall:
        aspire = inc.cost - search.cost - cfg.eps
        excluded = set()
        moved = False
        for attempt in range(cfg.ts_revisit_retries + 1):
            cand = None
            for kind in MoveKind:
                if clock.out():
                    return
                res = search.best(kind, tabu, it, aspire, excluded)
                if res is not None and (cand is None or res[0] < cand[0]):
                    cand = res
            if cand is None:
                break
            move = cand[1]
            displaced = search.moved(move)
            before = search.save()
            search.apply(move)
            key = search.key()
            # after the retries run out a revisit is accepted; the tabu
            # list then steers the next iterations elsewhere
            if key in seen and attempt < cfg.ts_revisit_retries:
                search.load_state(before)
                excluded.add(move)
                continue
            seen.add(key)
            moved = True
            break
        if not moved:
            break
        it += 1
        for node, src, _ in displaced:
            tabu[node, src] = it + tenure
        clock.tick()
        stall = 0 if inc.update() else stall + 1


def descend(instance: Instance, solution: Solution, budget: ImprovementBudget | None = None,
            config: ImprovementConfig | None = None, *, multi_trip: bool = False) -> Solution:
    """Steepest descent to a local optimum over all five move kinds."""
    return _run(instance, solution, None, budget, config, multi_trip)


def improve(instance: Instance, solution: Solution, method: ImprovementMethod | str,
            budget: ImprovementBudget | None = None, config: ImprovementConfig | None = None,
            *, multi_trip: bool = False) -> Solution:
    """Run ``method`` from ``solution`` and return the best solution found.

    With ``multi_trip`` the search may open more trips than there are
    vehicles (vehicles then run several trips); otherwise the trip count is
    capped at the fleet size.
    """
    return _run(instance, solution, ImprovementMethod(method), budget, config, multi_trip)


def _run(instance, solution, method, budget, config, multi_trip):
    budget = budget or DEFAULT_BUDGET
    cfg = config or DEFAULT_CONFIG
    clock = _Clock(budget)
    targeted = _check_input(instance, solution)
    if clock.out() or len(targeted) == 0:
        return solution
    search = Search(instance, solution.trips,
                    max_trips=None if multi_trip else instance.fleet_size)
    inc = _Incumbent(search, cfg, targeted)
    initial = search.cost
    if method is None:
        _descend(search, clock, cfg, inc)
    elif method is ImprovementMethod.GUIDED_LOCAL_SEARCH:
        _guided_local_search(search, clock, cfg, inc)
    elif method is ImprovementMethod.SIMULATED_ANNEALING:
        _simulated_annealing(search, clock, cfg, inc, budget.seed)
    else:
        _tabu_search(search, clock, cfg, inc)
    inc.update()
    if inc.cost >= initial - cfg.eps:
        return solution
    out = search.solution(inc.routes)
    return out if out.cost < initial else solution

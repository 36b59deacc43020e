"""Instance generation and the construction x improvement portfolio benchmark."""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Sequence

from scipy import stats as _stats

from .construction import ConstructionMethod, InfeasibleConstructionError
from .dynamic import AdmissionError, run_simulation
from .improvement import ImprovementBudget, ImprovementConfig, ImprovementMethod
from .model import Customer, Instance

# seeds of rep k: master + k * REP_STRIDE; reoptimizations inside one rep add
# their index, so the stride keeps reps from sharing seeds
REP_STRIDE = 100_003

CSV_COLUMNS = ["dataset", "static", "dynamic", "avg_cost", "min_cost", "best_combo",
               "baseline_cost", "improvement_pct", "std_dev", "ci95", "reps"]


@dataclass(frozen=True)
class DatasetSpec:
    static: int
    dynamic: int
    seed: int = 0
    coord_range: tuple[float, float] = (0.0, 100.0)
    demand_range: tuple[int, int] = (1, 30)
    horizon: float = 1000.0
    capacity: int = 100
    fleet_size: int = 10

    def __post_init__(self):
        if self.static < 0 or self.dynamic < 0 or self.static + self.dynamic == 0:
            raise ValueError("customer counts must be non-negative and not both zero")
        lo, hi = self.demand_range
        if not 1 <= lo <= hi:
            raise ValueError("demand range must satisfy 1 <= low <= high")
        if hi > self.capacity:
            raise ValueError("largest demand exceeds capacity")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.fleet_size < 1:
            raise ValueError("fleet_size must be >= 1")

    @property
    def name(self) -> str:
        return f"s{self.static}-d{self.dynamic}"


def generate_instance(spec: DatasetSpec) -> Instance:
    """Random instance with the depot at the centre of the coordinate square."""
    rng = random.Random(spec.seed)
    lo, hi = spec.coord_range
    dlo, dhi = spec.demand_range
    custs = []
    for k in range(spec.static + spec.dynamic):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        demand = rng.randint(dlo, dhi)
        release = 0.0
        if k >= spec.static:
            # uniform on (0, horizon]
            release = spec.horizon - rng.random() * spec.horizon
        custs.append(Customer(k + 1, x, y, demand, release))
    centre = ((lo + hi) / 2, (lo + hi) / 2)
    return Instance(centre, spec.fleet_size, spec.capacity, tuple(custs))


def default_datasets(seed: int = 0, **overrides) -> list[DatasetSpec]:
    """The nine static x dynamic size combinations, generator seeds ``seed + index``."""
    sizes = (20, 50, 100)
    return [DatasetSpec(s, d, seed + k, **overrides) for k, (s, d) in enumerate(product(sizes, sizes))]


@dataclass(frozen=True)
class Stats:
    mean: float
    min: float
    std: float | None
    ci95: float | None


def summarize_stats(costs: Sequence[float]) -> Stats:
    """Mean, minimum, sample standard deviation and 95% t-interval half-width."""
    if not costs:
        raise ValueError("need at least one value")
    mean = statistics.fmean(costs)
    if len(costs) < 2:
        return Stats(mean, min(costs), None, None)
    std = statistics.stdev(costs)
    n = len(costs)
    ci = float(_stats.t.ppf(0.975, n - 1)) * std / math.sqrt(n)
    return Stats(mean, min(costs), std, ci)


def improvement_pct(baseline: float, average: float) -> float:
    return 100.0 * (baseline - average) / baseline


def combo_name(construction, improvement) -> str:
    return f"{ConstructionMethod(construction).value}+{ImprovementMethod(improvement).value}"


ALL_COMBOS = sorted(product(ConstructionMethod, ImprovementMethod), key=lambda c: combo_name(*c))


@dataclass
class PortfolioRow:
    dataset: str
    static: int
    dynamic: int
    avg_cost: float
    min_cost: float
    best_combo: str
    baseline_cost: float
    improvement_pct: float
    std_dev: float | None
    ci95: float | None
    reps: int
    combo_costs: dict[str, list[float]] = field(default_factory=dict)
    construction_only: dict[str, float] = field(default_factory=dict)
    excluded: dict[str, str] = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        def f(x):
            return "" if x is None else f"{x:.2f}"
        return [self.dataset, str(self.static), str(self.dynamic), f(self.avg_cost), f(self.min_cost),
                self.best_combo, f(self.baseline_cost), f(self.improvement_pct), f(self.std_dev),
                f(self.ci95), str(self.reps)]


class PortfolioError(RuntimeError):
    pass


def _simulate(args):
    instance, construction, improvement, budget, config, speed = args
    try:
        return run_simulation(instance, construction, improvement, budget, speed, config)[1], None
    except (InfeasibleConstructionError, AdmissionError) as exc:
        return None, str(exc)


def _map(fn, tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps submission order, so output never depends on scheduling
        return list(pool.map(fn, tasks))


def run_portfolio(instance: Instance, reps: int = 10, budget: ImprovementBudget | None = None, *,
                  combos=None, config: ImprovementConfig | None = None, speed: float = 1.0,
                  master_seed: int = 0, jobs: int = 1, dataset: str = "",
                  static: int = 0, dynamic: int = 0) -> PortfolioRow:
    """Simulate every combo ``reps`` times and summarize the best one."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    budget = budget or ImprovementBudget()
    combos = ALL_COMBOS if combos is None else sorted(combos, key=lambda c: combo_name(*c))
    names = [combo_name(*c) for c in combos]
    tasks = [(instance, c, i, budget.with_seed(master_seed + k * REP_STRIDE), config, speed)
             for c, i in combos for k in range(reps)]
    constructions = sorted({ConstructionMethod(c) for c, _ in combos}, key=lambda m: m.value)
    tasks += [(instance, c, None, budget, config, speed) for c in constructions]
    results = _map(_simulate, tasks, jobs)

    combo_costs: dict[str, list[float]] = {}
    excluded: dict[str, str] = {}
    for k, name in enumerate(names):
        runs = results[k * reps:(k + 1) * reps]
        costs = [c for c, _ in runs if c is not None]
        if costs:
            combo_costs[name] = costs
        else:
            excluded[name] = runs[0][1]
    base = dict(zip((m.value for m in constructions), results[len(names) * reps:]))
    construction_only = {m: c for m, (c, _) in base.items() if c is not None}
    if not combo_costs:
        raise PortfolioError(f"every combo failed on {dataset or 'the instance'}: {excluded}")

    def rank(name):
        s = summarize_stats(combo_costs[name])
        return (s.mean, s.min, name)

    best = min(combo_costs, key=rank)
    s = summarize_stats(combo_costs[best])
    baseline = construction_only.get(best.split("+")[0], math.nan)
    return PortfolioRow(dataset, static, dynamic, s.mean, s.min, best, baseline,
                        improvement_pct(baseline, s.mean), s.std, s.ci95, reps,
                        combo_costs, construction_only, excluded)


def run_bench(specs: Sequence[DatasetSpec], reps: int = 10, budget: ImprovementBudget | None = None, *,
              config: ImprovementConfig | None = None, speed: float = 1.0, master_seed: int = 0,
              jobs: int = 1, combos=None) -> tuple[list[PortfolioRow], dict[str, str]]:
    """Run the portfolio on each dataset; returns rows and per-dataset failures."""
    rows, failed = [], {}
    for spec in specs:
        inst = generate_instance(spec)
        try:
            rows.append(run_portfolio(inst, reps, budget, combos=combos, config=config, speed=speed,
                                      master_seed=master_seed, jobs=jobs, dataset=spec.name,
                                      static=spec.static, dynamic=spec.dynamic))
        except PortfolioError as exc:
            failed[spec.name] = str(exc)
    return rows, failed


def report_csv(rows: Sequence[PortfolioRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def report_json(rows: Sequence[PortfolioRow], failed: dict[str, str] | None = None, meta: dict | None = None) -> str:
    doc = {"rows": [asdict(r) for r in rows], "failed": dict(sorted((failed or {}).items()))}
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"

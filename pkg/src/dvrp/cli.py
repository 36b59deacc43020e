"""Command-line entry point: ``dvrp solve|simulate|bench|gen``.

Exit codes: 0 success, 1 internal error, 2 input error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .construction import ConstructionMethod, InfeasibleConstructionError
from .dynamic import AdmissionError, run_simulation
from .harness import (DatasetSpec, default_datasets, generate_instance, report_csv, report_json,
                      run_bench, ALL_COMBOS)
from .improvement import ImprovementBudget, ImprovementConfig, ImprovementMethod
from .model import InstanceFormatError, load_instance, save_instance, solution_to_dict
from .pipeline import solve

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3

DEFAULTS = {
    "construction": "savings",
    "improvement": "tabu-search",
    "time_limit": 1.0,
    "max_iters": 100_000,
    "seed": 0,
    "speed": 1.0,
    "reps": 10,
    "jobs": None,
    "format": None,
    "out": None,
    "ignore_release": False,
    "validate": False,
}


class InputError(Exception):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    return doc


def _settings(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    file_cfg = _load_config(args.config)
    cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "func"):
            cfg[k] = v
    improvement = cfg.get("improvement")
    params = {}
    if isinstance(improvement, dict):
        params = dict(improvement)
        improvement = params.pop("method", DEFAULTS["improvement"])
    try:
        cfg["improvement_config"] = ImprovementConfig.from_dict(params)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad improvement settings: {exc}") from exc
    try:
        cfg["construction"] = ConstructionMethod(cfg["construction"])
        cfg["improvement"] = None if improvement in (None, "none") else ImprovementMethod(improvement)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        cfg["budget"] = ImprovementBudget(
            None if cfg["time_limit"] is None else float(cfg["time_limit"]),
            None if cfg["max_iters"] is None else int(cfg["max_iters"]),
            int(cfg["seed"]))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad budget: {exc}") from exc
    if not float(cfg["speed"]) > 0:
        raise InputError("speed must be positive")
    return cfg


def _instance(cfg):
    if not cfg.get("instance"):
        raise InputError("no instance given (--instance or config key 'instance')")
    return load_instance(cfg["instance"])


def _emit(text: str, out, summary: str) -> None:
    """Write ``text`` to ``out`` (stdout if unset) and the summary line alongside."""
    if out:
        Path(out).write_text(text, encoding="utf-8")
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _label(cfg) -> str:
    imp = cfg["improvement"].value if cfg["improvement"] else "none"
    return f"{cfg['construction'].value}+{imp}"


def cmd_solve(args) -> int:
    cfg = _settings(args)
    inst = _instance(cfg)
    released = [c.id for c in inst.customers if c.release_time > 0]
    if released and not cfg["ignore_release"]:
        raise InputError(f"{len(released)} customers have release times > 0 (first id {released[0]}); "
                         "use simulate, or pass --ignore-release")
    for c in inst.oversized():
        raise InfeasibleConstructionError(
            f"customer {c.id} demand {c.demand} exceeds vehicle capacity {inst.capacity}", c.id)
    t0 = time.perf_counter()
    sol = solve(inst, cfg["construction"], cfg["improvement"], cfg["budget"], cfg["improvement_config"])
    wall = time.perf_counter() - t0
    text = json.dumps(solution_to_dict(sol), indent=2) + "\n"
    _emit(text, cfg["out"], f"cost={sol.cost:.6f} combo={_label(cfg)} trips={len(sol.trips)} wall={wall:.3f}s")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _settings(args)
    inst = _instance(cfg)
    t0 = time.perf_counter()
    timeline, cost = run_simulation(inst, cfg["construction"], cfg["improvement"], cfg["budget"],
                                    float(cfg["speed"]), cfg["improvement_config"], validate=cfg["validate"])
    wall = time.perf_counter() - t0
    reloads = sum(1 for r in timeline.records if r.action == "reload")
    _emit(timeline.to_jsonl(), cfg["out"],
          f"cost={cost:.6f} combo={_label(cfg)} reoptimizations={len(timeline.solver_seconds)} "
          f"reloads={reloads} solver_wall={sum(timeline.solver_seconds):.3f}s wall={wall:.3f}s")
    return EXIT_OK


def _sizes(text):
    try:
        sizes = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise InputError(f"bad --sizes value {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise InputError("sizes must be positive integers")
    return sizes


def _bench_specs(cfg):
    overrides = {k: cfg[k] for k in ("fleet_size", "capacity", "horizon") if cfg.get(k) is not None}
    if cfg.get("datasets"):
        try:
            return [DatasetSpec(**{**overrides, **d}) for d in cfg["datasets"]]
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad dataset spec: {exc}") from exc
    seed = int(cfg.get("dataset_seed") or 0)
    sizes = _sizes(cfg["sizes"]) if cfg.get("sizes") else (20, 50, 100)
    try:
        if tuple(sizes) == (20, 50, 100):
            return default_datasets(seed, **overrides)
        specs = []
        for k, (s, d) in enumerate((s, d) for s in sizes for d in sizes):
            specs.append(DatasetSpec(s, d, seed + k, **overrides))
        return specs
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_bench(args) -> int:
    cfg = _settings(args)
    specs = _bench_specs(cfg)
    reps = int(cfg["reps"])
    if reps < 1:
        raise InputError("reps must be >= 1")
    jobs = cfg["jobs"] if cfg["jobs"] is not None else (os.cpu_count() or 1)
    rows, failed = run_bench(specs, reps, cfg["budget"], config=cfg["improvement_config"],
                             speed=float(cfg["speed"]), master_seed=cfg["budget"].seed, jobs=int(jobs),
                             combos=ALL_COMBOS)
    out = Path(cfg["out"] or ".")
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg["format"]
    meta = {"reps": reps, "seed": cfg["budget"].seed, "time_limit": cfg["budget"].time_limit,
            "max_iters": cfg["budget"].max_iters, "datasets": [s.name for s in specs]}
    if fmt in (None, "csv"):
        (out / "report.csv").write_text(report_csv(rows), encoding="utf-8", newline="\n")
    if fmt in (None, "json"):
        (out / "report.json").write_text(report_json(rows, failed, meta), encoding="utf-8", newline="\n")
    for r in rows:
        print(f"{r.dataset}: avg={r.avg_cost:.2f} best={r.best_combo} baseline={r.baseline_cost:.2f} "
              f"improvement={r.improvement_pct:.2f}%")
    for name, why in failed.items():
        print(f"{name}: FAILED {why}", file=sys.stderr)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_gen(args) -> int:
    cfg = _settings(args)
    extra = {k: cfg[k] for k in ("fleet_size", "capacity", "horizon") if cfg.get(k) is not None}
    try:
        if cfg.get("static") is None and cfg.get("dynamic") is None:
            specs = default_datasets(int(cfg.get("dataset_seed") or cfg["seed"]), **extra)
            out = Path(cfg["out"] or ".")
            out.mkdir(parents=True, exist_ok=True)
            for s in specs:
                save_instance(generate_instance(s), out / f"{s.name}.json")
            print(f"wrote {len(specs)} instances to {out}")
            return EXIT_OK
        spec = DatasetSpec(int(cfg.get("static") or 0), int(cfg.get("dynamic") or 0), int(cfg["seed"]), **extra)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    inst = generate_instance(spec)
    if cfg["out"]:
        save_instance(inst, cfg["out"])
        print(f"wrote {spec.name} ({inst.n} customers) to {cfg['out']}")
    else:
        from .model import instance_to_dict
        sys.stdout.write(json.dumps(instance_to_dict(inst), indent=2) + "\n")
    return EXIT_OK


def _common(p, *, methods=True):
    p.add_argument("--config", help="JSON run-config file; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    if methods:
        p.add_argument("--construction", choices=[m.value for m in ConstructionMethod])
        p.add_argument("--improvement", choices=[m.value for m in ImprovementMethod] + ["none"])
        p.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per improvement call")
        p.add_argument("--max-iters", dest="max_iters", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dvrp", description="Two-stage dynamic vehicle routing toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a static instance")
    _common(p)
    p.add_argument("--instance")
    p.add_argument("--ignore-release", dest="ignore_release", action="store_true", default=None,
                   help="treat every customer as known at time 0")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="replay customer arrivals with re-optimization")
    _common(p)
    p.add_argument("--instance")
    p.add_argument("--speed", type=float)
    p.add_argument("--validate", action="store_true", default=None, help="check invariants after every event")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run the 3x3 method portfolio on the nine datasets")
    _common(p)
    p.add_argument("--reps", type=int)
    p.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    p.add_argument("--format", choices=["csv", "json"], help="write only this report format")
    p.add_argument("--speed", type=float)
    p.add_argument("--sizes", help="comma-separated customer counts for both axes (default 20,50,100)")
    p.add_argument("--dataset-seed", dest="dataset_seed", type=int)
    p.add_argument("--fleet-size", dest="fleet_size", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate instances (the nine defaults unless sizes are given)")
    _common(p, methods=False)
    p.add_argument("--static", type=int)
    p.add_argument("--dynamic", type=int)
    p.add_argument("--fleet-size", dest="fleet_size", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dataset-seed", dest="dataset_seed", type=int)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleConstructionError, AdmissionError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

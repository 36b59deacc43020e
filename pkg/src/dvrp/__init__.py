"""Two-stage construct-then-improve routing with dynamic re-optimization."""

from .construction import ConstructionMethod, InfeasibleConstructionError, construct, savings_list
from .dynamic import AdmissionError, SimulationTimeline, run_simulation
from .improvement import (ImprovementBudget, ImprovementConfig, ImprovementMethod,
                          InfeasibleSolutionError, descend, improve)
from .model import (Customer, Instance, Solution, Trip, check_feasible, euclidean_distance,
                    load_instance, solution_cost, trip_cost)
from .neighborhood import InvalidMoveError, Move, MoveKind, MoveRejected, apply_move
from .pipeline import solve

__all__ = [
    "AdmissionError", "ConstructionMethod", "Customer", "ImprovementBudget", "ImprovementConfig",
    "ImprovementMethod", "InfeasibleConstructionError", "InfeasibleSolutionError", "Instance",
    "InvalidMoveError", "Move", "MoveKind", "MoveRejected", "SimulationTimeline", "Solution", "Trip",
    "apply_move", "check_feasible", "construct", "descend", "euclidean_distance", "improve",
    "load_instance", "run_simulation", "savings_list", "solution_cost", "solve", "trip_cost",
]

"""Two-stage solve: construct a route plan, then improve it."""

from __future__ import annotations

from .construction import ConstructionMethod, construct
from .improvement import ImprovementBudget, ImprovementConfig, ImprovementMethod, improve
from .model import Instance, Solution


def solve(instance: Instance, construction: ConstructionMethod | str,
          improvement: ImprovementMethod | str | None = None,
          budget: ImprovementBudget | None = None, config: ImprovementConfig | None = None,
          *, multi_trip: bool = False) -> Solution:
    """Solve ``instance`` statically, ignoring release times.

    ``improvement=None`` stops after the first stage.
    """
    sol = construct(instance, construction, enforce_fleet=not multi_trip)
    if improvement is None:
        return sol
    return improve(instance, sol, improvement, budget, config, multi_trip=multi_trip)

"""Task allocation: assignment solvers and scoring, allocation search, the
kitchen simulator, scripted coordination episodes and cost accounting."""

from ._core import (
    InstanceTooLarge,
    Kitchen,
    StructuralError,
    allocate,
    brute_force_solve,
    builtin_levels,
    call_cost,
    efficiency,
    feasible,
    generate_instance,
    greedy_row_solve,
    hungarian_solve,
    level,
    parse_candidate_text,
    replay,
    run_episode,
    score_batch,
    utility,
    validate,
)

__all__ = [
    "InstanceTooLarge",
    "Kitchen",
    "StructuralError",
    "allocate",
    "brute_force_solve",
    "builtin_levels",
    "call_cost",
    "efficiency",
    "feasible",
    "generate_instance",
    "greedy_row_solve",
    "hungarian_solve",
    "level",
    "parse_candidate_text",
    "replay",
    "run_episode",
    "score_batch",
    "utility",
    "validate",
]

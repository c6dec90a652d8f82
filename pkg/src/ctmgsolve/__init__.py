"""Time-bounded reachability for continuous-time Markov decision processes
and two-player continuous-time Markov games.

Computes optimal (and co-optimal) values and finite cylindrical deterministic
schedulers by backward integration of the optimality equations, with a
compiled kernel and a pure-Python fallback, plus independent verification
oracles (explicit-Euler dynamic programming, truncated uniformization,
positional enumeration, Monte Carlo simulation, and a scheduler metric).
"""

from ._backend import active_backend
from .errors import (
    ArtifactError,
    CapExceededError,
    DomainError,
    GameObjectiveError,
    InvalidModelError,
    ModelError,
    ModelSemanticError,
    ModelSyntaxError,
    MultiPlayerError,
    NotUniformError,
    RateTooLowError,
    SchedulerError,
)
from .format import (
    parse_model,
    read_scheduler_artifact,
    serialize_model,
    write_scheduler_artifact,
    write_value_curve,
)
from .model import (
    CtmgModel,
    ValidationReport,
    Violation,
    build_model,
    discrete_depth,
    enabled_actions,
    exit_rate,
    validate,
)
from .solver import (
    CylindricalScheduler,
    NashReport,
    PositionalProfile,
    SolveOptions,
    SolveResult,
    ValueFunction,
    check_nash,
    evaluate_scheduler,
    gain,
    local_improvement,
    solve,
)
from .transform import early_to_late, is_uniform, late_to_early, make_simple, uniformise
from .verify import (
    SimResult,
    ValueBounds,
    enumerate_positional,
    grid_oracle,
    poisson_step_bound,
    scheduler_distance,
    simulate,
    truncated_uniformization_value,
)

__version__ = "0.1.0"

__all__ = [
    "CtmgModel", "ValidationReport", "Violation", "build_model", "validate",
    "enabled_actions", "exit_rate", "discrete_depth",
    "parse_model", "serialize_model", "read_scheduler_artifact",
    "write_scheduler_artifact", "write_value_curve",
    "SolveOptions", "SolveResult", "ValueFunction", "CylindricalScheduler",
    "PositionalProfile", "NashReport", "solve", "evaluate_scheduler", "gain",
    "local_improvement", "check_nash",
    "early_to_late", "late_to_early", "make_simple", "uniformise", "is_uniform",
    "ValueBounds", "SimResult", "poisson_step_bound",
    "truncated_uniformization_value", "grid_oracle", "enumerate_positional",
    "simulate", "scheduler_distance",
    "active_backend",
    "DomainError", "ModelError", "InvalidModelError", "ModelSyntaxError",
    "ModelSemanticError", "ArtifactError", "NotUniformError", "MultiPlayerError",
    "RateTooLowError", "CapExceededError", "GameObjectiveError", "SchedulerError",
]

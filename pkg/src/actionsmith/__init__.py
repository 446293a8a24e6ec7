"""Agent runtime whose actions are Python functions it defines, accumulates,
and retrieves."""

from .core import (
    ActionRecord,
    Origin,
    Phase,
    RunConfig,
    RunFlags,
    Step,
    StepStatus,
    TaskSpec,
    Trajectory,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "ActionRecord",
    "Origin",
    "Phase",
    "RunConfig",
    "RunFlags",
    "Step",
    "StepStatus",
    "TaskSpec",
    "Trajectory",
    "validate_config",
    "__version__",
]

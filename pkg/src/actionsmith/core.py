"""Shared domain types for the agent runtime.

Immutable value objects passed between the gateway, registry, executor,
orchestrator, and metrics layers. Every type round-trips through plain
dicts (``to_dict`` / ``from_dict``) so trajectory logs and library files
stay diffable. No I/O happens in this module.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any

from .errors import ConfigError

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def utc_now_iso() -> str:
    """Current UTC time as ISO-8601 with seconds resolution."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def is_identifier(name: str) -> bool:
    return bool(_IDENTIFIER_RE.match(name))


class Origin(str, enum.Enum):
    HUMAN = "human"
    GENERATED = "generated"


class StepStatus(str, enum.Enum):
    OK = "ok"
    EXEC_ERROR = "exec_error"
    PARSE_ERROR = "parse_error"
    TIMEOUT = "timeout"
    # Recorded when generation is disabled and the model tried to define a
    # function or call something outside the human action set; nothing runs.
    POLICY_VIOLATION = "policy_violation"


class Phase(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class TaskSpec:
    """One task: a question, optional file attachments, optional label."""

    task_id: str
    question: str
    attachments: tuple[str, ...] = ()
    expected_answer: str | None = None
    level: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "question": self.question,
            "attachments": list(self.attachments),
            "expected_answer": self.expected_answer,
            "level": self.level,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TaskSpec":
        return cls(
            task_id=data["task_id"],
            question=data["question"],
            attachments=tuple(data.get("attachments") or ()),
            expected_answer=data.get("expected_answer"),
            level=data.get("level"),
        )


@dataclass(frozen=True)
class ActionRecord:
    """A named, documented function in the action library."""

    name: str
    docstring: str
    source: str
    origin: Origin
    created_by_task: str | None = None
    created_at: str = field(default_factory=utc_now_iso)
    embedding: tuple[float, ...] | None = None
    complexity: int | None = None

    def validate(self) -> None:
        """Raise ValueError on any violated record invariant."""
        if not is_identifier(self.name):
            raise ValueError(f"action name {self.name!r} is not a valid identifier")
        if not self.source.strip():
            raise ValueError(f"action {self.name!r} has empty source")
        if self.origin is Origin.GENERATED and not self.docstring.strip():
            raise ValueError(f"generated action {self.name!r} has no docstring")
        if self.complexity is not None and self.complexity < 1:
            raise ValueError(f"action {self.name!r} has non-positive complexity")
        if self.embedding is not None:
            norm = math.sqrt(sum(v * v for v in self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"embedding of {self.name!r} is not unit length (norm={norm})")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "docstring": self.docstring,
            "source": self.source,
            "origin": self.origin.value,
            "created_by_task": self.created_by_task,
            "created_at": self.created_at,
            "complexity": self.complexity,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ActionRecord":
        return cls(
            name=data["name"],
            docstring=data.get("docstring", ""),
            source=data["source"],
            origin=Origin(data["origin"]),
            created_by_task=data.get("created_by_task"),
            created_at=data.get("created_at", utc_now_iso()),
            embedding=tuple(data["embedding"]) if data.get("embedding") else None,
            complexity=data.get("complexity"),
        )


@dataclass(frozen=True)
class Step:
    """One loop iteration: thought, action code, and what came back."""

    index: int
    thought: str
    code: str
    observation: str
    status: StepStatus
    defined_functions: tuple[ActionRecord, ...] = ()
    is_novel: bool = False
    final_answer: str | None = None

    def __post_init__(self) -> None:
        if self.status is not StepStatus.OK and self.defined_functions:
            raise ValueError("defined_functions must be empty unless the step succeeded")

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "thought": self.thought,
            "code": self.code,
            "observation": self.observation,
            "status": self.status.value,
            "defined_functions": [r.to_dict() for r in self.defined_functions],
            "is_novel": self.is_novel,
            "final_answer": self.final_answer,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Step":
        return cls(
            index=data["index"],
            thought=data["thought"],
            code=data.get("code", ""),
            observation=data["observation"],
            status=StepStatus(data["status"]),
            defined_functions=tuple(
                ActionRecord.from_dict(r) for r in data.get("defined_functions", ())
            ),
            is_novel=data.get("is_novel", False),
            final_answer=data.get("final_answer"),
        )


@dataclass(frozen=True)
class RunFlags:
    """The three ablation switches."""

    accumulate: bool = True
    allow_generation: bool = True
    load_initial_actions: bool = True

    def to_dict(self) -> dict[str, bool]:
        return {
            "accumulate": self.accumulate,
            "allow_generation": self.allow_generation,
            "load_initial_actions": self.load_initial_actions,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunFlags":
        return cls(
            accumulate=data.get("accumulate", True),
            allow_generation=data.get("allow_generation", True),
            load_initial_actions=data.get("load_initial_actions", True),
        )


@dataclass(frozen=True)
class RunConfig:
    """Loop limits, sampling settings, and ablation flags for one run."""

    max_steps: int = 20
    temperature: float = 0.5
    retrieval_k: int = 10
    flags: RunFlags = field(default_factory=RunFlags)
    phase: Phase = Phase.TRAIN
    step_timeout_s: int = 120
    observation_limit_chars: int = 8192

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_steps": self.max_steps,
            "temperature": self.temperature,
            "retrieval_k": self.retrieval_k,
            "flags": self.flags.to_dict(),
            "phase": self.phase.value,
            "step_timeout_s": self.step_timeout_s,
            "observation_limit_chars": self.observation_limit_chars,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        return cls(
            max_steps=data.get("max_steps", 20),
            temperature=data.get("temperature", 0.5),
            retrieval_k=data.get("retrieval_k", 10),
            flags=RunFlags.from_dict(data.get("flags", {})),
            phase=Phase(data.get("phase", "train")),
            step_timeout_s=data.get("step_timeout_s", 120),
            observation_limit_chars=data.get("observation_limit_chars", 8192),
        )


@dataclass(frozen=True)
class Trajectory:
    """The ordered steps taken on one task, plus its terminal answer."""

    task_id: str
    steps: tuple[Step, ...]
    final_answer: str | None
    success: bool | None
    config_snapshot: RunConfig

    def validate(self) -> None:
        """Raise ValueError on any violated trajectory invariant."""
        if len(self.steps) > self.config_snapshot.max_steps:
            raise ValueError("trajectory exceeds max_steps")
        answered = [s for s in self.steps if s.final_answer is not None]
        if len(answered) > 1:
            raise ValueError("more than one step carries a final answer")
        if answered and answered[0] is not self.steps[-1]:
            raise ValueError("the final answer must come from the last step")

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "steps": [s.to_dict() for s in self.steps],
            "final_answer": self.final_answer,
            "success": self.success,
            "config_snapshot": self.config_snapshot.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Trajectory":
        return cls(
            task_id=data["task_id"],
            steps=tuple(Step.from_dict(s) for s in data["steps"]),
            final_answer=data.get("final_answer"),
            success=data.get("success"),
            config_snapshot=RunConfig.from_dict(data["config_snapshot"]),
        )


def validate_config(cfg: RunConfig) -> RunConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError."""
    if cfg.max_steps < 1:
        raise ConfigError(f"max_steps must be positive, got {cfg.max_steps}")
    if not 0.0 <= cfg.temperature <= 2.0:
        raise ConfigError(f"temperature must be in [0, 2], got {cfg.temperature}")
    if cfg.retrieval_k < 1:
        raise ConfigError(f"retrieval_k must be positive, got {cfg.retrieval_k}")
    if cfg.step_timeout_s < 1:
        raise ConfigError(f"step_timeout_s must be positive, got {cfg.step_timeout_s}")
    if cfg.observation_limit_chars < 1:
        raise ConfigError(
            f"observation_limit_chars must be positive, got {cfg.observation_limit_chars}"
        )
    if not cfg.flags.allow_generation and cfg.flags.accumulate:
        raise ConfigError("accumulate requires allow_generation (nothing new can be implemented)")
    return cfg


def mark_novelty(step: Step, start_action_names: frozenset[str] | set[str]) -> Step:
    """Return ``step`` with is_novel set from its defined names and the start set.

    Pure function: a step is novel iff it defined at least one function whose
    name was absent from the action set frozen at trajectory start.
    """
    novel = any(r.name not in start_action_names for r in step.defined_functions)
    return replace(step, is_novel=novel)

"""The think-act-observe loop.

One call to :func:`run_task` drives one trajectory: assemble the prompt,
sample a thought-action pair, execute the action, record the observation,
accumulate new documented functions (train phase), and stop at the terminal
action or the step cap. The three ablation flags gate accumulation,
arbitrary code execution, and the initial human action set.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import metrics
from .core import (
    ActionRecord,
    Origin,
    Phase,
    RunConfig,
    Step,
    StepStatus,
    TaskSpec,
    Trajectory,
    mark_novelty,
    utc_now_iso,
    validate_config,
)
from .errors import ProviderError, TranscriptExhausted
from .executor import ExecResult, to_observation
from .gateway import ChatMessage, Role, build_system_prompt, parse_response
from .registry import ActionLibrary
from .retrieval import EmbeddingIndex, retrieve

logger = logging.getLogger(__name__)

PARSE_ERROR_OBSERVATION = "No code block found. Respond with one fenced code block."
POLICY_VIOLATION_OBSERVATION = (
    "Action implementation is disabled. Call only the provided actions; "
    "do not define functions or call anything else."
)
NO_OUTPUT_OBSERVATION = "(no output)"
PROVIDER_RETRIES = 3
BACKOFF_SCHEDULE_S = (1.0, 2.0, 4.0)


@dataclass
class LoopState:
    """Mutable state of one running trajectory."""

    task: TaskSpec
    config: RunConfig
    start_action_names: frozenset[str]
    history: list[Step] = field(default_factory=list)
    session: Any = None


def _task_message(task: TaskSpec) -> str:
    lines = [f"Task: {task.question}"]
    if task.attachments:
        lines.append("Attached files:")
        lines.extend(f"- {Path(p).resolve()}" for p in task.attachments)
    else:
        lines.append("Attached files: none")
    return "\n".join(lines)


def _assistant_content(step: Step) -> str:
    if step.status is StepStatus.PARSE_ERROR:
        return step.thought
    if step.thought:
        return f"{step.thought}\n\n```python\n{step.code}\n```"
    return f"```python\n{step.code}\n```"


def build_messages(state: LoopState, system_prompt: str) -> list[ChatMessage]:
    """System prompt, task, then the full alternating step history."""
    messages = [
        ChatMessage(Role.SYSTEM, system_prompt),
        ChatMessage(Role.USER, _task_message(state.task)),
    ]
    for step in state.history:
        messages.append(ChatMessage(Role.ASSISTANT, _assistant_content(step)))
        messages.append(ChatMessage(Role.USER, step.observation))
    return messages


def _complete_with_retry(provider, messages, task_id: str, step_index: int, sleep) -> str:
    last_error: ProviderError | None = None
    for attempt in range(PROVIDER_RETRIES + 1):
        try:
            return provider.complete(messages, task_id=task_id, step=step_index)
        except TranscriptExhausted:
            raise
        except ProviderError as exc:
            last_error = exc
            if attempt < PROVIDER_RETRIES:
                sleep(BACKOFF_SCHEDULE_S[attempt])
    raise last_error


def violates_generation_policy(session, code: str, human_names: frozenset[str]) -> bool:
    """AI-off check: any function definition, or any call outside the human set.

    Uses the kernel's analyze op so detection matches what would actually
    run. Unanalyzable code is not a policy violation; executing it will
    produce the error the agent needs to see.
    """
    result = session.analyze(code)
    if not result.ok:
        return False
    if result.has_function_def or result.defined_functions:
        return True
    return any(target not in human_names for target in result.calls)


def _records_from_result(result: ExecResult, task_id: str) -> tuple[ActionRecord, ...]:
    records = []
    for item in result.defined_functions:
        records.append(
            ActionRecord(
                name=item["name"],
                docstring=item.get("docstring", ""),
                source=item["source"],
                origin=Origin.GENERATED,
                created_by_task=task_id,
                created_at=utc_now_iso(),
                complexity=item.get("complexity"),
            )
        )
    return tuple(records)


def _status_for(result: ExecResult) -> StepStatus:
    if result.ok:
        return StepStatus.OK
    if result.error and result.error.get("type") == "Timeout":
        return StepStatus.TIMEOUT
    return StepStatus.EXEC_ERROR


def handle_retrieval_callback(
    query: str,
    k: int | None,
    library: ActionLibrary,
    index: EmbeddingIndex,
    config: RunConfig,
) -> list[dict]:
    """Serve a kernel retrieval callback; results get loaded kernel-side."""
    effective_k = k if k is not None else config.retrieval_k
    pairs = retrieve(index, library.generated_actions, query, effective_k)
    return [
        {
            "name": record.name,
            "docstring": record.docstring,
            "source": record.source,
            "score": score,
        }
        for record, score in pairs
    ]


def make_callback_handler(
    library: ActionLibrary, index: EmbeddingIndex, config: RunConfig
) -> Callable[[str, int | None], list[dict]]:
    def handler(query: str, k: int | None) -> list[dict]:
        return handle_retrieval_callback(query, k, library, index, config)

    return handler


def run_task(
    task: TaskSpec,
    config: RunConfig,
    library: ActionLibrary,
    provider,
    session,
    index: EmbeddingIndex | None = None,
    *,
    scorer: Callable[[str, str], bool] = metrics.score_answer,
    sleep: Callable[[float], None] = time.sleep,
    log_path: str | Path | None = None,
) -> Trajectory:
    """Run one task to completion and return (and optionally log) its trajectory."""
    validate_config(config)
    accumulating = (
        config.flags.accumulate and config.phase is Phase.TRAIN and not library.frozen
    )
    state = LoopState(
        task=task,
        config=config,
        start_action_names=library.snapshot_names(),
        session=session,
    )
    system_prompt = build_system_prompt(library.human_actions)
    human_names = library.human_names()

    session.reset()
    attachments = tuple(str(Path(p).resolve()) for p in task.attachments)
    session.load(f"TASK_ATTACHMENTS = {attachments!r}")

    aborted: str | None = None
    final_answer: str | None = None
    for step_index in range(1, config.max_steps + 1):
        messages = build_messages(state, system_prompt)
        try:
            response = _complete_with_retry(provider, messages, task.task_id, step_index, sleep)
        except (ProviderError, TranscriptExhausted) as exc:
            aborted = f"{type(exc).__name__}: {exc}"
            logger.warning("task %s aborted at step %d: %s", task.task_id, step_index, aborted)
            break

        parsed = parse_response(response)
        if parsed.code is None:
            step = Step(
                index=step_index,
                thought=parsed.thought,
                code="",
                observation=PARSE_ERROR_OBSERVATION,
                status=StepStatus.PARSE_ERROR,
            )
        elif not config.flags.allow_generation and violates_generation_policy(
            session, parsed.code, human_names
        ):
            step = Step(
                index=step_index,
                thought=parsed.thought,
                code=parsed.code,
                observation=POLICY_VIOLATION_OBSERVATION,
                status=StepStatus.POLICY_VIOLATION,
            )
        else:
            result = session.execute(parsed.code, config.step_timeout_s)
            status = _status_for(result)
            observation = to_observation(result, config.observation_limit_chars)
            step = Step(
                index=step_index,
                thought=parsed.thought,
                code=parsed.code,
                observation=observation or NO_OUTPUT_OBSERVATION,
                status=status,
                defined_functions=(
                    _records_from_result(result, task.task_id) if result.ok else ()
                ),
                final_answer=result.final_answer,
            )

        step = mark_novelty(step, state.start_action_names)
        state.history.append(step)

        if step.status is StepStatus.OK and accumulating:
            accepted = library.accumulate(step, task.task_id)
            if index is not None:
                for record in accepted:
                    try:
                        index.index_action(record)
                    except ProviderError as exc:
                        logger.warning("indexing %s deferred: %s", record.name, exc)

        if step.final_answer is not None:
            final_answer = step.final_answer
            break

    success: bool | None = None
    if task.expected_answer is not None:
        success = bool(final_answer) and scorer(final_answer, task.expected_answer)

    trajectory = Trajectory(
        task_id=task.task_id,
        steps=tuple(state.history),
        final_answer=final_answer,
        success=success,
        config_snapshot=config,
    )
    trajectory.validate()
    if log_path is not None:
        write_trajectory_log(trajectory, state.start_action_names, log_path, aborted=aborted)
    return trajectory


def write_trajectory_log(
    trajectory: Trajectory,
    start_action_names: frozenset[str],
    log_path: str | Path,
    aborted: str | None = None,
) -> None:
    """One file per task: Step records, then a trailing summary object."""
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(step.to_dict(), ensure_ascii=False, sort_keys=True)
        for step in trajectory.steps
    ]
    summary = {
        "task_id": trajectory.task_id,
        "final_answer": trajectory.final_answer,
        "success": trajectory.success,
        "steps": len(trajectory.steps),
        "novel_steps": sum(1 for s in trajectory.steps if s.is_novel),
        "start_action_names": sorted(start_action_names),
        "aborted": aborted,
        "config_snapshot": trajectory.config_snapshot.to_dict(),
    }
    lines.append(json.dumps(summary, ensure_ascii=False, sort_keys=True))
    log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

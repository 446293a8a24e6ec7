"""Post-hoc analytics: action coverage, complexity aggregates, answer scoring.

Everything here is a pure function over trajectories or library records;
report emission (JSON/CSV under ``run_dir/reports``) lives in the harness.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

from .analysis import cyclomatic_complexity
from .core import ActionRecord, Trajectory
from .errors import AnalysisError, MissingLabel

_STRIP_CHARS_RE = re.compile(r"[,%$€£¥]")
_LIST_SPLIT_RE = re.compile(r"[,;]")


# ---------------------------------------------------------------------------
# Action coverage
# ---------------------------------------------------------------------------


def novel_step_count(steps: Sequence, start_action_names: Iterable[str]) -> int:
    """Steps that defined at least one name absent from the start set.

    Recomputed from the defined-function names, not from stored flags, so
    coverage can be re-evaluated against enlarged action sets after the run.
    """
    start = frozenset(start_action_names)
    count = 0
    for step in steps:
        names = [r.name for r in getattr(step, "defined_functions", ())]
        if any(name not in start for name in names):
            count += 1
    return count


def coverage_of_trajectory(traj: Trajectory, start_action_names: Iterable[str]) -> dict:
    """Per-task coverage against the given start action set.

    ``coverage`` is the success-conditioned value: 1 - novel/steps when the
    task succeeded, None otherwise. ``coverage_literal`` follows the printed
    formula exactly, where the success indicator zeroes the subtracted term,
    so every failed trajectory scores 1.0.
    """
    if not traj.steps:
        raise ValueError("trajectory has no steps")
    if traj.success is None:
        raise MissingLabel(f"task {traj.task_id} has no ground-truth answer")
    steps = len(traj.steps)
    novel = novel_step_count(traj.steps, start_action_names)
    literal = 1.0 - (novel / steps if traj.success else 0.0)
    return {
        "coverage": 1.0 - novel / steps if traj.success else None,
        "coverage_literal": literal,
        "success": traj.success,
        "steps": steps,
        "novel_steps": novel,
    }


def coverage_report(
    entries: Mapping[str, dict], action_set_size: int | None = None
) -> dict:
    """Aggregate per-task coverage entries into one report.

    ``entries`` maps task_id to the dict returned by
    :func:`coverage_of_trajectory`. The success-conditioned mean averages
    only successful tasks; the literal mean averages everything.
    """
    successful = [e["coverage"] for e in entries.values() if e["success"]]
    literals = [e["coverage_literal"] for e in entries.values()]
    return {
        "per_task": {task_id: dict(entry) for task_id, entry in sorted(entries.items())},
        "mean_success_conditioned": (
            sum(successful) / len(successful) if successful else None
        ),
        "mean_literal": sum(literals) / len(literals) if literals else None,
        "action_set_size": action_set_size,
        "tasks": len(entries),
        "successes": sum(1 for e in entries.values() if e["success"]),
    }


def coverage_curve(rows: Iterable[tuple[int, dict]]) -> list[tuple[int, float]]:
    """(action_set_size, per-task entry) pairs -> mean coverage per set size.

    Uses the success-conditioned coverage; sizes with no successful task are
    omitted. Returned sorted by size ascending.
    """
    by_size: dict[int, list[float]] = {}
    for size, entry in rows:
        if entry["success"]:
            by_size.setdefault(size, []).append(entry["coverage"])
    return [(size, sum(vals) / len(vals)) for size, vals in sorted(by_size.items())]


# ---------------------------------------------------------------------------
# Answer scoring
# ---------------------------------------------------------------------------


def _as_number(text: str) -> float | None:
    """Parse after stripping commas, currency, and percent signs; NaN rejected."""
    cleaned = _STRIP_CHARS_RE.sub("", text.strip())
    if not cleaned:
        return None
    try:
        value = float(cleaned)
    except ValueError:
        return None
    if math.isnan(value):
        return None
    return value


def _split_elements(text: str) -> list[str]:
    return [part.strip() for part in _LIST_SPLIT_RE.split(text)]


def _element_match(predicted: str, expected: str) -> bool:
    p_num, e_num = _as_number(predicted), _as_number(expected)
    if p_num is not None and e_num is not None:
        return p_num == e_num
    return predicted.lower() == expected.lower()


def score_answer(predicted: str, expected: str) -> bool:
    """Exact match after normalization.

    Trim whitespace; numbers compare numerically (commas, currency, and
    percent signs stripped); expected answers containing comma or semicolon
    separators compare element-wise; everything else compares
    case-insensitively. An empty prediction never matches.
    """
    predicted = (predicted or "").strip()
    expected = (expected or "").strip()
    if not predicted or not expected:
        return False
    p_num, e_num = _as_number(predicted), _as_number(expected)
    if p_num is not None and e_num is not None:
        return p_num == e_num
    if _LIST_SPLIT_RE.search(expected):
        predicted_parts = _split_elements(predicted)
        expected_parts = _split_elements(expected)
        if len(predicted_parts) != len(expected_parts):
            return False
        return all(_element_match(p, e) for p, e in zip(predicted_parts, expected_parts))
    return predicted.lower() == expected.lower()


# ---------------------------------------------------------------------------
# Complexity aggregates
# ---------------------------------------------------------------------------


def complexity_summary(records: Iterable[ActionRecord], analyzer=cyclomatic_complexity) -> dict:
    """Mean, integer histogram, and per-origin means of record complexity.

    Records without a stored complexity are analyzed lazily from source;
    unparseable ones are excluded and counted.
    """
    values: list[tuple[str, int]] = []
    errors: list[str] = []
    for record in records:
        complexity = record.complexity
        if complexity is None:
            try:
                complexity = analyzer(record.source)
            except AnalysisError as exc:
                errors.append(f"{record.name}: {exc}")
                continue
        values.append((record.origin.value, complexity))

    histogram: dict[int, int] = {}
    for _, complexity in values:
        histogram[complexity] = histogram.get(complexity, 0) + 1

    by_origin: dict[str, float] = {}
    for origin in sorted({origin for origin, _ in values}):
        origin_values = [c for o, c in values if o == origin]
        by_origin[origin] = sum(origin_values) / len(origin_values)

    return {
        "mean": sum(c for _, c in values) / len(values) if values else None,
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
        "by_origin": by_origin,
        "analyzed": len(values),
        "unparseable": errors,
    }

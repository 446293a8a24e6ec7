"""Dataset ingestion, train/test phase execution, and report generation.

The programmatic counterpart of the CLI: everything the commands do is
callable from here, which is also how the test suite drives full runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics
from .core import Phase, RunConfig, TaskSpec, Trajectory, validate_config
from .errors import DatasetError, StorageError
from .executor import KernelSession, MockExecutor
from .gateway import ProviderConfig, make_provider
from .orchestrator import make_callback_handler, run_task
from .registry import ActionLibrary, load_initial_actions
from .retrieval import DeterministicEmbedder, EmbeddingIndex, RemoteEmbedder

logger = logging.getLogger(__name__)

DEFAULT_WORKER_CMD = [sys.executable, "-m", "actionsmith_worker"]


@dataclass(frozen=True)
class Dataset:
    """An ordered list of tasks parsed from a JSONL file."""

    path: str
    tasks: tuple[TaskSpec, ...]


@dataclass(frozen=True)
class ExecutorSettings:
    """How task sessions are created: in-process mock or kernel worker."""

    use_mock: bool = True
    worker_cmd: tuple[str, ...] = tuple(DEFAULT_WORKER_CMD)


@dataclass(frozen=True)
class EmbedderSettings:
    kind: str = "deterministic"  # "deterministic" | "remote"
    endpoint_url: str | None = None
    model_name: str = ""


@dataclass
class RunResult:
    run_dir: Path
    trajectories: list[Trajectory] = field(default_factory=list)
    library_size_before: int = 0
    library_size_after: int = 0


def load_dataset(path: str | Path) -> Dataset:
    """Parse a newline-delimited JSON task file.

    Required fields per line: task_id, question. Relative attachment paths
    resolve against the dataset file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    base = path.parent
    tasks: list[TaskSpec] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except ValueError as exc:
            raise DatasetError(f"invalid JSON: {exc}", line=lineno) from exc
        if not isinstance(data, dict):
            raise DatasetError("task line must be a JSON object", line=lineno)
        for required in ("task_id", "question"):
            if not data.get(required):
                raise DatasetError(f"missing required field {required!r}", line=lineno)
        if data["task_id"] in seen:
            raise DatasetError(f"duplicate task_id {data['task_id']!r}", line=lineno)
        seen.add(data["task_id"])
        attachments = tuple(
            str((base / a).resolve()) if not Path(a).is_absolute() else a
            for a in data.get("attachments") or ()
        )
        tasks.append(
            TaskSpec(
                task_id=data["task_id"],
                question=data["question"],
                attachments=attachments,
                expected_answer=data.get("expected_answer"),
                level=data.get("level"),
            )
        )
    return Dataset(path=str(path), tasks=tuple(tasks))


def check_attachments(dataset: Dataset) -> None:
    """Every attachment must exist on disk before the run starts."""
    for task in dataset.tasks:
        for attachment in task.attachments:
            if not Path(attachment).exists():
                raise DatasetError(
                    f"task {task.task_id!r}: attachment not found: {attachment}"
                )


def make_embedder(settings: EmbedderSettings):
    if settings.kind == "remote":
        if not settings.endpoint_url:
            raise StorageError("remote embedder requires an endpoint URL")
        return RemoteEmbedder(settings.endpoint_url, settings.model_name)
    return DeterministicEmbedder()


def _make_session(settings: ExecutorSettings, library: ActionLibrary, callback_handler):
    if settings.use_mock:
        return MockExecutor(library.human_actions, callback_handler=callback_handler)
    return KernelSession(
        list(settings.worker_cmd), library.human_actions, callback_handler=callback_handler
    )


def run_phase(
    dataset: Dataset,
    config: RunConfig,
    library_dir: str | Path,
    run_dir: str | Path,
    provider_cfg: ProviderConfig,
    executor_settings: ExecutorSettings = ExecutorSettings(),
    embedder_settings: EmbedderSettings = EmbedderSettings(),
    parallel: int = 1,
    sleep=None,
) -> RunResult:
    """Run every task in the dataset under the given phase.

    Train: library thawed, accumulation on (subject to flags), frozen and
    flushed at the end. Test: library frozen in memory before the first
    task; nothing under ``library_dir`` is written.
    """
    validate_config(config)
    check_attachments(dataset)
    run_dir = Path(run_dir)
    (run_dir / "trajectories").mkdir(parents=True, exist_ok=True)

    library = load_initial_actions(library_dir, enable=config.flags.load_initial_actions)
    index_path = Path(library_dir) / "index" / "embeddings.jsonl"
    index = EmbeddingIndex.open(index_path, make_embedder(embedder_settings))

    if config.phase is Phase.TEST:
        library.freeze(persist=False)
    else:
        library.thaw()

    provider = make_provider(provider_cfg)
    callback_handler = make_callback_handler(library, index, config)
    result = RunResult(run_dir=run_dir, library_size_before=len(library.generated_actions))

    run_kwargs = {}
    if sleep is not None:
        run_kwargs["sleep"] = sleep

    def _run_one(task: TaskSpec) -> Trajectory:
        session = _make_session(executor_settings, library, callback_handler)
        try:
            return run_task(
                task,
                config,
                library,
                provider,
                session,
                index,
                log_path=run_dir / "trajectories" / f"{task.task_id}.jsonl",
                **run_kwargs,
            )
        finally:
            session.close()

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            result.trajectories = list(pool.map(_run_one, dataset.tasks))
    else:
        result.trajectories = [_run_one(task) for task in dataset.tasks]

    if config.phase is Phase.TRAIN:
        library.freeze(persist=True)
    result.library_size_after = len(library.generated_actions)

    _write_manifest(run_dir, dataset, config, library_dir)
    write_run_reports(run_dir, library_dir=library_dir)
    return result


def _write_manifest(run_dir: Path, dataset: Dataset, config: RunConfig, library_dir) -> None:
    manifest = {
        "dataset": str(dataset.path),
        "tasks": len(dataset.tasks),
        "phase": config.phase.value,
        "library_dir": str(Path(library_dir).resolve()),
        "version": 1,
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def read_trajectory_logs(run_dir: str | Path) -> list[tuple[dict, list[dict]]]:
    """Parse every log under run_dir/trajectories: (summary, step dicts)."""
    trajectories_dir = Path(run_dir) / "trajectories"
    if not trajectories_dir.is_dir():
        return []
    logs = []
    for path in sorted(trajectories_dir.glob("*.jsonl")):
        lines = [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not lines:
            continue
        summary = lines[-1]
        if "start_action_names" not in summary:
            raise StorageError(f"log {path} has no trailing summary object")
        logs.append((summary, lines[:-1]))
    return logs


def _coverage_entry_from_log(summary: dict, steps: list[dict]) -> dict | None:
    if summary.get("success") is None:
        return None
    start = frozenset(summary["start_action_names"])
    novel = 0
    for step in steps:
        names = [r["name"] for r in step.get("defined_functions", ())]
        if any(name not in start for name in names):
            novel += 1
    count = len(steps)
    if count == 0:
        return None
    success = bool(summary["success"])
    return {
        "coverage": 1.0 - novel / count if success else None,
        "coverage_literal": 1.0 - (novel / count if success else 0.0),
        "success": success,
        "steps": count,
        "novel_steps": novel,
    }


def write_run_reports(run_dir: str | Path, library_dir: str | Path | None = None) -> list[str]:
    """Emit coverage.json, scores.json, complexity.json, coverage_curve.csv.

    Returns a list of report-level error strings (empty on full success).
    """
    run_dir = Path(run_dir)
    reports_dir = run_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    errors: list[str] = []

    logs = read_trajectory_logs(run_dir)
    if not logs:
        return ["no trajectory logs found"]

    entries: dict[str, dict] = {}
    curve_rows: list[tuple[int, dict]] = []
    scores = {}
    for summary, steps in logs:
        task_id = summary["task_id"]
        scores[task_id] = {
            "final_answer": summary.get("final_answer"),
            "success": summary.get("success"),
            "steps": summary.get("steps"),
            "aborted": summary.get("aborted"),
        }
        entry = _coverage_entry_from_log(summary, steps)
        if entry is not None:
            entries[task_id] = entry
            curve_rows.append((len(summary["start_action_names"]), entry))

    max_set_size = max((len(s["start_action_names"]) for s, _ in logs), default=0)
    coverage = metrics.coverage_report(entries, action_set_size=max_set_size)
    _write_json(reports_dir / "coverage.json", coverage)

    labeled = [s for s in scores.values() if s["success"] is not None]
    score_report = {
        "per_task": scores,
        "tasks": len(scores),
        "labeled": len(labeled),
        "successes": sum(1 for s in labeled if s["success"]),
        "success_rate": (
            sum(1 for s in labeled if s["success"]) / len(labeled) if labeled else None
        ),
    }
    _write_json(reports_dir / "scores.json", score_report)

    if library_dir is None:
        manifest_path = run_dir / "manifest.json"
        if manifest_path.exists():
            library_dir = json.loads(manifest_path.read_text(encoding="utf-8")).get(
                "library_dir"
            )
    try:
        if not library_dir or not Path(library_dir).exists():
            raise StorageError(f"library directory not found: {library_dir}")
        library = load_initial_actions(library_dir, enable=True)
        complexity = metrics.complexity_summary(library.all_records())
        _write_json(reports_dir / "complexity.json", complexity)
    except StorageError as exc:
        errors.append(f"complexity report failed: {exc}")

    curve = metrics.coverage_curve(curve_rows)
    curve_lines = ["action_set_size,mean_coverage"]
    curve_lines += [f"{size},{value:.12g}" for size, value in curve]
    (reports_dir / "coverage_curve.csv").write_text(
        "\n".join(curve_lines) + "\n", encoding="utf-8"
    )
    return errors


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def library_checksums(library_dir: str | Path) -> dict[str, str]:
    """SHA-256 of every file under the library directory, keyed by relative path."""
    library_dir = Path(library_dir)
    checksums = {}
    for path in sorted(library_dir.rglob("*")):
        if path.is_file():
            checksums[str(path.relative_to(library_dir))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return checksums

"""The persistent action library.

Owns both halves of the action set: the ordered human-designed actions
(framework primitives plus plugin files) and the map of generated actions
accumulated from successful execution steps. One JSON file per action,
single-writer mutation, freeze/thaw around the train/test split.

On-disk layout under ``storage_dir``::

    actions/<name>.json     generated actions
    plugins/<name>.json     human plugin tools
    index/embeddings.jsonl  owned by the retrieval module
    manifest.json           {version, frozen, counts}
"""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Iterable

from .builtin_actions import primitive_records
from .core import ActionRecord, Origin, Step, StepStatus
from .errors import FrozenLibrary, StorageError

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def _dump_record(record: ActionRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


class ActionLibrary:
    """Human and generated action sets with JSON-file persistence."""

    def __init__(self, storage_dir: Path, human_actions: list[ActionRecord], frozen: bool = False):
        self.storage_dir = Path(storage_dir)
        self.human_actions: list[ActionRecord] = list(human_actions)
        self.generated_actions: dict[str, ActionRecord] = {}
        self.frozen = frozen
        self.plugin_errors: list[str] = []
        self._pending: list[ActionRecord] = []
        self._lock = threading.Lock()

    # -- paths ---------------------------------------------------------

    @property
    def actions_dir(self) -> Path:
        return self.storage_dir / "actions"

    @property
    def plugins_dir(self) -> Path:
        return self.storage_dir / "plugins"

    @property
    def manifest_path(self) -> Path:
        return self.storage_dir / "manifest.json"

    # -- queries -------------------------------------------------------

    def human_names(self) -> frozenset[str]:
        return frozenset(r.name for r in self.human_actions)

    def snapshot_names(self) -> frozenset[str]:
        """Union of human and generated names at call time."""
        with self._lock:
            return frozenset(r.name for r in self.human_actions) | frozenset(
                self.generated_actions
            )

    def get(self, name: str) -> ActionRecord | None:
        for record in self.human_actions:
            if record.name == name:
                return record
        return self.generated_actions.get(name)

    def all_records(self) -> list[ActionRecord]:
        return list(self.human_actions) + [
            self.generated_actions[name] for name in sorted(self.generated_actions)
        ]

    # -- mutation ------------------------------------------------------

    def accumulate(self, step: Step, task_id: str) -> list[ActionRecord]:
        """Add the step's documented new functions to the generated set.

        Only top-level functions with a non-empty docstring and a name not
        already taken (human or generated) are accepted; first definition
        wins. Accepted records are persisted immediately; persistence
        failures keep the record in memory and retry at the next flush.
        """
        if self.frozen:
            raise FrozenLibrary("cannot accumulate into a frozen library")
        if step.status is not StepStatus.OK:
            raise ValueError("accumulate requires a successfully executed step")
        accepted: list[ActionRecord] = []
        with self._lock:
            taken = frozenset(r.name for r in self.human_actions) | frozenset(
                self.generated_actions
            )
            for record in step.defined_functions:
                if record.name in taken or not record.docstring.strip():
                    continue
                stored = ActionRecord(
                    name=record.name,
                    docstring=record.docstring,
                    source=record.source,
                    origin=Origin.GENERATED,
                    created_by_task=task_id,
                    created_at=record.created_at,
                    complexity=record.complexity,
                )
                stored.validate()
                self.generated_actions[stored.name] = stored
                taken = taken | {stored.name}
                accepted.append(stored)
                try:
                    self._persist(stored)
                except OSError as exc:
                    logger.warning("could not persist action %s: %s", stored.name, exc)
                    self._pending.append(stored)
        return accepted

    def _persist(self, record: ActionRecord) -> None:
        self.actions_dir.mkdir(parents=True, exist_ok=True)
        path = self.actions_dir / f"{record.name}.json"
        path.write_text(_dump_record(record), encoding="utf-8")

    def flush(self) -> None:
        """Retry pending writes and store the manifest."""
        still_pending = []
        for record in self._pending:
            try:
                self._persist(record)
            except OSError as exc:
                still_pending.append(record)
                logger.warning("flush failed for %s: %s", record.name, exc)
        self._pending = still_pending
        if still_pending:
            raise StorageError(
                "could not persist: " + ", ".join(r.name for r in still_pending)
            )
        self._write_manifest()

    def freeze(self, persist: bool = True) -> None:
        """Reject further mutation; flush pending persistence first."""
        self.frozen = True
        if persist:
            self.flush()

    def thaw(self) -> None:
        self.frozen = False

    def _write_manifest(self) -> None:
        manifest = {
            "version": MANIFEST_VERSION,
            "frozen": self.frozen,
            "counts": {
                "human": len(self.human_actions),
                "generated": len(self.generated_actions),
            },
        }
        try:
            current = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            current = None
        if current == manifest:
            return
        try:
            self.storage_dir.mkdir(parents=True, exist_ok=True)
            self.manifest_path.write_text(
                json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            raise StorageError(f"could not write manifest: {exc}") from exc

    # -- integrity -----------------------------------------------------

    def verify(self, indexed_names: Iterable[str] | None = None) -> list[str]:
        """Check registry invariants; returns human-readable violations."""
        problems = []
        seen: set[str] = set()
        for record in self.all_records():
            if record.name in seen:
                problems.append(f"duplicate action name: {record.name}")
            seen.add(record.name)
            try:
                record.validate()
            except ValueError as exc:
                problems.append(str(exc))
        if self.manifest_path.exists():
            try:
                counts = json.loads(self.manifest_path.read_text(encoding="utf-8")).get(
                    "counts", {}
                )
            except (OSError, ValueError) as exc:
                problems.append(f"unreadable manifest: {exc}")
            else:
                if counts.get("generated") != len(self.generated_actions):
                    problems.append(
                        f"manifest counts {counts.get('generated')} generated actions, "
                        f"found {len(self.generated_actions)}"
                    )
        if indexed_names is not None:
            indexed = set(indexed_names)
            generated = set(self.generated_actions)
            for missing in sorted(generated - indexed):
                problems.append(f"generated action missing from embedding index: {missing}")
            for stray in sorted(indexed - generated):
                problems.append(f"index entry without a generated action: {stray}")
        return problems


def load_initial_actions(storage_dir: str | Path, enable: bool = True) -> ActionLibrary:
    """Open (or create) a library under ``storage_dir``.

    The two framework primitives are always present. With ``enable`` the
    plugin directory is scanned for additional human tools; without it the
    human set is exactly the two primitives. Persisted generated actions are
    always loaded: the flag gates the human set only.

    Malformed plugin files are skipped and reported on ``lib.plugin_errors``.
    """
    storage_dir = Path(storage_dir)
    try:
        storage_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create library directory {storage_dir}: {exc}") from exc

    humans = primitive_records()
    plugin_errors: list[str] = []
    plugins_dir = storage_dir / "plugins"
    if enable and plugins_dir.is_dir():
        taken = {r.name for r in humans}
        try:
            plugin_files = sorted(plugins_dir.glob("*.json"))
        except OSError as exc:
            raise StorageError(f"unreadable plugins directory {plugins_dir}: {exc}") from exc
        for path in plugin_files:
            try:
                record = ActionRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
                if record.origin is not Origin.HUMAN:
                    raise ValueError("plugin records must have origin=human")
                if record.name in taken:
                    raise ValueError(f"plugin name collides with {record.name!r}")
                record.validate()
            except (OSError, ValueError, KeyError) as exc:
                plugin_errors.append(f"{path.name}: {exc}")
                continue
            humans.append(record)
            taken.add(record.name)

    frozen = False
    manifest_path = storage_dir / "manifest.json"
    if manifest_path.exists():
        try:
            frozen = bool(json.loads(manifest_path.read_text(encoding="utf-8")).get("frozen"))
        except (OSError, ValueError) as exc:
            raise StorageError(f"unreadable manifest {manifest_path}: {exc}") from exc

    lib = ActionLibrary(storage_dir, humans, frozen=frozen)
    lib.plugin_errors = plugin_errors
    if plugin_errors:
        logger.warning("skipped malformed plugins: %s", "; ".join(plugin_errors))

    actions_dir = storage_dir / "actions"
    if actions_dir.is_dir():
        human_names = lib.human_names()
        try:
            action_files = sorted(actions_dir.glob("*.json"))
        except OSError as exc:
            raise StorageError(f"unreadable actions directory {actions_dir}: {exc}") from exc
        for path in action_files:
            try:
                record = ActionRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
                record.validate()
            except (OSError, ValueError, KeyError) as exc:
                raise StorageError(f"corrupt action file {path}: {exc}") from exc
            if record.name in human_names:
                raise StorageError(f"generated action {record.name!r} collides with a human action")
            lib.generated_actions[record.name] = record
    return lib

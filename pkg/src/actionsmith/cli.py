"""Command-line entry point: run phases, emit reports, manage the library.

Every flag has a config-file equivalent (JSON mirroring the run-config
field names); a flag beats the file, the file beats the default, and the
merged result is logged verbatim to ``run_dir/effective_config.json``.
Environment variables carry secrets only (API keys: ACTIONSMITH_CHAT_API_KEY,
ACTIONSMITH_EMBED_API_KEY, or ACTIONSMITH_API_KEY for both).
"""

from __future__ import annotations

import json
import shlex
import sys
from pathlib import Path

import click

from . import harness
from .builtin_actions import install_builtin_plugins
from .core import Phase, RunConfig, RunFlags, validate_config
from .errors import (
    ConfigError,
    DatasetError,
    HandshakeTimeout,
    StorageError,
    UnknownAction,
    WorkerSpawnError,
)
from .gateway import ProviderConfig
from .registry import load_initial_actions
from .retrieval import DeterministicEmbedder, EmbeddingIndex

INFRA_ERRORS = (DatasetError, ConfigError, StorageError, WorkerSpawnError, HandshakeTimeout)

DEFAULTS = {
    "max_steps": 20,
    "temperature": 0.5,
    "retrieval_k": 10,
    "step_timeout_s": 120,
    "observation_limit_chars": 8192,
    "phase": "train",
    "flags": {"accumulate": True, "allow_generation": True, "load_initial_actions": True},
    "provider": {
        "kind": "http_chat",
        "endpoint_url": None,
        "model_name": "",
        "transcript_path": None,
        "record_path": None,
    },
    "embedder": {"kind": "deterministic", "endpoint_url": None, "model_name": ""},
    "executor": {"use_mock": False, "worker_cmd": harness.DEFAULT_WORKER_CMD},
    "parallel": 1,
}


@click.group()
def main() -> None:
    """Agent runtime with a self-accumulated action library."""


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        elif value is not None:
            merged[key] = value
    return merged


def _effective_config(config_file: str | None, flag_overrides: dict) -> dict:
    merged = json.loads(json.dumps(DEFAULTS))  # deep copy
    if config_file:
        try:
            file_cfg = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {config_file}: {exc}") from exc
        merged = _merge(merged, file_cfg)
    return _merge(merged, flag_overrides)


def _run_config(effective: dict) -> RunConfig:
    flags = effective["flags"]
    allow_generation = bool(flags["allow_generation"])
    # Accumulation depends on the ability to implement new actions.
    accumulate = bool(flags["accumulate"]) and allow_generation
    return validate_config(
        RunConfig(
            max_steps=int(effective["max_steps"]),
            temperature=float(effective["temperature"]),
            retrieval_k=int(effective["retrieval_k"]),
            flags=RunFlags(
                accumulate=accumulate,
                allow_generation=allow_generation,
                load_initial_actions=bool(flags["load_initial_actions"]),
            ),
            phase=Phase(effective["phase"]),
            step_timeout_s=int(effective["step_timeout_s"]),
            observation_limit_chars=int(effective["observation_limit_chars"]),
        )
    )


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--phase", type=click.Choice(["train", "test"]), default=None)
@click.option("--library-dir", default="library", show_default=True)
@click.option("--out-dir", default="runs/latest", show_default=True)
@click.option("--config", "config_file", type=click.Path(), default=None,
              help="JSON config file; flags override it.")
@click.option("--max-steps", type=int, default=None)
@click.option("--temperature", type=float, default=None)
@click.option("--retrieval-k", type=int, default=None)
@click.option("--step-timeout", type=int, default=None)
@click.option("--observation-limit", type=int, default=None)
@click.option("--no-accumulation", is_flag=True, help="Disable action accumulation.")
@click.option("--no-generation", is_flag=True,
              help="Disable arbitrary action implementation (implies --no-accumulation).")
@click.option("--no-initial-actions", is_flag=True,
              help="Strip plugin tools; keep only the two framework primitives.")
@click.option("--provider", type=click.Choice(["http", "scripted"]), default=None)
@click.option("--chat-endpoint", default=None)
@click.option("--model", default=None)
@click.option("--transcript", type=click.Path(), default=None)
@click.option("--record", type=click.Path(), default=None,
              help="Append (task_id, step, response) replay entries here.")
@click.option("--embedder", type=click.Choice(["deterministic", "remote"]), default=None)
@click.option("--embed-endpoint", default=None)
@click.option("--embed-model", default=None)
@click.option("--mock-executor", is_flag=True, help="Run code in-process instead of the worker.")
@click.option("--worker-cmd", default=None, help="Kernel worker command line.")
@click.option("--parallel", type=int, default=None)
def run(dataset, phase, library_dir, out_dir, config_file, max_steps, temperature,
        retrieval_k, step_timeout, observation_limit, no_accumulation, no_generation,
        no_initial_actions, provider, chat_endpoint, model, transcript, record,
        embedder, embed_endpoint, embed_model, mock_executor, worker_cmd, parallel):
    """Run every task in DATASET under the selected phase."""
    flag_overrides: dict = {
        "max_steps": max_steps,
        "temperature": temperature,
        "retrieval_k": retrieval_k,
        "step_timeout_s": step_timeout,
        "observation_limit_chars": observation_limit,
        "phase": phase,
        "parallel": parallel,
        "flags": {},
        "provider": {},
        "embedder": {},
        "executor": {},
    }
    if no_accumulation or no_generation:
        flag_overrides["flags"]["accumulate"] = False
    if no_generation:
        flag_overrides["flags"]["allow_generation"] = False
    if no_initial_actions:
        flag_overrides["flags"]["load_initial_actions"] = False
    if provider:
        flag_overrides["provider"]["kind"] = "scripted" if provider == "scripted" else "http_chat"
    if chat_endpoint:
        flag_overrides["provider"]["endpoint_url"] = chat_endpoint
    if model:
        flag_overrides["provider"]["model_name"] = model
    if transcript:
        flag_overrides["provider"]["transcript_path"] = transcript
    if record:
        flag_overrides["provider"]["record_path"] = record
    if embedder:
        flag_overrides["embedder"]["kind"] = embedder
    if embed_endpoint:
        flag_overrides["embedder"]["endpoint_url"] = embed_endpoint
    if embed_model:
        flag_overrides["embedder"]["model_name"] = embed_model
    if mock_executor:
        flag_overrides["executor"]["use_mock"] = True
    if worker_cmd:
        flag_overrides["executor"]["worker_cmd"] = shlex.split(worker_cmd)

    try:
        effective = _effective_config(config_file, flag_overrides)
        config = _run_config(effective)
        provider_cfg = ProviderConfig(
            kind=effective["provider"]["kind"],
            endpoint_url=effective["provider"]["endpoint_url"],
            model_name=effective["provider"]["model_name"],
            temperature=config.temperature,
            transcript_path=effective["provider"]["transcript_path"],
            record_path=effective["provider"]["record_path"],
        ).validate()
        data = harness.load_dataset(dataset)

        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "effective_config.json").write_text(
            json.dumps(effective, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

        result = harness.run_phase(
            data,
            config,
            library_dir,
            out_path,
            provider_cfg,
            executor_settings=harness.ExecutorSettings(
                use_mock=bool(effective["executor"]["use_mock"]),
                worker_cmd=tuple(effective["executor"]["worker_cmd"]),
            ),
            embedder_settings=harness.EmbedderSettings(
                kind=effective["embedder"]["kind"],
                endpoint_url=effective["embedder"]["endpoint_url"],
                model_name=effective["embedder"]["model_name"],
            ),
            parallel=int(effective["parallel"]),
        )
    except INFRA_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    labeled = [t for t in result.trajectories if t.success is not None]
    solved = sum(1 for t in labeled if t.success)
    click.echo(
        f"{len(result.trajectories)} tasks, {solved}/{len(labeled)} labeled tasks solved, "
        f"library {result.library_size_before} -> {result.library_size_after} generated actions"
    )
    sys.exit(0)


@main.command()
@click.argument("run_dir", type=click.Path())
def report(run_dir):
    """Recompute coverage, score, and complexity reports for RUN_DIR."""
    errors = harness.write_run_reports(run_dir)
    if errors:
        for message in errors:
            click.echo(f"report error: {message}", err=True)
        sys.exit(1)

    reports_dir = Path(run_dir) / "reports"
    coverage = json.loads((reports_dir / "coverage.json").read_text(encoding="utf-8"))
    scores = json.loads((reports_dir / "scores.json").read_text(encoding="utf-8"))
    mean = coverage.get("mean_success_conditioned")
    click.echo(
        "tasks: {tasks}  success_rate: {rate}  mean_coverage: {mean}  action_set_size: {size}".format(
            tasks=scores["tasks"],
            rate="n/a" if scores["success_rate"] is None else f"{scores['success_rate']:.3f}",
            mean="n/a" if mean is None else f"{mean:.3f}",
            size=coverage["action_set_size"],
        )
    )
    sys.exit(0)


@main.group()
def library():
    """Inspect or prepare an action library directory."""


@library.command("list")
@click.argument("library_dir", type=click.Path())
def library_list(library_dir):
    lib = load_initial_actions(library_dir, enable=True)
    for record in lib.all_records():
        complexity = "-" if record.complexity is None else str(record.complexity)
        click.echo(f"{record.name}\t{record.origin.value}\t{complexity}")
    sys.exit(0)


@library.command("show")
@click.argument("library_dir", type=click.Path())
@click.argument("name")
def library_show(library_dir, name):
    lib = load_initial_actions(library_dir, enable=True)
    record = lib.get(name)
    if record is None:
        click.echo(f"error: {UnknownAction(name)}", err=True)
        sys.exit(1)
    click.echo(record.docstring)
    click.echo()
    click.echo(record.source.rstrip())
    sys.exit(0)


@library.command("verify")
@click.argument("library_dir", type=click.Path())
def library_verify(library_dir):
    lib = load_initial_actions(library_dir, enable=True)
    index = EmbeddingIndex.open(
        Path(library_dir) / "index" / "embeddings.jsonl", DeterministicEmbedder()
    )
    problems = lib.verify(indexed_names=index.entries.keys())
    problems.extend(f"plugin: {p}" for p in lib.plugin_errors)
    if problems:
        for problem in problems:
            click.echo(problem, err=True)
        sys.exit(1)
    click.echo("ok")
    sys.exit(0)


@library.command("install-plugins")
@click.argument("library_dir", type=click.Path())
def library_install_plugins(library_dir):
    """Write the shipped plugin tools (download/file inspection) into the library."""
    installed = install_builtin_plugins(library_dir)
    click.echo("installed: " + ", ".join(installed))
    sys.exit(0)


if __name__ == "__main__":
    main()

"""Exception types shared across the runtime."""

from __future__ import annotations


class ActionsmithError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ActionsmithError):
    """A run configuration violates one of its invariants."""


class PromptError(ActionsmithError):
    """A human action cannot be rendered into the system prompt."""


class ProviderError(ActionsmithError):
    """A chat or embedding provider call failed."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class TranscriptExhausted(ActionsmithError):
    """The scripted provider has no entry for the requested (task, step)."""


class StorageError(ActionsmithError):
    """The action library could not be read or written."""


class PluginError(ActionsmithError):
    """One or more plugin action files are malformed."""

    def __init__(self, failures: list[str]):
        super().__init__("; ".join(failures))
        self.failures = failures


class FrozenLibrary(ActionsmithError):
    """A mutating operation was attempted on a frozen library."""


class WorkerSpawnError(ActionsmithError):
    """The kernel worker process could not be started."""


class HandshakeTimeout(ActionsmithError):
    """The kernel worker did not answer the handshake ping in time."""


class WorkerCrashed(ActionsmithError):
    """The kernel worker process exited unexpectedly."""


class DatasetError(ActionsmithError):
    """A task dataset file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class AnalysisError(ActionsmithError):
    """Source code could not be parsed for static analysis."""


class MissingLabel(ActionsmithError):
    """A metric that needs a ground-truth answer was asked about an unlabeled task."""


class UnknownAction(ActionsmithError):
    """No action with the requested name exists in the library."""

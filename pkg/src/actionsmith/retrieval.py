"""Docstring embedding index and top-k cosine retrieval over generated actions.

Human actions are never indexed; they are always in the prompt. Library
sizes stay small (hundreds), so retrieval is an exhaustive scan.

Two embedding providers: a remote OpenAI-compatible endpoint, and a
deterministic offline embedder that hashes character trigrams of the
lowercased text into a 256-bin count vector and L2-normalizes it.
"""

from __future__ import annotations

import json
import os
import threading
import zlib
from pathlib import Path
from typing import Mapping

import numpy as np
import requests

from .core import ActionRecord, Origin
from .errors import ProviderError, StorageError

DETERMINISTIC_DIM = 256
EMBED_API_KEY_VARS = ("ACTIONSMITH_EMBED_API_KEY", "ACTIONSMITH_API_KEY")
HTTP_TIMEOUT_S = 60


def _trigram_tokens(text: str) -> list[str]:
    lowered = text.lower()
    if len(lowered) < 3:
        return [lowered]
    return [lowered[i : i + 3] for i in range(len(lowered) - 2)]


class DeterministicEmbedder:
    """Offline trigram-hash embedder; a pure function of its input text."""

    kind = "deterministic_test"
    dimension = DETERMINISTIC_DIM

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in _trigram_tokens(text):
            vec[zlib.crc32(token.encode("utf-8")) % self.dimension] += 1.0
        return vec / np.linalg.norm(vec)


class RemoteEmbedder:
    """OpenAI-compatible embedding endpoint: POST {model, input: [text]}."""

    kind = "remote"

    def __init__(self, endpoint_url: str, model_name: str, dimension: int | None = None):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.dimension = dimension  # learned from the first response when None

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        headers = {"Content-Type": "application/json"}
        for var in EMBED_API_KEY_VARS:
            key = os.environ.get(var)
            if key:
                headers["Authorization"] = f"Bearer {key}"
                break
        try:
            resp = requests.post(
                self.endpoint_url,
                json={"model": self.model_name, "input": [text]},
                headers=headers,
                timeout=HTTP_TIMEOUT_S,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(
                f"embedding endpoint returned {resp.status_code}",
                status=resp.status_code,
                body=resp.text[:500],
            )
        try:
            values = resp.json()["data"][0]["embedding"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if self.dimension is None:
            self.dimension = int(vec.shape[0])
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ProviderError("embedding endpoint returned a zero vector")
        return vec / norm


def embed(provider, text: str) -> np.ndarray:
    """Embed ``text`` with the given provider; always a unit vector."""
    return provider.embed(text)


class EmbeddingIndex:
    """name -> unit docstring vector, persisted as newline-delimited JSON."""

    def __init__(self, embedder, index_path: str | Path | None = None):
        self.embedder = embedder
        self.index_path = Path(index_path) if index_path else None
        self.entries: dict[str, np.ndarray] = {}
        self._pending: list[ActionRecord] = []
        self._write_lock = threading.Lock()

    @property
    def dimension(self) -> int | None:
        return self.embedder.dimension

    @classmethod
    def open(cls, index_path: str | Path, embedder) -> "EmbeddingIndex":
        index = cls(embedder, index_path)
        path = Path(index_path)
        if not path.exists():
            return index
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                vec = np.asarray(entry["vector"], dtype=np.float64)
                dim = int(entry["dim"])
            except (ValueError, KeyError, TypeError) as exc:
                raise StorageError(f"bad index line {lineno} in {path}: {exc}") from exc
            if vec.shape[0] != dim:
                raise StorageError(f"index line {lineno}: vector length != dim")
            if index.dimension is not None and dim != index.dimension:
                raise StorageError(
                    f"index line {lineno}: dim {dim} != configured {index.dimension}"
                )
            index.entries[entry["name"]] = vec
        return index

    def index_action(self, record: ActionRecord) -> np.ndarray:
        """Embed the record's docstring and store it under the record's name.

        Re-indexing an existing name overwrites its vector. On provider
        failure the record is queued and retried at the next call.
        """
        if record.origin is not Origin.GENERATED:
            raise ValueError("only generated actions are indexed; human actions live in the prompt")
        if not record.docstring.strip():
            raise ValueError(f"action {record.name!r} has no docstring to index")

        with self._write_lock:
            retry, self._pending = self._pending, []
            for queued in retry:
                try:
                    self.entries[queued.name] = self.embedder.embed(queued.docstring)
                except ProviderError:
                    self._pending.append(queued)

            try:
                vector = self.embedder.embed(record.docstring)
            except ProviderError:
                self._pending.append(record)
                self._save()
                raise
            self.entries[record.name] = vector
            self._save()
            return vector

    def _save(self) -> None:
        if self.index_path is None:
            return
        self.index_path.parent.mkdir(parents=True, exist_ok=True)
        lines = []
        for name in sorted(self.entries):
            vec = self.entries[name]
            # 17 significant digits round-trips IEEE doubles exactly.
            vec_text = "[" + ", ".join(format(float(v), ".17g") for v in vec) + "]"
            lines.append(
                '{"dim": %d, "name": %s, "vector": %s}'
                % (vec.shape[0], json.dumps(name), vec_text)
            )
        self.index_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def top_k(self, query_vector: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Exhaustive cosine scan; descending score, ties by ascending name."""
        scored = [
            (name, float(np.dot(query_vector, vec)))
            for name, vec in list(self.entries.items())  # snapshot: writers may add
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]


def retrieve(
    index: EmbeddingIndex,
    records: Mapping[str, ActionRecord],
    query: str,
    k: int,
) -> list[tuple[ActionRecord, float]]:
    """Top-k generated actions by cosine similarity between query and docstrings.

    Returns min(k, |index|) (record, score) pairs, best first; ties broken by
    ascending action name. ``records`` maps generated action names to their
    records, typically ``library.generated_actions``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not index.entries:
        return []
    query_vector = index.embedder.embed(query)
    results = []
    for name, score in index.top_k(query_vector, k):
        record = records.get(name)
        if record is None:
            # Index entry without a record: registry verify reports it; skip here.
            continue
        results.append((record, score))
    return results

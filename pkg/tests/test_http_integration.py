"""End-to-end HTTP provider tests against a local in-process server.

Covers the OpenAI-compatible wire shapes for chat and embeddings without
any network: request payload structure, auth header propagation, response
parsing, and a full run_task loop through the HTTP chat provider.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from actionsmith.core import RunConfig, TaskSpec
from actionsmith.errors import ProviderError
from actionsmith.executor import MockExecutor
from actionsmith.gateway import HttpChatProvider, ProviderConfig
from actionsmith.orchestrator import run_task
from actionsmith.registry import load_initial_actions
from actionsmith.retrieval import DeterministicEmbedder, EmbeddingIndex, RemoteEmbedder

CHAT_SCRIPT = {
    1: "Check the product first.\n```python\nprint(6 * 7)\n```",
    2: "Submit it.\n```python\nsubmit_final_answer(6 * 7)\n```",
}


class _Handler(BaseHTTPRequestHandler):
    seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        type(self).seen.append(
            {"path": self.path, "payload": payload, "auth": self.headers.get("Authorization")}
        )
        if self.path == "/chat":
            assistant_turns = sum(
                1 for m in payload["messages"] if m["role"] == "assistant"
            )
            text = CHAT_SCRIPT.get(assistant_turns + 1)
            if text is None:
                self._reply(500, {"error": "script exhausted"})
                return
            self._reply(200, {"choices": [{"message": {"content": text}}]})
        elif self.path == "/embed":
            self._reply(200, {"data": [{"embedding": [3.0, 4.0]}]})
        elif self.path == "/broken":
            self._reply(503, {"error": "down"})
        else:
            self._reply(404, {"error": "no such route"})

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep pytest output clean
        pass


@pytest.fixture
def http_server():
    _Handler.seen = []
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join(timeout=5)


def test_chat_provider_round_trip_with_auth(http_server, monkeypatch):
    monkeypatch.setenv("ACTIONSMITH_CHAT_API_KEY", "sk-test-123")
    provider = HttpChatProvider(
        ProviderConfig(
            kind="http_chat",
            endpoint_url=f"{http_server}/chat",
            model_name="test-model",
            temperature=0.5,
        )
    )
    from actionsmith.gateway import ChatMessage, Role

    text = provider.complete(
        [ChatMessage(Role.SYSTEM, "s"), ChatMessage(Role.USER, "u")],
        task_id="T1", step=1,
    )
    assert text == CHAT_SCRIPT[1]
    request = _Handler.seen[-1]
    assert request["auth"] == "Bearer sk-test-123"
    assert request["payload"]["model"] == "test-model"
    assert request["payload"]["temperature"] == 0.5
    assert request["payload"]["messages"][0]["role"] == "system"


def test_full_loop_through_http_provider_then_offline_replay(http_server, tmp_path):
    library = load_initial_actions(tmp_path / "lib", enable=True)
    index = EmbeddingIndex(DeterministicEmbedder())
    session = MockExecutor(library.human_actions)
    record_path = tmp_path / "recorded.jsonl"
    provider = HttpChatProvider(
        ProviderConfig(
            kind="http_chat", endpoint_url=f"{http_server}/chat", model_name="m",
            record_path=str(record_path),
        )
    )
    task = TaskSpec(task_id="T1", question="What is 6 times 7?", expected_answer="42")
    traj = run_task(
        task, RunConfig(), library, provider, session, index,
        sleep=lambda _s: None,
    )
    assert traj.success is True
    assert traj.final_answer == "42"
    assert len(traj.steps) == 2
    assert traj.steps[0].observation == "42\n"

    # the recorded live run replays offline through the scripted provider
    from actionsmith.gateway import ScriptedProvider

    replay_provider = ScriptedProvider(
        ProviderConfig(kind="scripted", transcript_path=str(record_path))
    )
    replay_session = MockExecutor(library.human_actions)
    replayed = run_task(
        task, RunConfig(), library, replay_provider, replay_session, index,
        sleep=lambda _s: None,
    )
    assert replayed.final_answer == "42"
    assert [s.code for s in replayed.steps] == [s.code for s in traj.steps]


def test_remote_embedder_normalizes_and_learns_dimension(http_server):
    embedder = RemoteEmbedder(f"{http_server}/embed", "embed-model")
    vec = embedder.embed("anything")
    assert embedder.dimension == 2
    assert np.allclose(vec, [0.6, 0.8])
    assert np.linalg.norm(vec) == pytest.approx(1.0)


def test_provider_error_carries_status(http_server):
    provider = HttpChatProvider(
        ProviderConfig(kind="http_chat", endpoint_url=f"{http_server}/broken")
    )
    from actionsmith.gateway import ChatMessage, Role

    with pytest.raises(ProviderError) as info:
        provider.complete(
            [ChatMessage(Role.SYSTEM, "s"), ChatMessage(Role.USER, "u")],
            task_id="T1", step=1,
        )
    assert info.value.status == 503

    embedder = RemoteEmbedder(f"{http_server}/broken", "m")
    with pytest.raises(ProviderError) as info:
        embedder.embed("text")
    assert info.value.status == 503


def test_connection_refused_is_provider_error():
    provider = HttpChatProvider(
        ProviderConfig(kind="http_chat", endpoint_url="http://127.0.0.1:9/chat")
    )
    from actionsmith.gateway import ChatMessage, Role

    with pytest.raises(ProviderError):
        provider.complete(
            [ChatMessage(Role.SYSTEM, "s"), ChatMessage(Role.USER, "u")],
            task_id="T1", step=1,
        )

"""Chat-completion providers, prompt assembly, and response parsing.

Two provider kinds exist: an OpenAI-compatible HTTP chat endpoint and a
scripted provider that replays a transcript file keyed by (task_id, step).
The scripted provider makes whole runs deterministic and network-free.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import requests

from .analysis import signature_line
from .core import ActionRecord
from .errors import ConfigError, PromptError, ProviderError, TranscriptExhausted

CHAT_API_KEY_VARS = ("ACTIONSMITH_CHAT_API_KEY", "ACTIONSMITH_API_KEY")
HTTP_TIMEOUT_S = 120


class Role(str, enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise ValueError(f"{self.role.value} message content must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role.value, "content": self.content}


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "http_chat" | "scripted"
    endpoint_url: str | None = None
    model_name: str = ""
    temperature: float = 0.5
    transcript_path: str | None = None
    record_path: str | None = None

    def validate(self) -> "ProviderConfig":
        if self.kind == "http_chat" and not self.endpoint_url:
            raise ConfigError("http_chat provider requires endpoint_url")
        if self.kind == "scripted" and not self.transcript_path:
            raise ConfigError("scripted provider requires transcript_path")
        if self.kind not in ("http_chat", "scripted"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        return self


@dataclass(frozen=True)
class ParsedResponse:
    thought: str
    code: str | None


SYSTEM_PROMPT_TEMPLATE = """\
You are an autonomous problem-solving agent. You work in steps: at each step
you see the task and the full history of your previous steps, and you respond
with exactly two parts:

1. One short paragraph of reasoning.
2. Exactly one fenced code block (```python ... ```) with Python code to run.

The code runs in a persistent interpreter session: variables and functions
defined in one step stay available in later steps. When a task lists attached
files, their absolute paths also sit in the tuple variable TASK_ATTACHMENTS.

When you define a function, give it a docstring describing its purpose.
Documented functions that execute successfully are saved to an action library
for later reuse. Call get_relevant_actions(query, k) to search that library;
retrieved functions become callable in your next step.

End the task by calling submit_final_answer(answer) with the final answer.

Available actions:
{tool_section}\
"""

EMPTY_TOOL_SECTION = "(none)\n"


def _action_entry(record: ActionRecord) -> str:
    if not record.docstring.strip():
        raise PromptError(f"action {record.name!r} has no docstring to show in the prompt")
    try:
        signature = signature_line(record.source)
    except Exception:
        signature = f"{record.name}(...)"
    doc_lines = record.docstring.strip().splitlines()
    body = "\n".join(f"    {line}" for line in doc_lines)
    return f"- {signature}\n{body}\n"


def build_system_prompt(human_actions: list[ActionRecord]) -> str:
    """Render the system prompt listing every human action in order."""
    if human_actions:
        tool_section = "".join(_action_entry(r) for r in human_actions)
    else:
        tool_section = EMPTY_TOOL_SECTION
    return SYSTEM_PROMPT_TEMPLATE.format(tool_section=tool_section)


def parse_response(text: str) -> ParsedResponse:
    """Split a model response into (thought, first fenced code block).

    The thought is everything before the first fence, trimmed. A fence opens
    on a line starting with three backticks (optional language tag) and
    closes on a bare three-backtick line. Without a complete fence the code
    is absent. This function never raises.
    """
    lines = text.split("\n")
    open_idx = None
    for i, line in enumerate(lines):
        if line.startswith("```"):
            open_idx = i
            break
    if open_idx is None:
        return ParsedResponse(thought=text.strip(), code=None)
    close_idx = None
    for j in range(open_idx + 1, len(lines)):
        if lines[j].strip() == "```":
            close_idx = j
            break
    if close_idx is None:
        return ParsedResponse(thought=text.strip(), code=None)
    thought = "\n".join(lines[:open_idx]).strip()
    code = "\n".join(lines[open_idx + 1 : close_idx])
    return ParsedResponse(thought=thought, code=code)


class HttpChatProvider:
    """OpenAI-compatible chat endpoint: POST {model, temperature, messages}."""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg.validate()

    def complete(self, messages: list[ChatMessage], *, task_id: str, step: int) -> str:
        _check_messages(messages)
        headers = {"Content-Type": "application/json"}
        for var in CHAT_API_KEY_VARS:
            key = os.environ.get(var)
            if key:
                headers["Authorization"] = f"Bearer {key}"
                break
        payload = {
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [m.to_dict() for m in messages],
        }
        try:
            resp = requests.post(
                self.cfg.endpoint_url, json=payload, headers=headers, timeout=HTTP_TIMEOUT_S
            )
        except requests.RequestException as exc:
            raise ProviderError(f"chat request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(
                f"chat endpoint returned {resp.status_code}",
                status=resp.status_code,
                body=resp.text[:500],
            )
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: {exc}", body=resp.text[:500]) from exc
        _record(self.cfg.record_path, task_id, step, content)
        return content


class ScriptedProvider:
    """Replays a transcript file: newline-delimited {task_id, step, response}.

    A pure function of (transcript, task_id, step): repeated runs return
    byte-identical responses.
    """

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg.validate()
        self._entries: dict[tuple[str, int], str] = {}
        path = Path(cfg.transcript_path)
        if not path.exists():
            raise ConfigError(f"transcript file not found: {path}")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                key = (entry["task_id"], int(entry["step"]))
                self._entries[key] = entry["response"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"bad transcript line {lineno}: {exc}") from exc

    def complete(self, messages: list[ChatMessage], *, task_id: str, step: int) -> str:
        _check_messages(messages)
        key = (task_id, step)
        if key not in self._entries:
            raise TranscriptExhausted(f"no transcript entry for task {task_id!r} step {step}")
        response = self._entries[key]
        _record(self.cfg.record_path, task_id, step, response)
        return response


def _check_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role is not Role.SYSTEM:
        raise ValueError("the first message must be the system prompt")


def _record(record_path: str | None, task_id: str, step: int, response: str) -> None:
    # Replay files use the transcript schema so a recorded run can be
    # replayed directly by the scripted provider.
    if not record_path:
        return
    entry = {"task_id": task_id, "step": step, "response": response}
    with open(record_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")


def make_provider(cfg: ProviderConfig) -> Any:
    cfg.validate()
    if cfg.kind == "scripted":
        return ScriptedProvider(cfg)
    return HttpChatProvider(cfg)


def complete(cfg: ProviderConfig, messages: list[ChatMessage], *, task_id: str, step: int) -> str:
    """One-shot convenience wrapper around make_provider(...).complete(...)."""
    return make_provider(cfg).complete(messages, task_id=task_id, step=step)

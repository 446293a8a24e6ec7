"""Client side of the kernel protocol, plus an in-process mock kernel.

The real kernel is a subprocess speaking newline-delimited JSON over its
standard input/output: one request object per line, one response per line
with the same id, plus worker-initiated ``callback`` lines for action
retrieval. The mock executes snippets in-process and satisfies the same
contracts, so the whole primary component can be tested without the worker.
"""

from __future__ import annotations

import ast
import contextlib
import io
import itertools
import json
import queue
import subprocess
import sys
import threading
import time
import traceback
from dataclasses import dataclass
from typing import Any, Callable

from . import analysis
from .builtin_actions import FRAMEWORK_PRIMITIVES
from .core import ActionRecord
from .errors import HandshakeTimeout, WorkerCrashed, WorkerSpawnError

PROTOCOL_VERSION = 1
HANDSHAKE_TIMEOUT_S = 10
CONTROL_TIMEOUT_S = 30
EXEC_GRACE_S = 1.0  # transport allowance on top of the execution budget
STDOUT_CAP_BYTES = 1 << 20
STDOUT_CAP_MARKER = "\n...[stdout capped at 1 MiB]\n"

TIMEOUT_MESSAGE = "execution exceeded {timeout_s} s; the session namespace was reset"
CRASH_MESSAGE = "worker process died during execution; the session namespace was reset"

# (query, k or None) -> result dicts {name, docstring, source, score}
CallbackHandler = Callable[[str, int | None], list[dict]]


@dataclass(frozen=True)
class ExecRequest:
    id: str
    op: str  # exec | analyze | load | reset | ping | shutdown
    code: str | None = None
    timeout_s: int = 120

    def to_wire(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"id": self.id, "op": self.op, "timeout_s": self.timeout_s}
        if self.code is not None:
            payload["code"] = self.code
        return payload


@dataclass
class ExecResult:
    id: str
    ok: bool
    stdout: str = ""
    result_repr: str | None = None
    final_answer: str | None = None
    error: dict[str, str] | None = None
    defined_functions: tuple[dict, ...] = ()
    # analyze-only extras
    calls: tuple[str, ...] = ()
    has_function_def: bool = False

    @classmethod
    def from_wire(cls, obj: dict[str, Any]) -> "ExecResult":
        return cls(
            id=str(obj.get("id")),
            ok=bool(obj.get("ok")),
            stdout=obj.get("stdout") or "",
            result_repr=obj.get("result_repr"),
            final_answer=obj.get("final_answer"),
            error=obj.get("error"),
            defined_functions=tuple(obj.get("defined_functions") or ()),
            calls=tuple(obj.get("calls") or ()),
            has_function_def=bool(obj.get("has_function_def")),
        )


def to_observation(res: ExecResult, limit_chars: int) -> str:
    """Shape an execution result into the observation the agent sees."""
    if res.ok:
        text = res.stdout
        if res.result_repr is not None:
            if text and not text.endswith("\n"):
                text += "\n"
            text += res.result_repr
    else:
        err = res.error or {}
        text = f"{err.get('type', 'Error')}: {err.get('message', '')}"
        tb_lines = (err.get("traceback") or "").rstrip("\n").splitlines()
        tail = "\n".join(tb_lines[-20:])
        if tail:
            text += "\n" + tail
    if len(text) > limit_chars:
        removed = len(text) - limit_chars
        text = text[:limit_chars] + f"...[truncated {removed} chars]"
    return text


def format_retrieval_results(query: str, results: list[dict]) -> str:
    """Observation text for retrieved actions: signature, docstring, source.

    The kernel worker carries an identical formatter; keep the two in sync.
    """
    if not results:
        return f"No generated actions found for query: {query!r}"
    lines = [f"Retrieved {len(results)} action(s) for query {query!r}:"]
    for item in results:
        try:
            signature = analysis.signature_line(item["source"])
        except Exception:
            signature = item["name"]
        lines.append("")
        lines.append(f"- {signature} | score={item['score']:.6f}")
        doc = (item.get("docstring") or "").strip()
        if doc:
            lines.append(f"  {doc}")
        lines.append("  source:")
        lines.extend(f"    {src_line}" for src_line in item["source"].rstrip().splitlines())
    return "\n".join(lines) + "\n"


def _timeout_result(request_id: str, timeout_s: int) -> ExecResult:
    return ExecResult(
        id=request_id,
        ok=False,
        error={
            "type": "Timeout",
            "message": TIMEOUT_MESSAGE.format(timeout_s=timeout_s),
            "traceback": "",
        },
    )


def _crash_result(request_id: str) -> ExecResult:
    return ExecResult(
        id=request_id,
        ok=False,
        error={"type": "WorkerCrashed", "message": CRASH_MESSAGE, "traceback": ""},
    )


class KernelSession:
    """Supervises one worker process; one outstanding request at a time."""

    def __init__(
        self,
        worker_cmd: list[str],
        human_actions: list[ActionRecord],
        callback_handler: CallbackHandler | None = None,
    ):
        self.worker_cmd = list(worker_cmd)
        self.human_actions = list(human_actions)
        self.callback_handler = callback_handler
        self._ids = itertools.count(1)
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._spawn()
        self._handshake()
        self._load_human_actions()

    # -- process management ---------------------------------------------

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.worker_cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise WorkerSpawnError(f"cannot start worker {self.worker_cmd!r}: {exc}") from exc
        self._lines = queue.Queue()
        reader = threading.Thread(target=self._read_loop, args=(self._proc,), daemon=True)
        reader.start()

    def _read_loop(self, proc: subprocess.Popen) -> None:
        for raw in proc.stdout:
            raw = raw.strip()
            if not raw:
                continue
            try:
                self._lines.put(("obj", json.loads(raw)))
            except ValueError:
                self._lines.put(("garbage", raw))
        self._lines.put(("eof", None))

    def _handshake(self) -> None:
        request_id = f"r{next(self._ids)}"
        try:
            resp = self._roundtrip(
                {"id": request_id, "op": "ping", "v": PROTOCOL_VERSION},
                timeout=HANDSHAKE_TIMEOUT_S,
            )
        except WorkerCrashed as exc:
            self._kill()
            raise WorkerSpawnError(f"worker exited during handshake: {exc}") from exc
        except TimeoutError as exc:
            self._kill()
            raise HandshakeTimeout(
                f"worker did not answer ping within {HANDSHAKE_TIMEOUT_S} s"
            ) from exc
        if resp.get("v") != PROTOCOL_VERSION:
            self._kill()
            raise WorkerSpawnError(f"protocol version mismatch: {resp.get('v')!r}")

    def _load_human_actions(self) -> None:
        for record in self.human_actions:
            if record.name in FRAMEWORK_PRIMITIVES:
                continue  # installed natively by the worker
            self.load(record.source)

    def _restart(self) -> None:
        self._kill()
        self._spawn()
        self._handshake()
        self._load_human_actions()

    def _kill(self) -> None:
        if self._proc is None:
            return
        with contextlib.suppress(OSError):
            self._proc.kill()
        with contextlib.suppress(Exception):
            self._proc.wait(timeout=5)
        self._proc = None

    def close(self) -> None:
        if self._proc is None:
            return
        request_id = f"r{next(self._ids)}"
        with contextlib.suppress(Exception):
            self._send({"id": request_id, "op": "shutdown"})
            self._proc.wait(timeout=5)
        self._kill()

    # -- wire -------------------------------------------------------------

    def _send(self, payload: dict[str, Any]) -> None:
        if self._proc is None or self._proc.stdin is None:
            raise WorkerCrashed("worker is not running")
        line = json.dumps(payload, ensure_ascii=False)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise WorkerCrashed(f"cannot write to worker: {exc}") from exc

    def _roundtrip(self, payload: dict[str, Any], timeout: float) -> dict[str, Any]:
        """Send one request and wait for its response, serving callbacks."""
        self._send(payload)
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError()
            try:
                kind, obj = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise TimeoutError() from None
            if kind == "eof":
                raise WorkerCrashed("worker closed its output")
            if kind == "garbage":
                continue  # non-JSON noise; the worker never emits this itself
            if obj.get("op") == "callback":
                self._send({"id": obj.get("id"), "results": self._serve_callback(obj)})
                continue
            if obj.get("id") == payload["id"]:
                return obj
            # Stale response from a killed request; drop it.

    def _serve_callback(self, obj: dict[str, Any]) -> list[dict]:
        if obj.get("kind") != "retrieve" or self.callback_handler is None:
            return []
        k = obj.get("k")
        return self.callback_handler(obj.get("query") or "", int(k) if k is not None else None)

    def _request(self, op: str, code: str | None, timeout: float, timeout_s: int) -> ExecResult:
        request = ExecRequest(id=f"r{next(self._ids)}", op=op, code=code, timeout_s=timeout_s)
        try:
            return ExecResult.from_wire(self._roundtrip(request.to_wire(), timeout))
        except TimeoutError:
            self._restart()
            return _timeout_result(request.id, timeout_s)
        except WorkerCrashed:
            self._restart()
            return _crash_result(request.id)

    # -- operations --------------------------------------------------------

    def execute(self, code: str, timeout_s: int) -> ExecResult:
        return self._request("exec", code, timeout=timeout_s + EXEC_GRACE_S, timeout_s=timeout_s)

    def analyze(self, code: str) -> ExecResult:
        return self._request("analyze", code, timeout=CONTROL_TIMEOUT_S, timeout_s=CONTROL_TIMEOUT_S)

    def load(self, code: str) -> ExecResult:
        return self._request("load", code, timeout=CONTROL_TIMEOUT_S, timeout_s=CONTROL_TIMEOUT_S)

    def reset(self) -> ExecResult:
        result = self._request("reset", None, timeout=CONTROL_TIMEOUT_S, timeout_s=CONTROL_TIMEOUT_S)
        if result.ok:
            self._load_human_actions()
        return result

    def ping(self) -> ExecResult:
        return self._request("ping", None, timeout=CONTROL_TIMEOUT_S, timeout_s=CONTROL_TIMEOUT_S)


def start_session(
    worker_cmd: list[str],
    human_actions: list[ActionRecord],
    callback_handler: CallbackHandler | None = None,
) -> KernelSession:
    """Spawn and hand-shake a kernel worker, then load the human actions."""
    return KernelSession(worker_cmd, human_actions, callback_handler=callback_handler)


# ---------------------------------------------------------------------------
# In-process mock kernel
# ---------------------------------------------------------------------------


class _DeadlineExceeded(BaseException):
    """Raised by the trace hook; BaseException so user except-clauses miss it."""


class _CappedWriter(io.StringIO):
    def __init__(self, cap: int = STDOUT_CAP_BYTES):
        super().__init__()
        self._cap = cap
        self._truncated = False

    def write(self, text: str) -> int:
        if self._truncated:
            return len(text)
        budget = self._cap - self.tell()
        if len(text) > budget:
            super().write(text[:budget])
            super().write(STDOUT_CAP_MARKER)
            self._truncated = True
            return len(text)
        return super().write(text)


class MockExecutor:
    """In-process stand-in for the kernel worker.

    Satisfies the session contracts (persistent namespace, function
    extraction, hooks, timeout with namespace reset) without a subprocess.
    The timeout uses a trace-based deadline and therefore cannot interrupt
    blocking C calls; nonterminating pure-Python code is interrupted fine.
    Executions are serialized with an internal lock because stdout capture
    is process-global.
    """

    _exec_lock = threading.Lock()

    def __init__(
        self,
        human_actions: list[ActionRecord] | None = None,
        callback_handler: CallbackHandler | None = None,
    ):
        self.human_actions = list(human_actions or [])
        self.callback_handler = callback_handler
        self._ids = itertools.count(1)
        self._pending_answer: str | None = None
        self.namespace: dict[str, Any] = {}
        self.loaded_actions: set[str] = set()
        self._install_namespace()
        self._load_human_actions()

    # -- namespace ---------------------------------------------------------

    def _install_namespace(self) -> None:
        self.namespace = {
            "__name__": "__kernel__",
            "__builtins__": __builtins__,
            "submit_final_answer": self._hook_submit,
            "get_relevant_actions": self._hook_retrieve,
        }
        self.loaded_actions = set(FRAMEWORK_PRIMITIVES)
        self._pending_answer = None

    def _load_human_actions(self) -> None:
        for record in self.human_actions:
            if record.name in FRAMEWORK_PRIMITIVES:
                continue
            self.load(record.source)

    def _hook_submit(self, answer: Any) -> str:
        self._pending_answer = str(answer)
        return self._pending_answer

    def _hook_retrieve(self, query: str, k: int | None = None) -> str:
        results = self.callback_handler(query, k) if self.callback_handler else []
        for item in results:
            exec(item["source"], self.namespace)  # noqa: S102 - that is the point
            self.loaded_actions.add(item["name"])
        return format_retrieval_results(query, results)

    # -- operations ----------------------------------------------------------

    def execute(self, code: str, timeout_s: int) -> ExecResult:
        request_id = f"m{next(self._ids)}"
        with self._exec_lock:
            try:
                tree = ast.parse(code)
            except SyntaxError:
                return ExecResult(id=request_id, ok=False, error=_error_payload())
            out = _CappedWriter()
            deadline = time.monotonic() + timeout_s
            try:
                with contextlib.redirect_stdout(out):
                    result_repr = self._run_tree(tree, deadline)
            except _DeadlineExceeded:
                self._install_namespace()
                self._load_human_actions()
                return _timeout_result(request_id, timeout_s)
            except BaseException:
                self._pending_answer = None
                return ExecResult(
                    id=request_id, ok=False, stdout=out.getvalue(), error=_error_payload()
                )
            answer, self._pending_answer = self._pending_answer, None
            return ExecResult(
                id=request_id,
                ok=True,
                stdout=out.getvalue(),
                result_repr=result_repr,
                final_answer=answer,
                defined_functions=tuple(analysis.extract_functions(code)),
            )

    def _run_tree(self, tree: ast.Module, deadline: float) -> str | None:
        body = list(tree.body)
        trailing = None
        if body and isinstance(body[-1], ast.Expr):
            trailing = body.pop()

        # Opcode-level tracing: line events alone never fire inside a
        # degenerate single-line loop ("while True: pass"), opcode events do.
        # The clock check is throttled to keep the overhead tolerable.
        ticks = [0]

        def tracer(frame, event, arg):
            if event == "call":
                frame.f_trace_opcodes = True
            ticks[0] += 1
            if (ticks[0] & 0x3FF) == 0 and time.monotonic() > deadline:
                raise _DeadlineExceeded()
            return tracer

        sys.settrace(tracer)
        try:
            if body:
                module = ast.Module(body=body, type_ignores=[])
                exec(compile(module, "<action>", "exec"), self.namespace)
            if trailing is not None:
                expression = ast.Expression(trailing.value)
                value = eval(compile(expression, "<action>", "eval"), self.namespace)
                if value is not None:
                    return repr(value)
            return None
        finally:
            sys.settrace(None)

    def analyze(self, code: str) -> ExecResult:
        request_id = f"m{next(self._ids)}"
        try:
            ast.parse(code)
        except SyntaxError:
            return ExecResult(id=request_id, ok=False, error=_error_payload())
        return ExecResult(
            id=request_id,
            ok=True,
            defined_functions=tuple(analysis.extract_functions(code)),
            calls=tuple(analysis.called_names(code)),
            has_function_def=analysis.has_function_def(code),
        )

    def load(self, code: str) -> ExecResult:
        request_id = f"m{next(self._ids)}"
        try:
            tree = ast.parse(code)
        except SyntaxError:
            return ExecResult(id=request_id, ok=False, error=_error_payload())
        warning = "" if _definitions_only(tree) else "warning: load ran non-definition statements\n"
        try:
            exec(compile(tree, "<load>", "exec"), self.namespace)
        except BaseException:
            return ExecResult(id=request_id, ok=False, error=_error_payload())
        functions = analysis.extract_functions(code)
        self.loaded_actions.update(f["name"] for f in functions)
        return ExecResult(
            id=request_id, ok=True, stdout=warning, defined_functions=tuple(functions)
        )

    def reset(self) -> ExecResult:
        self._install_namespace()
        self._load_human_actions()
        return ExecResult(id=f"m{next(self._ids)}", ok=True)

    def ping(self) -> ExecResult:
        return ExecResult(id=f"m{next(self._ids)}", ok=True)

    def close(self) -> None:
        self.namespace = {}


def _definitions_only(tree: ast.Module) -> bool:
    allowed = (
        ast.FunctionDef,
        ast.AsyncFunctionDef,
        ast.ClassDef,
        ast.Import,
        ast.ImportFrom,
        ast.Assign,
        ast.AnnAssign,
    )
    for node in tree.body:
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
            continue  # module docstring
        if not isinstance(node, allowed):
            return False
    return True


def _error_payload() -> dict[str, str]:
    exc_type, exc, tb = sys.exc_info()
    # Drop the harness frame (the exec call itself) from the traceback.
    user_tb = tb.tb_next if tb is not None and tb.tb_next is not None else tb
    return {
        "type": exc_type.__name__ if exc_type else "Error",
        "message": str(exc),
        "traceback": "".join(traceback.format_exception(exc_type, exc, user_tb)),
    }

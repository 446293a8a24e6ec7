"""The execution kernel: a persistent namespace plus the request handlers.

One Kernel instance serves one supervisor connection. Requests arrive as
dicts, responses leave as dicts; the transport (newline-delimited JSON over
stdio) lives in ``__main__``. The retrieval hook suspends the current exec,
emits a ``callback`` line upstream, and blocks until the reply line arrives.
"""

from __future__ import annotations

import ast
import contextlib
import io
import itertools
import json
import sys
import traceback

from . import PROTOCOL_VERSION, analysis

STDOUT_CAP_BYTES = 1 << 20
STDOUT_CAP_MARKER = "\n...[stdout capped at 1 MiB]\n"
LOAD_WARNING = "warning: load ran non-definition statements\n"


class CappedWriter(io.StringIO):
    """StringIO that stops recording past the cap; protects the protocol."""

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


def error_payload() -> dict[str, str]:
    exc_type, exc, tb = sys.exc_info()
    # Skip the kernel's own exec frame so tracebacks start at user code.
    user_tb = tb.tb_next if tb is not None and tb.tb_next is not None else tb
    return {
        "type": exc_type.__name__ if exc_type else "Error",
        "message": str(exc),
        "traceback": "".join(traceback.format_exception(exc_type, exc, user_tb)),
    }


def format_retrieval_results(query: str, results: list[dict]) -> str:
    """Keep byte-identical with the supervisor's mock-kernel formatter."""
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


class Kernel:
    def __init__(self, proto_in, proto_out):
        self.proto_in = proto_in
        self.proto_out = proto_out
        self._callback_ids = itertools.count(1)
        self.namespace: dict = {}
        self.loaded_actions: set[str] = set()
        self.pending_final_answer: str | None = None
        self._install_namespace()

    # -- framework hooks ----------------------------------------------------

    def _install_namespace(self) -> None:
        self.namespace = {
            "__name__": "__kernel__",
            "__builtins__": __builtins__,
            "submit_final_answer": self._hook_submit,
            "get_relevant_actions": self._hook_retrieve,
        }
        self.loaded_actions = {"submit_final_answer", "get_relevant_actions"}
        self.pending_final_answer = None

    def _hook_submit(self, answer) -> str:
        self.pending_final_answer = str(answer)
        return self.pending_final_answer

    def _hook_retrieve(self, query: str, k: int | None = None) -> str:
        request_id = f"cb{next(self._callback_ids)}"
        line = json.dumps(
            {"op": "callback", "id": request_id, "kind": "retrieve", "query": query, "k": k},
            ensure_ascii=False,
        )
        self.proto_out.write(line + "\n")
        self.proto_out.flush()
        results = self._await_callback_reply(request_id)
        for item in results:
            exec(item["source"], self.namespace)  # noqa: S102 - retrieved actions must load
            self.loaded_actions.add(item["name"])
        return format_retrieval_results(query, results)

    def _await_callback_reply(self, request_id: str) -> list[dict]:
        # Strict alternation: the very next protocol line is the reply.
        while True:
            line = self.proto_in.readline()
            if line == "":
                raise RuntimeError("supervisor closed the connection during a callback")
            line = line.strip()
            if not line:
                continue
            reply = json.loads(line)
            if reply.get("id") == request_id:
                return list(reply.get("results") or [])

    # -- request handlers ---------------------------------------------------

    def handle(self, request: dict) -> tuple[dict, bool]:
        """Dispatch one request; returns (response, shutdown_requested)."""
        request_id = request.get("id")
        op = request.get("op")
        try:
            if op == "ping":
                return {"id": request_id, "ok": True, "v": PROTOCOL_VERSION}, False
            if op == "reset":
                self._install_namespace()
                return {"id": request_id, "ok": True}, False
            if op == "shutdown":
                return {"id": request_id, "ok": True}, True
            if op == "exec":
                return self._op_exec(request_id, request.get("code") or ""), False
            if op == "load":
                return self._op_load(request_id, request.get("code") or ""), False
            if op == "analyze":
                return self._op_analyze(request_id, request.get("code") or ""), False
            return (
                {
                    "id": request_id,
                    "ok": False,
                    "error": {
                        "type": "ProtocolError",
                        "message": f"unknown op {op!r}",
                        "traceback": "",
                    },
                },
                False,
            )
        except Exception:
            # Echo discipline: even internal failures produce one response.
            return {"id": request_id, "ok": False, "error": error_payload()}, False

    def _op_exec(self, request_id, code: str) -> dict:
        try:
            tree = ast.parse(code)
        except SyntaxError:
            return {"id": request_id, "ok": False, "error": error_payload()}
        out = CappedWriter()
        try:
            with contextlib.redirect_stdout(out):
                result_repr = self._run_tree(tree)
        except BaseException:
            self.pending_final_answer = None
            return {
                "id": request_id,
                "ok": False,
                "stdout": out.getvalue(),
                "error": error_payload(),
            }
        answer, self.pending_final_answer = self.pending_final_answer, None
        return {
            "id": request_id,
            "ok": True,
            "stdout": out.getvalue(),
            "result_repr": result_repr,
            "final_answer": answer,
            "defined_functions": analysis.extract_functions(code),
        }

    def _run_tree(self, tree: ast.Module) -> str | None:
        body = list(tree.body)
        trailing = None
        if body and isinstance(body[-1], ast.Expr):
            trailing = body.pop()
        if body:
            module = ast.Module(body=body, type_ignores=[])
            exec(compile(module, "<action>", "exec"), self.namespace)
        if trailing is not None:
            expression = ast.Expression(trailing.value)
            value = eval(compile(expression, "<action>", "eval"), self.namespace)
            if value is not None:
                return repr(value)
        return None

    def _op_load(self, request_id, code: str) -> dict:
        try:
            tree = ast.parse(code)
        except SyntaxError:
            return {"id": request_id, "ok": False, "error": error_payload()}
        warning = "" if analysis.definitions_only(tree) else LOAD_WARNING
        out = CappedWriter()
        try:
            with contextlib.redirect_stdout(out):
                exec(compile(tree, "<load>", "exec"), self.namespace)
        except BaseException:
            return {"id": request_id, "ok": False, "error": error_payload()}
        functions = analysis.extract_functions(code)
        self.loaded_actions.update(f["name"] for f in functions)
        return {
            "id": request_id,
            "ok": True,
            "stdout": warning,
            "defined_functions": functions,
        }

    def _op_analyze(self, request_id, code: str) -> dict:
        try:
            ast.parse(code)
        except SyntaxError:
            return {"id": request_id, "ok": False, "error": error_payload()}
        return {
            "id": request_id,
            "ok": True,
            "defined_functions": analysis.extract_functions(code),
            "calls": analysis.called_names(code),
            "has_function_def": analysis.has_function_def(code),
        }

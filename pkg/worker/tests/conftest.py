from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


class WorkerProc:
    """Drives the kernel over its wire protocol for tests."""

    def __init__(self):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "actionsmith_worker"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._ids = iter(range(1, 10_000))

    def send_raw(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def send(self, payload: dict) -> None:
        self.send_raw(json.dumps(payload, ensure_ascii=False))

    def recv(self, timeout: float = 10.0) -> dict:
        # select() cannot see lines already sitting in the stream's internal
        # buffer, so timeouts are enforced around a blocking readline instead.
        import threading

        box: dict[str, str] = {}

        def read() -> None:
            box["line"] = self.proc.stdout.readline()

        reader = threading.Thread(target=read, daemon=True)
        reader.start()
        reader.join(timeout)
        if "line" not in box:
            raise TimeoutError("no response line from worker")
        if box["line"] == "":
            raise EOFError("worker closed stdout")
        return json.loads(box["line"])

    def request(self, op: str, code: str | None = None, timeout: float = 10.0) -> dict:
        request_id = f"t{next(self._ids)}"
        payload = {"id": request_id, "op": op, "timeout_s": 30}
        if code is not None:
            payload["code"] = code
        self.send(payload)
        response = self.recv(timeout)
        assert response["id"] == request_id
        return response

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait(timeout=5)


@pytest.fixture
def worker():
    proc = WorkerProc()
    yield proc
    proc.close()

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from actionsmith.builtin_actions import primitive_records
from actionsmith.executor import MockExecutor, start_session
from fixtures.runtime_env import WORKER_AVAILABLE, WORKER_CMD


@pytest.fixture(params=["mock", "worker"])
def make_executor(request):
    """Factory building either executor implementation; closes them after."""
    if request.param == "worker" and not WORKER_AVAILABLE:
        pytest.skip("kernel worker package not installed")
    sessions = []

    def factory(human_actions=None, callback_handler=None):
        actions = list(human_actions) if human_actions is not None else primitive_records()
        if request.param == "mock":
            session = MockExecutor(actions, callback_handler=callback_handler)
        else:
            session = start_session(WORKER_CMD, actions, callback_handler=callback_handler)
        sessions.append(session)
        return session

    factory.kind = request.param
    yield factory
    for session in sessions:
        session.close()

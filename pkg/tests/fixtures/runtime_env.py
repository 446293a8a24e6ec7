"""Shared environment facts for the test suite."""

from __future__ import annotations

import importlib.util
import sys

WORKER_CMD = [sys.executable, "-m", "actionsmith_worker"]
WORKER_AVAILABLE = importlib.util.find_spec("actionsmith_worker") is not None

"""Stateful Python execution kernel speaking newline-delimited JSON over stdio.

Run as ``python -m actionsmith_worker``. The supervising process sends one
request object per line and receives exactly one response line per request;
the kernel may interleave ``callback`` request lines of its own (action
retrieval) and blocks until their replies arrive.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1

"""Transport loop: newline-delimited JSON requests on stdin, one response
line per request on the original stdout.

File descriptor 1 is re-pointed at /dev/null right after the protocol
stream is duplicated, so neither user code nor stray prints can ever emit
non-protocol bytes on the wire. User-level ``print`` during an exec is
captured separately by the kernel.
"""

from __future__ import annotations

import json
import os
import sys

from .kernel import Kernel, error_payload


def main() -> int:
    proto_out = os.fdopen(os.dup(1), "w", encoding="utf-8", buffering=1, newline="\n")
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    os.close(devnull)
    sys.stdout = os.fdopen(1, "w", encoding="utf-8")  # plain prints go nowhere

    proto_in = sys.stdin
    kernel = Kernel(proto_in, proto_out)

    def respond(payload: dict) -> None:
        proto_out.write(json.dumps(payload, ensure_ascii=False) + "\n")
        proto_out.flush()

    while True:
        line = proto_in.readline()
        if line == "":
            break  # supervisor went away
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except ValueError:
            respond({"id": None, "ok": False, "error": error_payload()})
            continue
        response, shutdown = kernel.handle(request)
        respond(response)
        if shutdown:
            proto_out.flush()
            return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())

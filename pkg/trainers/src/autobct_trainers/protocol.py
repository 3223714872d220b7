"""Request loop shared by all trainers.

Messages arrive as one JSON object per line on stdin:

    {"type": "hello", "version": 1, "dim": p, "params": [...]}
    {"type": "eval", "id": n, "u": [...], "params": {...}}
    {"type": "shutdown"}

The loop replies ready to hello, one result (or error) per eval id, and
returns on shutdown or closed stdin.  A malformed request yields an error
reply and the loop continues.
"""

import json
import sys

PROTOCOL_VERSION = 1


def serve(handler, stdin=None, stdout=None):
    """Answer requests until shutdown; ``handler(u, params) -> (score, cost)``.

    A handler may return ``None`` for the cost, in which case the field is
    omitted and the caller falls back to its own wall-clock measurement.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def send(obj):
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            send({"type": "error", "id": None, "message": f"unparseable request: {line[:200]}"})
            continue
        kind = msg.get("type")
        if kind == "hello":
            send({"type": "ready", "version": PROTOCOL_VERSION})
        elif kind == "eval":
            request_id = msg.get("id")
            try:
                score, cost = handler(msg["u"], msg.get("params", {}))
                reply = {"type": "result", "id": request_id, "score": float(score)}
                if cost is not None:
                    reply["cost"] = float(cost)
                send(reply)
            except Exception as exc:  # keep serving after a failed evaluation
                send({"type": "error", "id": request_id, "message": f"{type(exc).__name__}: {exc}"})
        elif kind == "shutdown":
            return
        else:
            send({"type": "error", "id": msg.get("id"), "message": f"unknown message type {kind!r}"})

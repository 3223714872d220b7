"""Loopback trainer: score = first control coordinate, cost = 0.1.

Flags (for protocol failure tests):
  --no-cost        omit the cost field from results
  --bad-version    reply ready with a wrong protocol version
  --die-early      exit before replying ready
  --sleep SECONDS  delay each result by this long
  --error-first    reply error to the first eval request, results after
"""

import argparse
import json
import sys
import time


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--no-cost", action="store_true")
    parser.add_argument("--bad-version", action="store_true")
    parser.add_argument("--die-early", action="store_true")
    parser.add_argument("--sleep", type=float, default=0.0)
    parser.add_argument("--error-first", action="store_true")
    args = parser.parse_args()

    seen_evals = 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "hello":
            if args.die_early:
                print("refusing to start", file=sys.stderr)
                sys.exit(3)
            reply = {"type": "ready"}
            if args.bad_version:
                reply["version"] = 99
            print(json.dumps(reply), flush=True)
        elif kind == "eval":
            seen_evals += 1
            if args.sleep:
                time.sleep(args.sleep)
            if args.error_first and seen_evals == 1:
                print(json.dumps({"type": "error", "id": msg["id"], "message": "simulated failure"}), flush=True)
                continue
            reply = {"type": "result", "id": msg["id"], "score": msg["u"][0]}
            if not args.no_cost:
                reply["cost"] = 0.1
            print(json.dumps(reply), flush=True)
        elif kind == "shutdown":
            return


if __name__ == "__main__":
    main()

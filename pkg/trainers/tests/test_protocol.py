import json
import subprocess
import sys


class TrainerProcess:
    """Raw line-delimited JSON conversation with a trainer subprocess."""

    def __init__(self, module):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", module],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def send(self, obj):
        self.proc.stdin.write(json.dumps(obj) + "\n")
        self.proc.stdin.flush()

    def send_raw(self, line):
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv(self, timeout=30.0):
        line = self.proc.stdout.readline()
        assert line, "trainer closed stdout"
        return json.loads(line)

    def close(self):
        try:
            self.send({"type": "shutdown"})
            self.proc.wait(timeout=10)
        except Exception:
            self.proc.kill()


def test_echo_golden_transcript():
    t = TrainerProcess("autobct_trainers.echo")
    try:
        t.send({"type": "hello", "version": 1, "dim": 1, "params": ["n_trees"]})
        ready = t.recv()
        assert ready["type"] == "ready"
        assert ready.get("version", 1) == 1

        t.send({"type": "eval", "id": 1, "u": [0.3], "params": {"n_trees": 30}})
        reply = t.recv()
        assert reply == {"type": "result", "id": 1, "score": 0.3, "cost": 0.1}

        t.send({"type": "eval", "id": 2, "u": [0.9], "params": {}})
        reply = t.recv()
        assert reply["id"] == 2 and reply["score"] == 0.9
    finally:
        t.close()
    assert t.proc.returncode == 0


def test_one_reply_per_id_in_order():
    t = TrainerProcess("autobct_trainers.echo")
    try:
        t.send({"type": "hello", "version": 1, "dim": 1, "params": []})
        t.recv()
        ids = [7, 8, 9]
        for i in ids:
            t.send({"type": "eval", "id": i, "u": [0.5], "params": {}})
        replies = [t.recv() for _ in ids]
        assert [r["id"] for r in replies] == ids
    finally:
        t.close()


def test_malformed_request_keeps_serving():
    t = TrainerProcess("autobct_trainers.echo")
    try:
        t.send({"type": "hello", "version": 1, "dim": 1, "params": []})
        t.recv()
        t.send_raw("this is not json")
        err = t.recv()
        assert err["type"] == "error"
        t.send({"type": "eval", "id": 1, "u": [0.25], "params": {}})
        ok = t.recv()
        assert ok["type"] == "result" and ok["score"] == 0.25
    finally:
        t.close()


def test_eval_failure_is_error_reply_not_crash():
    t = TrainerProcess("autobct_trainers.checkerboard")
    try:
        t.send({"type": "hello", "version": 1, "dim": 1, "params": ["n_trees"]})
        assert t.recv()["type"] == "ready"
        # u missing entirely forces a handler exception
        t.send({"type": "eval", "id": 4, "u": None, "params": {"n_trees": "not-a-number"}})
        err = t.recv()
        assert err["type"] == "error" and err["id"] == 4
        t.send({"type": "eval", "id": 5, "u": [0.0],
                "params": {"n_trees": 1, "data_seed": 1, "n_train": 500, "n_valid": 500}})
        ok = t.recv()
        assert ok["type"] == "result" and 0.0 <= ok["score"] <= 1.0 and ok["cost"] > 0.0
    finally:
        t.close()

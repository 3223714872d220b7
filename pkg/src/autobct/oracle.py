"""Trainer abstraction: in-process analytic oracles and subprocess trainers.

External trainers speak newline-delimited JSON over stdin/stdout:

    -> {"type": "hello", "version": 1, "dim": p, "params": [names...]}
    <- {"type": "ready"}
    -> {"type": "eval", "id": n, "u": [...], "params": {name: value, ...}}
    <- {"type": "result", "id": n, "score": h_raw, "cost": t_raw}   (cost omissible)
    <- {"type": "error", "id": n, "message": "..."}
    -> {"type": "shutdown"}

Request ids are strictly increasing; every id gets exactly one terminal reply
or a timeout.  When a result omits the cost, the caller falls back to the
measured wall time.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .basis import BasisSet, eval_phi, eval_psi
from .errors import ProtocolError, StartupFailureError, TrainerFailureError

PROTOCOL_VERSION = 1

GOLDEN_TRANSCRIPT = """\
-> {"type": "hello", "version": 1, "dim": 1, "params": ["n_trees"]}
<- {"type": "ready"}
-> {"type": "eval", "id": 1, "u": [0.3], "params": {"n_trees": 30}}
<- {"type": "result", "id": 1, "score": 0.87, "cost": 1.4}
-> {"type": "eval", "id": 2, "u": [0.7], "params": {"n_trees": 70}}
<- {"type": "error", "id": 2, "message": "out of memory"}
-> {"type": "shutdown"}
"""


@dataclass(frozen=True)
class EvalResult:
    """One trainer evaluation in raw (untransformed) units."""

    score_raw: float
    cost_raw: float
    wall_clock: float
    source: str  # "reported" or "measured"


class AnalyticOracle:
    """Closed-form trainer for tests and simulations.

    Holds ground-truth coefficient vectors in transformed units; evaluations
    add Gaussian noise there and invert the configured transforms so the
    controller sees raw-unit observations.
    """

    kind = "analytic"

    def __init__(self, alpha_true, beta_true, basis: BasisSet, noise_h: float, noise_t: float,
                 score_transform, cost_transform):
        self.alpha_true = np.asarray(alpha_true, dtype=float)
        self.beta_true = np.asarray(beta_true, dtype=float)
        self.basis = basis
        self.noise_h = float(noise_h)
        self.noise_t = float(noise_t)
        self.score_transform = score_transform
        self.cost_transform = cost_transform

    def true_score(self, u) -> float:
        return float(self.alpha_true @ eval_phi(self.basis, u))

    def true_cost(self, u) -> float:
        return float(self.beta_true @ eval_psi(self.basis, u))

    def evaluate(self, u, mapped_params: Mapping[str, object], rng: np.random.Generator) -> EvalResult:
        start = time.perf_counter()
        h = self.true_score(u) + self.noise_h * rng.standard_normal()
        t = max(self.true_cost(u) + self.noise_t * rng.standard_normal(), 0.0)
        result = EvalResult(
            score_raw=self.score_transform.invert(h),
            cost_raw=self.cost_transform.invert(t),
            wall_clock=time.perf_counter() - start,
            source="reported",
        )
        return result

    def close(self):
        pass


@dataclass
class SubprocessOracleConfig:
    command: Sequence[str]
    cwd: Optional[str] = None
    env: Mapping[str, str] = field(default_factory=dict)
    timeout: float = 60.0
    retries: int = 1
    static_params: Mapping[str, object] = field(default_factory=dict)


class SubprocessOracle:
    """One trainer subprocess serving one run; eval requests are sequential."""

    kind = "subprocess"

    def __init__(self, config: SubprocessOracleConfig):
        self.config = config
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._stderr: list[str] = []
        self._next_id = 1
        self._ready = False

    # -- session management ------------------------------------------------

    def handshake(self, dim: int, param_names: Sequence[str]) -> None:
        """Spawn the trainer and complete the hello/ready exchange."""
        cfg = self.config
        env = dict(os.environ)
        env.update(cfg.env)
        try:
            self._proc = subprocess.Popen(
                list(cfg.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=cfg.cwd,
                env=env,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise StartupFailureError(f"could not spawn trainer {cfg.command!r}: {exc}") from exc
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

        names = list(param_names) + sorted(cfg.static_params)
        try:
            self._send({"type": "hello", "version": PROTOCOL_VERSION, "dim": dim, "params": names})
            reply = self._recv(cfg.timeout)
        except TimeoutError:
            raise StartupFailureError(self._augment("trainer produced no ready within timeout"))
        except TrainerFailureError as exc:
            raise StartupFailureError(str(exc)) from exc
        if reply.get("type") != "ready":
            raise StartupFailureError(self._augment(f"expected ready, got {reply!r}"))
        their_version = reply.get("version", PROTOCOL_VERSION)
        if their_version != PROTOCOL_VERSION:
            raise StartupFailureError(
                f"protocol version mismatch: ours {PROTOCOL_VERSION}, trainer replied {their_version}"
            )
        self._ready = True

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._send({"type": "shutdown"})
                self._proc.wait(timeout=5.0)
        except Exception:
            pass
        finally:
            if self._proc.poll() is None:
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, u, mapped_params: Mapping[str, object], rng=None) -> EvalResult:
        if not self._ready:
            raise StartupFailureError("handshake has not completed")
        params = dict(self.config.static_params)
        params.update(mapped_params)
        u_list = [float(c) for c in np.atleast_1d(u)]
        attempts = self.config.retries + 1
        last_error = None
        for _ in range(attempts):
            request_id = self._next_id
            self._next_id += 1
            start = time.perf_counter()
            self._send({"type": "eval", "id": request_id, "u": u_list, "params": params})
            try:
                reply = self._await_reply(request_id)
            except TimeoutError as exc:
                last_error = str(exc)
                continue
            elapsed = time.perf_counter() - start
            if reply.get("type") == "error":
                last_error = f"trainer error: {reply.get('message')!r}"
                continue
            if "score" not in reply:
                raise ProtocolError(f"result without score: {json.dumps(reply)}")
            score = float(reply["score"])
            if "cost" in reply and reply["cost"] is not None:
                return EvalResult(score, float(reply["cost"]), elapsed, "reported")
            return EvalResult(score, elapsed, elapsed, "measured")
        raise TrainerFailureError(self._augment(f"evaluation failed after {attempts} attempts: {last_error}"))

    # -- plumbing -----------------------------------------------------------

    def _pump_stdout(self):
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self):
        assert self._proc is not None and self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr.append(line)

    def _send(self, message: dict):
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise TrainerFailureError(self._augment(f"trainer pipe closed: {exc}"))

    def _recv(self, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"no reply within {timeout}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise TimeoutError(f"no reply within {timeout}s")
            if line is None:
                raise TrainerFailureError(self._augment("trainer exited unexpectedly"))
            line = line.strip()
            if not line:
                continue
            try:
                return json.loads(line)
            except json.JSONDecodeError:
                raise ProtocolError(f"malformed reply line: {line!r}")

    def _await_reply(self, request_id: int) -> dict:
        while True:
            reply = self._recv(self.config.timeout)
            reply_id = reply.get("id")
            if reply_id == request_id:
                return reply
            if isinstance(reply_id, int) and reply_id < request_id:
                continue  # stale reply from a timed-out attempt
            raise ProtocolError(f"reply for unknown request id {reply_id!r}: {json.dumps(reply)}")

    def _augment(self, message: str) -> str:
        tail = "".join(self._stderr[-20:]).strip()
        return f"{message}\n--- trainer stderr ---\n{tail}" if tail else message

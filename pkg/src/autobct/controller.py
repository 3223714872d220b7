"""The decision loop: choose controls, observe, update beliefs, stop optimally.

Each epoch re-estimates the Q-curve at the current belief, picks the argmax
control, trains once, filters the observation in, and stops as soon as the
posterior mean score at the applied control reaches the freshly re-estimated
curve value at the next candidate control.  Three variants share this loop:

  relaxed  - the top value-map level is the continuation everywhere, damped
             by (1 - epsilon) to counteract map overestimation,
  exact    - epoch m uses the level with N-m-1 sweeps remaining (none on the
             last allowed epoch), so at most N trainer calls ever happen,
  on-the-fly - no map; the continuation is evaluated by nested Monte Carlo.

Every epoch also emits one structured record on the ``autobct.run`` logger
for live monitoring.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet, eval_phi
from .belief import BeliefState, NoiseModel, kalman_update
from .errors import InvalidArgumentError, InvalidObservationError, TrainerFailureError
from .qvalue import (
    Continuation,
    SamplingPlan,
    argmax_qcurve,
    default_argmax_resolution,
    lambda_estimate,
    otf,
)
from .regress import RegressionSpec
from .valuemap import ValueMap, check_compatible

STOP_VALUE = "value-condition"
STOP_HORIZON = "horizon-exhausted"
STOP_TRAINER = "trainer-failure"
STOP_BUDGET = "budget-guard"

DEFAULT_BUDGET_GUARD = 50

_TRAINER_STREAM_TAG = 0x7E57

_run_log = logging.getLogger("autobct.run")


@dataclass(frozen=True)
class Transform:
    """Strictly increasing map from raw units onto the model scale.

    affine:     v = (raw - lo) / (hi - lo)
    affine-log: v = (log raw - log lo) / (log hi - log lo)

    Values outside [0, 1] pass through unclamped; the value map is trained on
    states that cover mis-specified ranges.
    """

    kind: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in ("affine", "affine-log"):
            raise InvalidArgumentError(f"unknown transform kind {self.kind!r}")
        if not (self.hi > self.lo):
            raise InvalidArgumentError(f"transform needs hi > lo, got lo={self.lo}, hi={self.hi}")
        if self.kind == "affine-log" and self.lo <= 0.0:
            raise InvalidArgumentError("affine-log transform needs lo > 0")

    def apply(self, raw: float) -> float:
        if not np.isfinite(raw):
            raise InvalidObservationError(f"non-finite raw observation {raw}")
        if self.kind == "affine":
            return (raw - self.lo) / (self.hi - self.lo)
        if raw <= 0.0:
            raise InvalidObservationError(f"affine-log transform needs positive raw value, got {raw}")
        return (math.log(raw) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))

    def invert(self, value: float) -> float:
        if self.kind == "affine":
            return self.lo + value * (self.hi - self.lo)
        return math.exp(math.log(self.lo) + value * (math.log(self.hi) - math.log(self.lo)))

    def describe(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_description(cls, desc: dict) -> "Transform":
        return cls(kind=desc["kind"], lo=float(desc["lo"]), hi=float(desc["hi"]))


@dataclass(frozen=True)
class ControlMapping:
    """Maps one normalized control coordinate to a hyperparameter value."""

    kind: str
    lo: float
    hi: float
    name: str

    def __post_init__(self):
        if self.kind not in ("linear-int", "linear-real", "log-real", "identity"):
            raise InvalidArgumentError(f"unknown control mapping kind {self.kind!r}")
        if self.kind != "identity" and not (self.lo < self.hi):
            raise InvalidArgumentError(f"control mapping needs lo < hi, got lo={self.lo}, hi={self.hi}")
        if self.kind == "log-real" and self.lo <= 0.0:
            raise InvalidArgumentError("log-real mapping needs lo > 0")

    def describe(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "name": self.name}

    @classmethod
    def from_description(cls, desc: dict) -> "ControlMapping":
        return cls(kind=desc["kind"], lo=float(desc.get("lo", 0.0)), hi=float(desc.get("hi", 1.0)),
                   name=desc["name"])


def map_control(mapping: ControlMapping, u_coord: float):
    """Apply one control mapping to a coordinate in [0, 1]."""
    if not (0.0 <= u_coord <= 1.0):
        raise InvalidArgumentError(f"control coordinate {u_coord} outside [0, 1]")
    if mapping.kind == "identity":
        return float(u_coord)
    if mapping.kind == "linear-int":
        return int(math.floor(mapping.lo + (mapping.hi - mapping.lo) * u_coord))
    if mapping.kind == "linear-real":
        return mapping.lo + (mapping.hi - mapping.lo) * u_coord
    return math.exp(math.log(mapping.lo) + (math.log(mapping.hi) - math.log(mapping.lo)) * u_coord)


@dataclass(frozen=True)
class ProblemSpec:
    """Everything a run needs to know about one tuning problem."""

    gamma: float
    epsilon: float
    noise: NoiseModel
    basis: BasisSet
    prior: BeliefState
    score_transform: Transform
    cost_transform: Transform
    control_maps: tuple
    replicates: int = 1

    def __post_init__(self):
        if not (self.gamma > 0.0):
            raise InvalidArgumentError("gamma must be strictly positive")
        if not (0.0 <= self.epsilon < 1.0):
            raise InvalidArgumentError("epsilon must lie in [0, 1)")
        if self.replicates < 1:
            raise InvalidArgumentError("replicates must be >= 1")
        object.__setattr__(self, "control_maps", tuple(self.control_maps))
        if len(self.control_maps) != self.basis.dim_control:
            raise InvalidArgumentError(
                f"{len(self.control_maps)} control mappings for {self.basis.dim_control} controls"
            )
        j, k = self.prior.dims
        if j != self.basis.n_score or k != self.basis.n_cost:
            raise InvalidArgumentError("prior dimensions do not match the basis")

    def map_controls(self, u) -> dict:
        return {m.name: map_control(m, float(c)) for m, c in zip(self.control_maps, np.atleast_1d(u))}

    def param_names(self) -> list[str]:
        return [m.name for m in self.control_maps]


def transform_observation(spec: ProblemSpec, h_raw: float, t_raw: float) -> tuple[float, float]:
    """Map raw trainer outputs onto the model scale (unclamped)."""
    return spec.score_transform.apply(h_raw), spec.cost_transform.apply(t_raw)


@dataclass(frozen=True)
class TraceRow:
    n: int
    h: float
    t: float
    cum_t: float
    u: np.ndarray
    post_mean: float
    value: float


@dataclass
class RunTrace:
    """Per-epoch record plus the terminal summary (u*, h*, T*, x*)."""

    rows: list = field(default_factory=list)
    u_star: Optional[np.ndarray] = None
    h_star: Optional[float] = None
    t_total: float = 0.0
    x_star: Optional[BeliefState] = None

    def write_csv(self, fh, stop_reason: str) -> None:
        dim = self.u_star.size if self.u_star is not None else (self.rows[0].u.size if self.rows else 1)
        writer = csv.writer(fh)
        writer.writerow(["n", "h", "t", "cum_t", *[f"u{i + 1}" for i in range(dim)],
                         "post_score_mean", "value", "stop_reason"])
        for row in self.rows:
            writer.writerow([row.n, row.h, row.t, row.cum_t, *row.u.tolist(),
                             row.post_mean, row.value, stop_reason])

    def summary(self, stop_reason: str) -> dict:
        return {
            "epochs": len(self.rows),
            "u_star": None if self.u_star is None else self.u_star.tolist(),
            "h_star": self.h_star,
            "total_cost": self.t_total,
            "stop_reason": stop_reason,
            "x_star": None if self.x_star is None else self.x_star.to_dict(),
        }


@dataclass
class RunOutcome:
    trace: RunTrace
    stop_reason: str


def _post_mean(x: BeliefState, u, basis: BasisSet) -> float:
    return float(x.mu_alpha @ eval_phi(basis, u))


def _trainer_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, _TRAINER_STREAM_TAG])))


def _observe(spec: ProblemSpec, trainer, u, rng) -> tuple[float, float]:
    """Run the trainer ``replicates`` times: median score, summed cost."""
    params = spec.map_controls(u)
    scores, costs = [], []
    for _ in range(spec.replicates):
        result = trainer.evaluate(u, params, rng)
        scores.append(result.score_raw)
        costs.append(result.cost_raw)
    h_raw = statistics.median(scores)
    t_raw = sum(costs)
    return transform_observation(spec, h_raw, t_raw)


def _run_loop(
    spec: ProblemSpec,
    trainer,
    plan: SamplingPlan,
    qfit: RegressionSpec,
    curve_for_epoch: Callable[[BeliefState, int], "object"],
    budget_guard: Optional[int],
    horizon: Optional[int],
    resolution: int,
) -> RunOutcome:
    """Shared epoch loop; ``curve_for_epoch`` supplies the Q-curve to use when
    choosing the control applied at the given 0-based epoch."""
    guard = DEFAULT_BUDGET_GUARD if budget_guard is None else int(budget_guard)
    if guard < 1:
        raise InvalidArgumentError("budget guard must be >= 1")
    rng = _trainer_stream(plan.seed)
    trace = RunTrace()
    x = spec.prior
    curve = curve_for_epoch(x, 0)
    u, _ = argmax_qcurve(curve, resolution)
    stop_reason = None
    n = 0
    while True:
        try:
            h, t = _observe(spec, trainer, u, rng)
        except TrainerFailureError:
            stop_reason = STOP_TRAINER
            break
        x = kalman_update(x, u, h, t, spec.basis, spec.noise)
        n += 1
        trace.t_total += t

        curve = curve_for_epoch(x, n)
        u_next, value = argmax_qcurve(curve, resolution)
        post_mean = _post_mean(x, u, spec.basis)
        trace.rows.append(TraceRow(n, h, t, trace.t_total, u.copy(), post_mean, value))
        _run_log.info(json.dumps({
            "epoch": n, "h": h, "t": t, "cum_t": trace.t_total,
            "u": u.tolist(), "post_mean": post_mean, "value": value,
        }))

        if horizon is not None and n >= horizon:
            # the finite-horizon stop is forced, not a value decision
            stop_reason = STOP_HORIZON
            break
        if post_mean >= value:
            stop_reason = STOP_VALUE
            break
        if n >= guard:
            stop_reason = STOP_BUDGET
            break
        u = u_next

    trace.u_star = u.copy()
    trace.h_star = _post_mean(x, u, spec.basis)
    trace.x_star = x
    return RunOutcome(trace=trace, stop_reason=stop_reason)


def run_relaxed(
    spec: ProblemSpec,
    value_map: Optional[ValueMap],
    trainer,
    plan: SamplingPlan,
    qfit: RegressionSpec,
    *,
    budget_guard: Optional[int] = None,
    argmax_resolution: Optional[int] = None,
) -> RunOutcome:
    """Unbounded-horizon loop against the top value-map level.

    ``value_map=None`` is the -inf sentinel: no continuation, stop after the
    first epoch that fails to beat the one-step curve.
    """
    resolution = argmax_resolution or default_argmax_resolution(spec.basis.dim_control)
    if value_map is not None:
        check_compatible(value_map.metadata, gamma=spec.gamma, basis=spec.basis)
        continuation = value_map.level_function(-1, damping=spec.epsilon)
    else:
        continuation = None

    def curve_for_epoch(x, epoch):
        return lambda_estimate(x, continuation, spec.gamma, plan, spec.basis, spec.noise, qfit, epoch=epoch)

    return _run_loop(spec, trainer, plan, qfit, curve_for_epoch, budget_guard, None, resolution)


def run_exact(
    spec: ProblemSpec,
    value_map: ValueMap,
    trainer,
    plan: SamplingPlan,
    qfit: RegressionSpec,
    *,
    argmax_resolution: Optional[int] = None,
) -> RunOutcome:
    """Finite-horizon loop: at most ``depth`` trainer calls.

    The control applied at 0-based epoch m maximizes the Q-curve whose
    continuation is the level with N-m-1 sweeps (none when m = N-1, matching
    the convention that the run always stops once the horizon is spent).
    """
    check_compatible(value_map.metadata, gamma=spec.gamma, basis=spec.basis)
    depth = value_map.depth
    resolution = argmax_resolution or default_argmax_resolution(spec.basis.dim_control)

    def curve_for_epoch(x, epoch):
        remaining = depth - epoch - 1
        continuation = value_map.level_function(remaining - 1) if remaining >= 1 else None
        return lambda_estimate(x, continuation, spec.gamma, plan, spec.basis, spec.noise, qfit, epoch=epoch)

    return _run_loop(spec, trainer, plan, qfit, curve_for_epoch, depth, depth, resolution)


def run_otf(
    spec: ProblemSpec,
    depth: int,
    trainer,
    plan: SamplingPlan,
    plan_first: Optional[SamplingPlan],
    qfit: RegressionSpec,
    *,
    budget_guard: Optional[int] = None,
    argmax_resolution: Optional[int] = None,
) -> RunOutcome:
    """Map-free loop: the Q-curve comes from nested Monte Carlo evaluation.

    The first epoch may use a finer plan, since that choice is made only once.
    A depth over the hard limit is refused before any trainer call.
    """
    resolution = argmax_resolution or default_argmax_resolution(spec.basis.dim_control)
    first = plan_first or plan

    def curve_for_epoch(x, epoch):
        active = first if epoch == 0 else plan
        return otf(x, depth, None, spec.gamma, active, spec.basis, spec.noise, qfit,
                   epoch=epoch, argmax_resolution=resolution)

    # refuse an over-deep recursion before spawning any trainer work
    from .qvalue import MAX_OTF_DEPTH
    from .errors import BudgetExceededError

    if depth > MAX_OTF_DEPTH:
        raise BudgetExceededError(f"otf depth {depth} exceeds the hard limit {MAX_OTF_DEPTH}")
    return _run_loop(spec, trainer, plan, qfit, curve_for_epoch, budget_guard, None, resolution)

"""Q-value estimation over the control grid.

``lambda_estimate`` approximates, for a fixed belief state x, the mapping

    u -> -gamma * Upsilon(m_beta(u,x), s_beta(u,x)^2)
         + E[ max(m_alpha(u, x_1), continuation(x_1)) | x_0 = x ]

by Monte Carlo over the predictive observation distribution at every grid
point, followed by a cross-sectional regression over the grid.  ``otf``
evaluates the same quantity at depth N by nesting the construction, replacing
the continuation value at each sampled posterior with the sup of a child
curve; depth 1 is exactly ``lambda_estimate``.

Per-grid-point randomness comes from counter-based streams keyed by
(seed, epoch, recursion path, float bits of the grid point), so results do
not depend on grid order, scheduling, or worker count.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .basis import BasisSet, as_control_point, eval_phi, eval_psi
from .belief import BeliefState, NoiseModel, _quad_form
from .errors import BudgetExceededError, InvalidArgumentError, NumericalDegeneracyError
from .regress import FittedRegressor, RegressionSpec, fit

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# value of continuing, evaluated on a batch of posterior states
Continuation = Callable[[Sequence[BeliefState]], np.ndarray]

MAX_OTF_DEPTH = 3


def upsilon(m: float, s2: float) -> float:
    """E[max(Y, 0)] for Y ~ N(m, s2); always >= max(m, 0)."""
    if not (s2 > 0.0 and np.isfinite(s2) and np.isfinite(m)):
        raise InvalidArgumentError(f"upsilon needs finite m and s2 > 0, got m={m}, s2={s2}")
    s = math.sqrt(s2)
    z = m / s
    return s * _INV_SQRT_2PI * math.exp(-0.5 * z * z) + m * float(ndtr(z))


def upsilon_vec(m, s2) -> np.ndarray:
    """Vectorized :func:`upsilon`."""
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s2 <= 0.0) or not (np.all(np.isfinite(m)) and np.all(np.isfinite(s2))):
        raise InvalidArgumentError("upsilon needs finite m and s2 > 0")
    s = np.sqrt(s2)
    z = m / s
    return s * _INV_SQRT_2PI * np.exp(-0.5 * z * z) + m * ndtr(z)


@dataclass(frozen=True)
class SamplingPlan:
    """Control grid, per-point sample count, and master seed."""

    grid: np.ndarray
    n_samples: int
    seed: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        if grid.ndim != 2 or grid.shape[0] == 0:
            raise InvalidArgumentError("grid must be a non-empty (n, p) array")
        if not np.all(np.isfinite(grid)) or grid.min() < 0.0 or grid.max() > 1.0:
            raise InvalidArgumentError("grid points must lie in [0, 1]^p")
        if np.unique(grid, axis=0).shape[0] != grid.shape[0]:
            raise InvalidArgumentError("grid points must be distinct")
        if self.n_samples < 1:
            raise InvalidArgumentError("n_samples must be >= 1")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be a non-negative integer")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "n_samples", int(self.n_samples))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def dim_control(self) -> int:
        return self.grid.shape[1]

    def with_seed(self, seed: int) -> "SamplingPlan":
        return SamplingPlan(self.grid, self.n_samples, seed)


def uniform_grid(dim_control: int, points_per_dim: int) -> np.ndarray:
    """Tensor lattice of ``points_per_dim`` uniform points per coordinate."""
    if points_per_dim < 2:
        raise InvalidArgumentError("points_per_dim must be >= 2")
    axis = np.linspace(0.0, 1.0, points_per_dim)
    mesh = np.meshgrid(*([axis] * dim_control), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim_control)


def default_plan(dim_control: int, seed: int, n_samples: int = 20) -> SamplingPlan:
    points = 101 if dim_control == 1 else 21
    return SamplingPlan(uniform_grid(dim_control, points), n_samples, seed)


def default_argmax_resolution(dim_control: int) -> int:
    return 1001 if dim_control == 1 else 101


@dataclass(frozen=True)
class QCurve:
    """Fitted Q-value curve plus the raw Monte Carlo points behind it."""

    regressor: FittedRegressor
    grid: np.ndarray
    raw_values: np.ndarray
    point_se: np.ndarray

    def value(self, u) -> float:
        point = as_control_point(u, self.grid.shape[1])
        return self.regressor.predict(point)

    def raw_points(self) -> list[tuple[np.ndarray, float]]:
        return [(self.grid[i], float(self.raw_values[i])) for i in range(self.grid.shape[0])]

    def write_csv(self, fh) -> None:
        """Dump the raw Monte Carlo points (control coordinates, value, SE)."""
        import csv

        writer = csv.writer(fh)
        p = self.grid.shape[1]
        writer.writerow([f"u{i + 1}" for i in range(p)] + ["p", "mc_se"])
        for i in range(self.grid.shape[0]):
            writer.writerow([*self.grid[i].tolist(), float(self.raw_values[i]), float(self.point_se[i])])


def _float_bits(value: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(value)))[0]


def _point_stream(seed: int, epoch: int, path: tuple, u: np.ndarray) -> np.random.Generator:
    entropy = [seed, epoch, *path, *(_float_bits(c) for c in u)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def argmax_qcurve(q: QCurve, resolution: int) -> tuple[np.ndarray, float]:
    """Maximize the fitted curve on a uniform lattice (``resolution`` per dim).

    Ties break toward the lexicographically smallest point; the lattice must
    be at least as fine as the sampling grid in every coordinate.
    """
    p = q.grid.shape[1]
    per_dim = max(np.unique(q.grid[:, i]).size for i in range(p))
    if resolution < per_dim:
        raise InvalidArgumentError(f"resolution {resolution} is coarser than the {per_dim}-point grid")
    lattice = uniform_grid(p, resolution)
    values = q.regressor.predict_batch(lattice)
    best = int(np.argmax(values))
    return lattice[best].copy(), float(values[best])


def _build_qcurve(
    x: BeliefState,
    gamma: float,
    plan: SamplingPlan,
    basis: BasisSet,
    noise: NoiseModel,
    fit_spec: RegressionSpec,
    epoch: int,
    path: tuple,
    continuation: Optional[Continuation],
    child_sup: Optional[Callable],
):
    """Shared grid loop of the one-step and nested estimators.

    Exactly one of ``continuation`` (batch value function, may be None for
    -inf) or ``child_sup`` (per-posterior recursive sup) drives the max term.
    """
    if not (gamma >= 0.0 and np.isfinite(gamma)):
        raise InvalidArgumentError(f"gamma must be non-negative, got {gamma}")
    grid = plan.grid
    n_grid, n_samp = grid.shape[0], plan.n_samples
    j_dim, k_dim = x.dims

    stop_vals = np.empty((n_grid, n_samp))  # m_alpha(u_i, y_k)
    ups = np.empty(n_grid)
    post_states: list[BeliefState] = []
    for i in range(n_grid):
        u = grid[i]
        phi = eval_phi(basis, u)
        psi = eval_psi(basis, u)
        if phi.size != j_dim or psi.size != k_dim:
            raise InvalidArgumentError("belief state dimensions do not match the basis")
        sv_a, q_a = _quad_form(x.sigma_alpha, phi)
        sv_b, q_b = _quad_form(x.sigma_beta, psi)
        m_a = float(x.mu_alpha @ phi)
        m_b = float(x.mu_beta @ psi)
        var_a = q_a + noise.sigma_h**2
        var_b = q_b + noise.sigma_t**2
        ups[i] = upsilon(m_b, var_b)

        gen = _point_stream(plan.seed, epoch, path, u)
        z_h = gen.standard_normal(n_samp)
        z_t = gen.standard_normal(n_samp)
        h = m_a + math.sqrt(var_a) * z_h
        t = m_b + math.sqrt(var_b) * z_t

        # rank-1 posterior family: covariances are shared across the samples
        gain_a = sv_a / var_a
        gain_b = sv_b / var_b
        sig_a1 = x.sigma_alpha - np.outer(sv_a, sv_a) / var_a
        sig_a1 = 0.5 * (sig_a1 + sig_a1.T)
        sig_b1 = x.sigma_beta - np.outer(sv_b, sv_b) / var_b
        sig_b1 = 0.5 * (sig_b1 + sig_b1.T)
        mu_a1 = x.mu_alpha[None, :] + np.outer(h - m_a, gain_a)
        mu_b1 = x.mu_beta[None, :] + np.outer(t - m_b, gain_b)

        stop_vals[i] = mu_a1 @ phi
        post_states.extend(
            BeliefState(mu_a1[k], sig_a1, mu_b1[k], sig_b1) for k in range(n_samp)
        )

    if child_sup is not None:
        cont_vals = child_sup(grid, post_states)
    elif continuation is not None:
        cont_vals = np.asarray(continuation(post_states), dtype=float)
        if cont_vals.shape != (n_grid * n_samp,):
            raise InvalidArgumentError(
                f"continuation returned shape {cont_vals.shape}, expected ({n_grid * n_samp},)"
            )
    else:
        cont_vals = None

    if cont_vals is None:
        best = stop_vals
    else:
        best = np.maximum(stop_vals, cont_vals.reshape(n_grid, n_samp))
    p_vals = -gamma * ups + best.mean(axis=1)
    if not np.all(np.isfinite(p_vals)):
        bad = int(np.flatnonzero(~np.isfinite(p_vals))[0])
        raise NumericalDegeneracyError(f"non-finite Q-value at grid index {bad} (u={grid[bad].tolist()})")
    if n_samp > 1:
        se = best.std(axis=1, ddof=1) / math.sqrt(n_samp)
    else:
        se = np.zeros(n_grid)

    regressor = fit(fit_spec, grid, p_vals, seed=plan.seed)
    return QCurve(regressor=regressor, grid=grid.copy(), raw_values=p_vals, point_se=se)


def lambda_estimate(
    x: BeliefState,
    continuation: Optional[Continuation],
    gamma: float,
    plan: SamplingPlan,
    basis: BasisSet,
    noise: NoiseModel,
    fit_spec: RegressionSpec,
    *,
    epoch: int = 0,
    substream: tuple = (),
) -> QCurve:
    """One-step Q-value curve; ``continuation=None`` means -inf (stop next)."""
    return _build_qcurve(
        x, gamma, plan, basis, noise, fit_spec, epoch, tuple(substream), continuation, None
    )


def otf(
    x: BeliefState,
    depth: int,
    terminal: Optional[Continuation],
    gamma: float,
    plan: SamplingPlan,
    basis: BasisSet,
    noise: NoiseModel,
    fit_spec: RegressionSpec,
    *,
    epoch: int = 0,
    substream: tuple = (),
    max_depth: int = MAX_OTF_DEPTH,
    argmax_resolution: Optional[int] = None,
) -> QCurve:
    """Nested Monte Carlo Q-value evaluation of depth ``depth``.

    Depth 1 delegates to :func:`lambda_estimate`; deeper levels compute the
    continuation at each sampled posterior as the sup of a recursively built
    child curve.  Cost grows as (|grid| * n_samples)**depth, hence the hard
    depth limit.
    """
    if depth < 1:
        raise InvalidArgumentError("depth must be >= 1")
    if depth > max_depth:
        raise BudgetExceededError(f"otf depth {depth} exceeds the hard limit {max_depth}")
    if depth == 1:
        return lambda_estimate(
            x, terminal, gamma, plan, basis, noise, fit_spec, epoch=epoch, substream=substream
        )
    resolution = argmax_resolution or default_argmax_resolution(plan.dim_control)

    def child_sup(grid: np.ndarray, post_states: list[BeliefState]) -> np.ndarray:
        n_samp = plan.n_samples
        out = np.empty(len(post_states))
        for i in range(grid.shape[0]):
            parent_key = tuple(_float_bits(c) for c in grid[i])
            for k in range(n_samp):
                child = otf(
                    post_states[i * n_samp + k],
                    depth - 1,
                    terminal,
                    gamma,
                    plan,
                    basis,
                    noise,
                    fit_spec,
                    epoch=epoch,
                    substream=tuple(substream) + parent_key + (k,),
                    max_depth=max_depth,
                    argmax_resolution=resolution,
                )
                out[i * n_samp + k] = argmax_qcurve(child, resolution)[1]
        return out

    return _build_qcurve(
        x, gamma, plan, basis, noise, fit_spec, epoch, tuple(substream), None, child_sup
    )

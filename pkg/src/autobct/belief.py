"""Gaussian belief state over the score/cost coefficients and its filter.

The belief is the 4-tuple (mu_alpha, Sigma_alpha, mu_beta, Sigma_beta) of
posterior means and covariances of the basis coefficients.  Observing a
(score, cost) pair at a control point updates both blocks by one conjugate
Gaussian step.  The covariance step uses the inversion-free rank-1 downdate

    Sigma' = Sigma - Sigma phi phi^T Sigma / (phi^T Sigma phi + sigma^2)

which handles degenerate Sigma (truth states) without special-casing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, eval_phi, eval_psi
from .errors import InvalidArgumentError, InvalidObservationError, NumericalDegeneracyError

_SYMMETRY_TOL = 1e-12
_EIG_TOL = 1e-10
_CLAMP_FLAG = 1e-8


@dataclass(frozen=True, slots=True)
class NoiseModel:
    """Constant observation noise levels (standard deviations)."""

    sigma_h: float
    sigma_t: float

    def __post_init__(self):
        if not (self.sigma_h > 0.0 and np.isfinite(self.sigma_h)):
            raise InvalidArgumentError("sigma_h must be strictly positive")
        if not (self.sigma_t > 0.0 and np.isfinite(self.sigma_t)):
            raise InvalidArgumentError("sigma_t must be strictly positive")


@dataclass(frozen=True, slots=True)
class BeliefState:
    """Immutable Gaussian filter state; arrays are treated as read-only.

    Hot paths construct states directly; use :meth:`create` at API boundaries
    to validate symmetry and positive semi-definiteness.
    """

    mu_alpha: np.ndarray
    sigma_alpha: np.ndarray
    mu_beta: np.ndarray
    sigma_beta: np.ndarray

    @classmethod
    def create(cls, mu_alpha, sigma_alpha, mu_beta, sigma_beta) -> "BeliefState":
        mu_a = np.asarray(mu_alpha, dtype=float).reshape(-1).copy()
        mu_b = np.asarray(mu_beta, dtype=float).reshape(-1).copy()
        sig_a = _check_cov(np.asarray(sigma_alpha, dtype=float), mu_a.size, "sigma_alpha")
        sig_b = _check_cov(np.asarray(sigma_beta, dtype=float), mu_b.size, "sigma_beta")
        return cls(mu_a, sig_a, mu_b, sig_b)

    @property
    def dims(self) -> tuple[int, int]:
        return self.mu_alpha.size, self.mu_beta.size

    def is_truth(self, tol: float = 0.0) -> bool:
        """Both covariances identically zero: nothing left to learn."""
        return bool(np.all(np.abs(self.sigma_alpha) <= tol) and np.all(np.abs(self.sigma_beta) <= tol))

    def to_dict(self) -> dict:
        j, k = self.dims
        return {
            "J": j,
            "K": k,
            "mu_alpha": self.mu_alpha.tolist(),
            "sigma_alpha": self.sigma_alpha.tolist(),
            "mu_beta": self.mu_beta.tolist(),
            "sigma_beta": self.sigma_beta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BeliefState":
        return cls.create(d["mu_alpha"], d["sigma_alpha"], d["mu_beta"], d["sigma_beta"])


@dataclass(frozen=True, slots=True)
class PredictiveMoments:
    """One-step predictive mean/std of the score and cost observations."""

    m_alpha: float
    s_alpha: float
    m_beta: float
    s_beta: float


def _check_cov(sigma: np.ndarray, dim: int, label: str) -> np.ndarray:
    if sigma.shape != (dim, dim):
        raise InvalidArgumentError(f"{label} has shape {sigma.shape}, expected ({dim}, {dim})")
    if not np.all(np.isfinite(sigma)):
        raise InvalidArgumentError(f"{label} has non-finite entries")
    asym = np.max(np.abs(sigma - sigma.T)) if dim else 0.0
    if asym > _SYMMETRY_TOL:
        raise InvalidArgumentError(f"{label} asymmetry {asym:.3e} exceeds {_SYMMETRY_TOL:.0e}")
    sym = 0.5 * (sigma + sigma.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min(initial=0.0) < -_EIG_TOL:
        raise InvalidArgumentError(f"{label} has eigenvalue {eigvals.min():.3e} below -{_EIG_TOL:.0e}")
    if np.any(eigvals < 0.0):
        clamp = -eigvals.min()
        if clamp > _CLAMP_FLAG:
            warnings.warn(f"{label}: clamped eigenvalue deficit {clamp:.3e} exceeds {_CLAMP_FLAG:.0e}")
        eigvals = np.clip(eigvals, 0.0, None)
        sym = (eigvecs * eigvals) @ eigvecs.T
        sym = 0.5 * (sym + sym.T)
    return sym


def _quad_form(sigma: np.ndarray, vec: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (Sigma @ vec, vec^T Sigma vec) with a tolerance on tiny negatives."""
    sv = sigma @ vec
    q = float(vec @ sv)
    if q < -_EIG_TOL:
        raise NumericalDegeneracyError(f"negative predictive variance {q:.3e}")
    return sv, max(q, 0.0)


def _update_block(mu, sigma, vec, noise_sd, obs):
    sv, q = _quad_form(sigma, vec)
    denom = q + noise_sd * noise_sd
    gain = sv / denom
    mu1 = mu + gain * (obs - float(mu @ vec))
    sigma1 = sigma - np.outer(sv, sv) / denom
    sigma1 = 0.5 * (sigma1 + sigma1.T)  # suppress drift from repeated rank-1 updates
    return mu1, sigma1


def kalman_update(x: BeliefState, u, h: float, t: float, basis: BasisSet, noise: NoiseModel) -> BeliefState:
    """One conjugate filter step after observing score ``h`` and cost ``t`` at ``u``."""
    if not (np.isfinite(h) and np.isfinite(t)):
        raise InvalidObservationError(f"non-finite observation h={h}, t={t}")
    phi = eval_phi(basis, u)
    psi = eval_psi(basis, u)
    if phi.size != x.mu_alpha.size or psi.size != x.mu_beta.size:
        raise InvalidArgumentError("belief state dimensions do not match the basis")
    mu_a, sig_a = _update_block(x.mu_alpha, x.sigma_alpha, phi, noise.sigma_h, float(h))
    mu_b, sig_b = _update_block(x.mu_beta, x.sigma_beta, psi, noise.sigma_t, float(t))
    return BeliefState(mu_a, sig_a, mu_b, sig_b)


def predictive_moments(x: BeliefState, u, basis: BasisSet, noise: NoiseModel) -> PredictiveMoments:
    """Moments of the next (h, t) observation at control ``u``."""
    phi = eval_phi(basis, u)
    psi = eval_psi(basis, u)
    if phi.size != x.mu_alpha.size or psi.size != x.mu_beta.size:
        raise InvalidArgumentError("belief state dimensions do not match the basis")
    _, qa = _quad_form(x.sigma_alpha, phi)
    _, qb = _quad_form(x.sigma_beta, psi)
    return PredictiveMoments(
        m_alpha=float(x.mu_alpha @ phi),
        s_alpha=float(np.sqrt(qa + noise.sigma_h**2)),
        m_beta=float(x.mu_beta @ psi),
        s_beta=float(np.sqrt(qb + noise.sigma_t**2)),
    )


def sample_transition(x: BeliefState, u, basis: BasisSet, noise: NoiseModel, rng: np.random.Generator):
    """Draw (h, t) from the predictive normals and return the updated state."""
    mom = predictive_moments(x, u, basis, noise)
    h = mom.m_alpha + mom.s_alpha * rng.standard_normal()
    t = mom.m_beta + mom.s_beta * rng.standard_normal()
    return h, t, kalman_update(x, u, h, t, basis, noise)


def posterior_precision_form(x: BeliefState, u, h: float, t: float, basis: BasisSet, noise: NoiseModel) -> BeliefState:
    """Filter step via precision addition; requires invertible covariances.

    Numerically inferior to :func:`kalman_update` (it inverts matrices) but
    useful as an independent cross-check of the covariance recursion.
    """
    phi = eval_phi(basis, u)
    psi = eval_psi(basis, u)

    def block(mu, sigma, vec, sd, obs):
        prec1 = np.linalg.inv(sigma) + np.outer(vec, vec) / sd**2
        sigma1 = np.linalg.inv(prec1)
        sigma1 = 0.5 * (sigma1 + sigma1.T)
        mu1 = mu + sigma1 @ vec * (obs - float(vec @ mu)) / sd**2
        return mu1, sigma1

    mu_a, sig_a = block(x.mu_alpha, x.sigma_alpha, phi, noise.sigma_h, float(h))
    mu_b, sig_b = block(x.mu_beta, x.sigma_beta, psi, noise.sigma_t, float(t))
    return BeliefState(mu_a, sig_a, mu_b, sig_b)

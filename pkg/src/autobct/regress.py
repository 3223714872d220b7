"""Regression backends for Q-value curves and the value surface.

Four kinds are supported: GCV smoothing splines for one control, thin-plate
splines for two, random-forest ensembles for the high-dimensional value
surface, and polynomial ridge as a generic fallback.  A fitted model retains
its training pairs so that (spec, seed, pairs) fully re-derives it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve
from sklearn.ensemble import RandomForestRegressor

from .errors import InsufficientDataError, InvalidArgumentError

KINDS = ("smoothing-spline-1d", "thin-plate-2d", "tree-ensemble", "polynomial-ridge")

_MIN_SAMPLES = {
    "smoothing-spline-1d": 5,
    "thin-plate-2d": 6,
    "tree-ensemble": 1,  # a value surface may be trained on a single state
    "polynomial-ridge": 2,
}


@dataclass(frozen=True)
class RegressionSpec:
    """Backend choice plus kind-specific settings.

    hyper keys by kind:
      smoothing-spline-1d: lam (None selects smoothness by GCV)
      thin-plate-2d:       smoothing (None selects by GCV over a log grid)
      tree-ensemble:       n_trees (100), max_features (ceil(d/3)), n_jobs (1)
      polynomial-ridge:    degree (3), lam (0.0)
    """

    kind: str
    hyper: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown regression kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "hyper", dict(self.hyper))

    def describe(self) -> dict:
        return {"kind": self.kind, "hyper": dict(self.hyper)}

    @classmethod
    def from_description(cls, desc: dict) -> "RegressionSpec":
        return cls(kind=desc["kind"], hyper=desc.get("hyper", {}))


def default_qfit_spec(dim_control: int) -> RegressionSpec:
    """Per-dimension default for fitting Q-value curves over controls."""
    if dim_control == 1:
        return RegressionSpec("smoothing-spline-1d")
    if dim_control == 2:
        return RegressionSpec("thin-plate-2d")
    return RegressionSpec("polynomial-ridge", {"degree": 3, "lam": 1e-8})


def default_vfit_spec() -> RegressionSpec:
    """Default for fitting the value surface over belief-state features."""
    return RegressionSpec("tree-ensemble", {"n_trees": 100})


@dataclass
class FittedRegressor:
    """A fitted backend plus the retained training pairs that re-derive it."""

    spec: RegressionSpec
    seed: int
    xs: np.ndarray
    ys: np.ndarray
    _model: Any

    @property
    def n_features(self) -> int:
        return self.xs.shape[1]

    def predict(self, x) -> float:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if arr.ndim != 1 or arr.size != self.n_features:
            raise InvalidArgumentError(f"feature vector has shape {arr.shape}, expected ({self.n_features},)")
        return float(self.predict_batch(arr[None, :])[0])

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidArgumentError(f"feature matrix has shape {X.shape}, expected (*, {self.n_features})")
        return self._model(X)


def fit(spec: RegressionSpec, xs, ys, seed: int) -> FittedRegressor:
    """Fit a squared-error regressor of ``ys`` on ``xs``."""
    X = np.asarray(xs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(ys, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("training data has non-finite entries")
    n, d = X.shape
    if n < _MIN_SAMPLES[spec.kind]:
        raise InsufficientDataError(f"{spec.kind} needs >= {_MIN_SAMPLES[spec.kind]} samples, got {n}")

    if spec.kind == "smoothing-spline-1d":
        if d != 1:
            raise InvalidArgumentError(f"smoothing-spline-1d requires 1 feature, got {d}")
        model = _fit_spline_1d(X[:, 0], y, spec.hyper)
    elif spec.kind == "thin-plate-2d":
        if d != 2:
            raise InvalidArgumentError(f"thin-plate-2d requires 2 features, got {d}")
        model = _fit_thin_plate(X, y, spec.hyper)
    elif spec.kind == "tree-ensemble":
        model = _fit_forest(X, y, spec.hyper, seed)
    else:
        model = _fit_poly_ridge(X, y, spec.hyper)

    return FittedRegressor(spec=spec, seed=int(seed), xs=X.copy(), ys=y.copy(), _model=model)


def refit(model: FittedRegressor) -> FittedRegressor:
    """Re-derive a regressor from its retained (spec, seed, training pairs)."""
    return fit(model.spec, model.xs, model.ys, model.seed)


def _dedupe_sorted(x: np.ndarray, y: np.ndarray):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    ux, inverse = np.unique(xs, return_inverse=True)
    if ux.size == xs.size:
        return xs, ys
    uy = np.zeros_like(ux)
    counts = np.zeros_like(ux)
    np.add.at(uy, inverse, ys)
    np.add.at(counts, inverse, 1.0)
    return ux, uy / counts


# Demmler-Reinsch decompositions keyed by the abscissa grid; Q-curve fitting
# reuses the same control grid thousands of times per map build
_SPLINE_BASIS_CACHE: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
_SPLINE_LAM_GRID = np.logspace(-10.0, 8.0, 91)


def _natural_spline_eigensystem(x: np.ndarray):
    """Eigendecomposition of the natural-cubic roughness matrix K = Q R^-1 Q^T."""
    key = x.tobytes()
    cached = _SPLINE_BASIS_CACHE.get(key)
    if cached is not None:
        return cached
    n = x.size
    h = np.diff(x)
    q = np.zeros((n, n - 2))
    r = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        q[j - 1, j - 1] = 1.0 / h[j - 1]
        q[j, j - 1] = -1.0 / h[j - 1] - 1.0 / h[j]
        q[j + 1, j - 1] = 1.0 / h[j]
        r[j - 1, j - 1] = (h[j - 1] + h[j]) / 3.0
        if j < n - 2:
            r[j - 1, j] = h[j] / 6.0
            r[j, j - 1] = h[j] / 6.0
    rough = q @ np.linalg.solve(r, q.T)
    rough = 0.5 * (rough + rough.T)
    eigvals, eigvecs = np.linalg.eigh(rough)
    eigvals = np.clip(eigvals, 0.0, None)
    if len(_SPLINE_BASIS_CACHE) > 64:
        _SPLINE_BASIS_CACHE.clear()
    _SPLINE_BASIS_CACHE[key] = (eigvals, eigvecs)
    return eigvals, eigvecs


def _fit_spline_1d(x, y, hyper):
    ux, uy = _dedupe_sorted(x, y)
    n = ux.size
    if n < _MIN_SAMPLES["smoothing-spline-1d"]:
        raise InsufficientDataError(f"smoothing-spline-1d needs >= 5 distinct abscissas, got {n}")
    eigvals, eigvecs = _natural_spline_eigensystem(ux)
    rotated = eigvecs.T @ uy

    lam = hyper.get("lam")
    if lam is None:
        # generalized cross-validation over a fixed smoothness grid
        shrink = 1.0 / (1.0 + np.outer(_SPLINE_LAM_GRID, eigvals))
        residual_sq = np.sum(((1.0 - shrink) * rotated[None, :]) ** 2, axis=1)
        dof = shrink.sum(axis=1)
        gcv = n * residual_sq / np.maximum(n - dof, 1e-9) ** 2
        lam = float(_SPLINE_LAM_GRID[int(np.argmin(gcv))])
    fitted = eigvecs @ (rotated / (1.0 + lam * eigvals))
    spline = CubicSpline(ux, fitted, bc_type="natural", extrapolate=True)
    return lambda X: np.asarray(spline(X[:, 0]), dtype=float)


def _tps_kernel(r2: np.ndarray) -> np.ndarray:
    # r^2 log r, with the removable singularity at r = 0 set to 0
    out = np.zeros_like(r2)
    pos = r2 > 0.0
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


def _fit_thin_plate(X, y, hyper):
    n = X.shape[0]
    diff = X[:, None, :] - X[None, :, :]
    K = _tps_kernel(np.sum(diff * diff, axis=2))
    P = np.hstack([np.ones((n, 1)), X])
    zeros = np.zeros((3, 3))
    rhs = np.concatenate([y, np.zeros(3)])

    smoothing = hyper.get("smoothing")
    candidates = [float(smoothing)] if smoothing is not None else list(np.logspace(-8, 2, 11))
    best = None
    for lam in candidates:
        system = np.block([[K + lam * np.eye(n), P], [P.T, zeros]])
        try:
            factor = lu_factor(system)
        except np.linalg.LinAlgError:
            continue
        coef = lu_solve(factor, rhs)
        if len(candidates) == 1:
            best = (0.0, coef)
            break
        # GCV over the candidate grid using the influence matrix trace
        eye_rhs = np.vstack([np.eye(n), np.zeros((3, n))])
        influence = (np.hstack([K, P]) @ lu_solve(factor, eye_rhs))
        fitted = K @ coef[:n] + P @ coef[n:]
        dof = float(np.trace(influence))
        denom = max(n - dof, 1e-9) ** 2
        score = n * float(np.sum((y - fitted) ** 2)) / denom
        if best is None or score < best[0]:
            best = (score, coef)
    if best is None:
        raise InvalidArgumentError("thin-plate system is singular for all candidate smoothings")
    coef = best[1]
    c, dvec = coef[:n], coef[n:]
    centers = X.copy()

    def _predict(Q):
        d2 = np.sum((Q[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        return _tps_kernel(d2) @ c + dvec[0] + Q @ dvec[1:]

    return _predict


def _fit_forest(X, y, hyper, seed):
    d = X.shape[1]
    forest = RandomForestRegressor(
        n_estimators=int(hyper.get("n_trees", 100)),
        max_features=int(hyper.get("max_features", math.ceil(d / 3))),
        min_samples_leaf=int(hyper.get("min_samples_leaf", 1)),
        bootstrap=True,
        random_state=int(seed) & 0x7FFFFFFF,
        n_jobs=int(hyper.get("n_jobs", 1)),
    )
    forest.fit(X, y)
    return lambda Q: np.asarray(forest.predict(Q), dtype=float)


def _poly_powers(d: int, degree: int) -> np.ndarray:
    powers = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), total):
            exps = np.zeros(d, dtype=np.int64)
            for idx in combo:
                exps[idx] += 1
            powers.append(exps)
    return np.array(powers)


def _poly_design(X: np.ndarray, powers: np.ndarray) -> np.ndarray:
    return np.prod(X[:, None, :] ** powers[None, :, :], axis=2)


def _fit_poly_ridge(X, y, hyper):
    degree = int(hyper.get("degree", 3))
    lam = float(hyper.get("lam", 0.0))
    if degree < 0 or lam < 0.0:
        raise InvalidArgumentError("polynomial-ridge needs degree >= 0 and lam >= 0")
    powers = _poly_powers(X.shape[1], degree)
    design = _poly_design(X, powers)
    if lam > 0.0:
        # ridge rows leave the intercept column unpenalized
        penalty = math.sqrt(lam) * np.eye(design.shape[1])
        penalty[0, 0] = 0.0
        design_aug = np.vstack([design, penalty])
        target = np.concatenate([y, np.zeros(design.shape[1])])
    else:
        design_aug, target = design, y
    theta = np.linalg.lstsq(design_aug, target, rcond=None)[0]
    return lambda Q: _poly_design(Q, powers) @ theta

"""Belief-state clouds, value iteration, and value-map persistence.

The value surface is learnt over a cloud of belief states: sampled
(mean, covariance) pairs replicated at shrinking covariance scales k/K
(k = 0 gives truths), optionally enriched with states an actual filter run
would visit.  Value iteration fits one regressor per level; level n+1 trains
on targets obtained by maximizing the one-step Q-curve built with level n as
the continuation.

A saved map is a single self-describing .npz archive: versioned metadata,
cloud provenance, and each level's retained training pairs, from which any
backend re-derives the fitted regressors exactly.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .basis import BasisSet, eval_phi, eval_psi
from .belief import BeliefState, NoiseModel, kalman_update
from .errors import IncompatibleMapError, InvalidArgumentError, NumericalDegeneracyError
from .qvalue import Continuation, SamplingPlan, argmax_qcurve, default_argmax_resolution, lambda_estimate
from .regress import FittedRegressor, RegressionSpec, fit

FORMAT_VERSION = 1
FEATURIZATION_VERSION = 1


@lru_cache(maxsize=16)
def _triu_indices(dim: int):
    return np.triu_indices(dim)


def feature_dim(j_dim: int, k_dim: int) -> int:
    return j_dim + k_dim + j_dim * (j_dim + 1) // 2 + k_dim * (k_dim + 1) // 2


def featurize(x: BeliefState) -> np.ndarray:
    """Flatten a state: means, then upper-triangular halves of the covariances."""
    j, k = x.dims
    return np.concatenate(
        [x.mu_alpha, x.mu_beta, x.sigma_alpha[_triu_indices(j)], x.sigma_beta[_triu_indices(k)]]
    )


def unfeaturize(features: np.ndarray, j_dim: int, k_dim: int) -> BeliefState:
    """Inverse of :func:`featurize` for the given dimensions."""
    features = np.asarray(features, dtype=float).reshape(-1)
    if features.size != feature_dim(j_dim, k_dim):
        raise InvalidArgumentError(
            f"feature vector has {features.size} entries, expected {feature_dim(j_dim, k_dim)}"
        )
    pos = 0

    def take(count):
        nonlocal pos
        out = features[pos : pos + count]
        pos += count
        return out

    mu_a = take(j_dim).copy()
    mu_b = take(k_dim).copy()

    def unpack(dim):
        mat = np.zeros((dim, dim))
        mat[_triu_indices(dim)] = take(dim * (dim + 1) // 2)
        return mat + np.triu(mat, 1).T

    return BeliefState(mu_a, unpack(j_dim), mu_b, unpack(k_dim))


def featurize_batch(states: Sequence[BeliefState]) -> np.ndarray:
    if not states:
        return np.empty((0, 0))
    j, k = states[0].dims
    iu_j, iu_k = _triu_indices(j), _triu_indices(k)
    vech_cache: dict[int, np.ndarray] = {}

    def vech(mat, idx):
        # posterior covariances are shared across the samples of a grid point
        cached = vech_cache.get(id(mat))
        if cached is None:
            cached = mat[idx]
            vech_cache[id(mat)] = cached
        return cached

    return np.stack(
        [
            np.concatenate(
                [s.mu_alpha, s.mu_beta, vech(s.sigma_alpha, iu_j), vech(s.sigma_beta, iu_k)]
            )
            for s in states
        ]
    )


@dataclass(frozen=True)
class EnrichmentConfig:
    """Filter-propagation settings: ground-truth shapes walked along a small
    control grid as a full tree to the given depth."""

    n_shapes: int = 20
    depth: int = 3
    grid: tuple = (0.0, 0.5, 1.0)

    def __post_init__(self):
        if self.n_shapes < 0 or self.depth < 0:
            raise InvalidArgumentError("n_shapes and depth must be non-negative")
        if self.n_shapes > 0 and self.depth > 0 and len(self.grid) == 0:
            raise InvalidArgumentError("enrichment grid must be non-empty")


@dataclass(frozen=True)
class CloudConfig:
    """Sampling laws for the cloud.

    Means are Gaussian around the given centers; covariances are Wishart-style
    draws whose expectation is ``cov_alpha``/``cov_beta`` (identity when not
    given) times the scalar multipliers.  Centering these laws on the priors
    one intends to run with puts the learned surface where runs will live.
    """

    n_centers: int = 500
    k_scales: int = 4
    mean_alpha: Optional[Sequence[float]] = None  # defaults to zeros
    mean_beta: Optional[Sequence[float]] = None
    mean_spread: float = 1.0
    cov_alpha: Optional[Sequence[Sequence[float]]] = None  # Wishart scale, defaults to identity
    cov_beta: Optional[Sequence[Sequence[float]]] = None
    cov_scale_alpha: float = 1.0
    cov_scale_beta: float = 1.0
    enrichment: Optional[EnrichmentConfig] = EnrichmentConfig()

    def __post_init__(self):
        if self.n_centers < 1:
            raise InvalidArgumentError("n_centers must be >= 1")
        if self.k_scales < 0:
            raise InvalidArgumentError("k_scales must be >= 0")

    def describe(self) -> dict:
        enrich = None
        if self.enrichment is not None:
            enrich = {
                "n_shapes": self.enrichment.n_shapes,
                "depth": self.enrichment.depth,
                "grid": [list(np.atleast_1d(g)) for g in self.enrichment.grid],
            }
        return {
            "n_centers": self.n_centers,
            "k_scales": self.k_scales,
            "mean_alpha": None if self.mean_alpha is None else list(self.mean_alpha),
            "mean_beta": None if self.mean_beta is None else list(self.mean_beta),
            "mean_spread": self.mean_spread,
            "cov_alpha": None if self.cov_alpha is None else np.asarray(self.cov_alpha).tolist(),
            "cov_beta": None if self.cov_beta is None else np.asarray(self.cov_beta).tolist(),
            "cov_scale_alpha": self.cov_scale_alpha,
            "cov_scale_beta": self.cov_scale_beta,
            "enrichment": enrich,
        }


@dataclass(frozen=True)
class Cloud:
    states: tuple
    truth_count: int
    provenance: dict


def _matrix_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def _sample_cov(
    rng: np.random.Generator,
    dim: int,
    scale: float,
    scale_matrix: Optional[np.ndarray] = None,
    max_tries: int = 100,
) -> np.ndarray:
    """Wishart-style PSD draw with ``dim`` degrees of freedom.

    The expectation is ``scale * scale_matrix`` (identity when no matrix is
    given); a singular scale matrix confines draws to its support.
    """
    root = None if scale_matrix is None else _matrix_sqrt(np.asarray(scale_matrix, dtype=float))
    for _ in range(max_tries):
        a = rng.standard_normal((dim, dim))
        if root is not None:
            a = root @ a
        cov = (a @ a.T) * (scale / dim)
        cov = 0.5 * (cov + cov.T)
        if np.all(np.isfinite(cov)) and np.linalg.eigvalsh(cov).min() >= -1e-10:
            return cov
    raise NumericalDegeneracyError(f"no valid covariance sample in {max_tries} tries")


def _shape_coefficients(rng: np.random.Generator, basis: BasisSet, terms: str) -> np.ndarray:
    """Random concave quadratic (peak uniform in [0.1, 0.9]) projected on the basis."""
    p = basis.dim_control
    peak_loc = rng.uniform(0.1, 0.9, size=p)
    curvature = rng.uniform(0.5, 2.0, size=p)
    peak_val = rng.uniform(0.4, 1.1) if terms == "score" else rng.uniform(0.2, 1.5)

    lattice = np.linspace(0.0, 1.0, 33)
    mesh = np.meshgrid(*([lattice] * p), indexing="ij")
    points = np.stack(mesh, axis=-1).reshape(-1, p)
    values = peak_val - np.sum(curvature[None, :] * (points - peak_loc[None, :]) ** 2, axis=1)
    evaluate = eval_phi if terms == "score" else eval_psi
    design = np.stack([evaluate(basis, pt) for pt in points])
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    return coeffs


def _enrich(
    cloud: list,
    config: EnrichmentConfig,
    basis: BasisSet,
    noise: NoiseModel,
    rng: np.random.Generator,
    root_mu_a: np.ndarray,
    root_mu_b: np.ndarray,
    cov_sampler,
) -> int:
    grid_points = [np.atleast_1d(np.asarray(g, dtype=float)) for g in config.grid]
    added = 0
    for _ in range(config.n_shapes):
        alpha_true = _shape_coefficients(rng, basis, "score")
        beta_true = _shape_coefficients(rng, basis, "cost")
        cov_a, cov_b = cov_sampler()
        root = BeliefState(root_mu_a.copy(), cov_a, root_mu_b.copy(), cov_b)
        frontier = [root]
        for _ in range(config.depth):
            next_frontier = []
            for state in frontier:
                for u in grid_points:
                    h = float(alpha_true @ eval_phi(basis, u)) + noise.sigma_h * rng.standard_normal()
                    t = float(beta_true @ eval_psi(basis, u)) + noise.sigma_t * rng.standard_normal()
                    child = kalman_update(state, u, h, t, basis, noise)
                    cloud.append(child)
                    next_frontier.append(child)
                    added += 1
            frontier = next_frontier
    return added


def build_cloud(config: CloudConfig, basis: BasisSet, noise: NoiseModel, seed: int) -> Cloud:
    """Sample the learning cloud: scaled covariance families plus enrichment."""
    j_dim, k_dim = basis.n_score, basis.n_cost
    mean_a = np.zeros(j_dim) if config.mean_alpha is None else np.asarray(config.mean_alpha, dtype=float)
    mean_b = np.zeros(k_dim) if config.mean_beta is None else np.asarray(config.mean_beta, dtype=float)
    if mean_a.size != j_dim or mean_b.size != k_dim:
        raise InvalidArgumentError("cloud mean centers do not match the basis dimensions")

    cov_a_scale = None if config.cov_alpha is None else np.asarray(config.cov_alpha, dtype=float)
    cov_b_scale = None if config.cov_beta is None else np.asarray(config.cov_beta, dtype=float)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0xC10D])))

    def sample_cov_pair():
        return (
            _sample_cov(rng, j_dim, config.cov_scale_alpha, cov_a_scale),
            _sample_cov(rng, k_dim, config.cov_scale_beta, cov_b_scale),
        )

    states: list[BeliefState] = []
    for _ in range(config.n_centers):
        mu_a = mean_a + config.mean_spread * rng.standard_normal(j_dim)
        mu_b = mean_b + config.mean_spread * rng.standard_normal(k_dim)
        cov_a, cov_b = sample_cov_pair()
        scales = [0.0] if config.k_scales == 0 else [k / config.k_scales for k in range(config.k_scales + 1)]
        for scale in scales:
            states.append(BeliefState(mu_a.copy(), scale * cov_a, mu_b.copy(), scale * cov_b))
    truth_count = config.n_centers

    enriched = 0
    if config.enrichment is not None and config.enrichment.n_shapes > 0 and config.enrichment.depth > 0:
        enriched = _enrich(states, config.enrichment, basis, noise, rng, mean_a, mean_b, sample_cov_pair)

    provenance = {
        "config": config.describe(),
        "seed": int(seed),
        "size": len(states),
        "truth_count": truth_count,
        "enriched": enriched,
    }
    return Cloud(states=tuple(states), truth_count=truth_count, provenance=provenance)


class _LevelFunction:
    """Batch continuation: featurize the states, predict with one level."""

    def __init__(self, regressor: FittedRegressor, damping: float = 0.0):
        self.regressor = regressor
        self.damping = float(damping)

    def __call__(self, states: Sequence[BeliefState]) -> np.ndarray:
        values = self.regressor.predict_batch(featurize_batch(states))
        if self.damping:
            values = (1.0 - self.damping) * values
        return values


@dataclass
class ValueMap:
    """Fitted value-surface levels V_1..V_N plus build metadata/diagnostics."""

    levels: list[FittedRegressor]
    metadata: dict
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level_function(self, level: int = -1, damping: float = 0.0) -> Continuation:
        return _LevelFunction(self.levels[level], damping)

    def predict_level(self, level: int, states: Sequence[BeliefState]) -> np.ndarray:
        return self.levels[level].predict_batch(featurize_batch(states))


def build_value_map(
    cloud: Cloud,
    depth: int,
    gamma: float,
    plan: SamplingPlan,
    basis: BasisSet,
    noise: NoiseModel,
    qfit: RegressionSpec,
    vfit: RegressionSpec,
    *,
    argmax_resolution: Optional[int] = None,
    threads: int = 1,
) -> ValueMap:
    """Run ``depth`` sweeps of the value-iteration operator over the cloud."""
    if depth < 1:
        raise InvalidArgumentError("depth must be >= 1")
    if len(cloud.states) == 0:
        raise InvalidArgumentError("cloud is empty")
    resolution = argmax_resolution or default_argmax_resolution(basis.dim_control)
    features = featurize_batch(cloud.states)

    levels: list[FittedRegressor] = []
    diagnostics: list[dict] = []
    continuation: Optional[Continuation] = None
    for level in range(1, depth + 1):

        def one_state(idx_state):
            idx, state = idx_state
            try:
                curve = lambda_estimate(
                    state, continuation, gamma, plan, basis, noise, qfit,
                    epoch=level, substream=(idx,),
                )
                u_best, q_best = argmax_qcurve(curve, resolution)
            except Exception as exc:
                raise RuntimeError(f"value-map level {level} failed at cloud state {idx}") from exc
            nearest = int(np.argmin(np.sum((curve.grid - u_best[None, :]) ** 2, axis=1)))
            return q_best, float(curve.point_se[nearest])

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one_state, enumerate(cloud.states)))
        else:
            results = [one_state(item) for item in enumerate(cloud.states)]

        targets = np.array([r[0] for r in results])
        ses = np.array([r[1] for r in results])
        regressor = fit(vfit, features, targets, seed=plan.seed)
        if not np.all(np.isfinite(regressor.predict_batch(features))):
            raise NumericalDegeneracyError(f"level {level} predicts non-finite values on its cloud")
        levels.append(regressor)
        diagnostics.append({"level": level, "targets": targets, "point_se": ses})
        continuation = _LevelFunction(regressor)

    metadata = {
        "format_version": FORMAT_VERSION,
        "featurization_version": FEATURIZATION_VERSION,
        "gamma": float(gamma),
        "sigma_h": noise.sigma_h,
        "sigma_t": noise.sigma_t,
        "dim_control": basis.dim_control,
        "depth": depth,
        "basis": basis.describe(),
        "grid": plan.grid.tolist(),
        "n_samples": plan.n_samples,
        "seed": plan.seed,
        "argmax_resolution": resolution,
        "qfit": qfit.describe(),
        "vfit": vfit.describe(),
        "provenance": cloud.provenance,
    }
    return ValueMap(levels=levels, metadata=metadata, diagnostics=diagnostics)


def save_map(value_map: ValueMap, path) -> None:
    """Write the self-describing archive (metadata + retained training pairs)."""
    payload = {"metadata": json.dumps(value_map.metadata)}
    for i, level in enumerate(value_map.levels):
        payload[f"level{i}_features"] = level.xs
        payload[f"level{i}_targets"] = level.ys
        if i < len(value_map.diagnostics):
            payload[f"level{i}_se"] = value_map.diagnostics[i]["point_se"]
    np.savez_compressed(path, **payload)


def check_compatible(
    metadata: dict,
    *,
    gamma: Optional[float] = None,
    basis: Optional[BasisSet] = None,
    allow_gamma_mismatch: bool = False,
) -> None:
    if basis is not None:
        if metadata["dim_control"] != basis.dim_control:
            raise IncompatibleMapError(
                f"map built for {metadata['dim_control']} controls, problem has {basis.dim_control}"
            )
        if metadata["basis"] != basis.describe():
            raise IncompatibleMapError(
                f"map basis {metadata['basis']} does not match problem basis {basis.describe()}"
            )
    if gamma is not None and not allow_gamma_mismatch:
        if abs(metadata["gamma"] - gamma) > 1e-12:
            raise IncompatibleMapError(
                f"map built with gamma={metadata['gamma']}, run configured with gamma={gamma}"
            )


def load_map(
    path,
    *,
    gamma: Optional[float] = None,
    basis: Optional[BasisSet] = None,
    allow_gamma_mismatch: bool = False,
) -> ValueMap:
    """Load an archive and re-derive every level from its retained pairs."""
    with np.load(path, allow_pickle=False) as archive:
        metadata = json.loads(str(archive["metadata"]))
        if metadata.get("format_version") != FORMAT_VERSION:
            raise IncompatibleMapError(
                f"map format version {metadata.get('format_version')} != supported {FORMAT_VERSION}"
            )
        if metadata.get("featurization_version") != FEATURIZATION_VERSION:
            raise IncompatibleMapError("map uses an unsupported featurization version")
        check_compatible(metadata, gamma=gamma, basis=basis, allow_gamma_mismatch=allow_gamma_mismatch)
        vfit = RegressionSpec.from_description(metadata["vfit"])
        levels = []
        diagnostics = []
        for i in range(metadata["depth"]):
            features = archive[f"level{i}_features"]
            targets = archive[f"level{i}_targets"]
            levels.append(fit(vfit, features, targets, seed=metadata["seed"]))
            diag = {"level": i + 1, "targets": targets}
            key = f"level{i}_se"
            if key in archive:
                diag["point_se"] = archive[key]
            diagnostics.append(diag)
    return ValueMap(levels=levels, metadata=metadata, diagnostics=diagnostics)

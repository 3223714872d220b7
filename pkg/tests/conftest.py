import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from autobct.basis import BasisSet, default_basis_1d, eval_phi
from autobct.belief import BeliefState, NoiseModel
from autobct.controller import ControlMapping, ProblemSpec, Transform
from autobct.oracle import AnalyticOracle
from autobct.qvalue import SamplingPlan
from autobct.regress import RegressionSpec
from autobct.valuemap import CloudConfig, EnrichmentConfig, build_cloud, build_value_map


def oracle_basis_1d():
    """Degree-11 score family plus a linear cost family for analytic truths.

    Rich enough to hold a steep saturating curve that a cubic surrogate can
    only approximate, mirroring a real trainer's model misspecification.
    """
    return BasisSet(1, tuple((k,) for k in range(12)), ((0,), (1,)))


def saturating_score_coefficients():
    """Monotone-saturating truth with max 0.99, through the observed points.

    Least-squares projection of 0.990054 - 0.440054 exp(-9u) onto the
    degree-11 family; strictly increasing on [0, 1], maximum 0.990001.
    """
    b = 0.44 / (1.0 - math.exp(-9.0))
    c = 0.99 + b * math.exp(-9.0)
    grid = np.linspace(0.0, 1.0, 401)
    truth = c - b * np.exp(-9.0 * grid)
    design = np.stack([eval_phi(oracle_basis_1d(), u) for u in grid])
    coeffs, *_ = np.linalg.lstsq(design, truth, rcond=None)
    return coeffs


def synthetic_problem(epsilon=0.0, replicates=1):
    """The 1D random-forest tuning preset: flat-ish score prior, pessimistic cost."""
    basis = default_basis_1d()
    prior = BeliefState.create(
        [0.4, 0.1, -0.2, 0.1], np.eye(4), [1.0, 1.0, 2.0, 2.0], np.diag([0.64, 4.0, 4.0, 4.0])
    )
    return ProblemSpec(
        gamma=0.16,
        epsilon=epsilon,
        noise=NoiseModel(0.05, 0.1),
        basis=basis,
        prior=prior,
        score_transform=Transform("affine", 0.5, 1.0),
        cost_transform=Transform("affine", 0.0, 0.6),
        control_maps=(ControlMapping("linear-int", 1, 100, "n_trees"),),
        replicates=replicates,
    )


def synthetic_oracle(spec, noise_h=None, noise_t=None):
    alpha_true = saturating_score_coefficients()
    beta_true = np.array([0.47, 0.8])  # cost 0.07 + 0.8 u in transformed units
    return AnalyticOracle(
        alpha_true,
        beta_true,
        oracle_basis_1d(),
        spec.noise.sigma_h if noise_h is None else noise_h,
        spec.noise.sigma_t if noise_t is None else noise_t,
        spec.score_transform,
        spec.cost_transform,
    )


def quick_map(spec, depth=2, seed=0, n_centers=30, n_samples=8, grid_points=21):
    cloud = build_cloud(
        CloudConfig(
            n_centers=n_centers,
            k_scales=4,
            mean_alpha=spec.prior.mu_alpha,
            mean_beta=spec.prior.mu_beta,
            enrichment=EnrichmentConfig(n_shapes=4, depth=2, grid=(0.0, 0.5, 1.0)),
        ),
        spec.basis,
        spec.noise,
        seed=seed,
    )
    plan = SamplingPlan(np.linspace(0, 1, grid_points), n_samples, seed=seed)
    return build_value_map(
        cloud, depth, spec.gamma, plan, spec.basis, spec.noise,
        RegressionSpec("smoothing-spline-1d"), RegressionSpec("tree-ensemble", {"n_trees": 30}),
        argmax_resolution=201,
    )


@pytest.fixture(scope="session")
def shared_synthetic_map():
    return quick_map(synthetic_problem(), depth=2, seed=17)

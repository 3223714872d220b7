"""Budget-constrained hyperparameter search with Kalman-filtered surrogates.

The package learns Gaussian surrogate maps of model score and training cost
over a normalized control space, and at each epoch decides which
hyperparameters to try next or whether to stop, trading expected final score
against cumulative training cost.
"""

from .basis import BasisSet, default_basis, default_basis_1d, default_basis_2d, eval_phi, eval_psi
from .belief import BeliefState, NoiseModel, PredictiveMoments, kalman_update, predictive_moments, sample_transition
from .controller import (
    ControlMapping,
    ProblemSpec,
    RunOutcome,
    RunTrace,
    Transform,
    map_control,
    run_exact,
    run_otf,
    run_relaxed,
    transform_observation,
)
from .oracle import AnalyticOracle, EvalResult, SubprocessOracle, SubprocessOracleConfig
from .qvalue import QCurve, SamplingPlan, argmax_qcurve, lambda_estimate, otf, upsilon
from .regress import FittedRegressor, RegressionSpec, fit
from .valuemap import (
    Cloud,
    CloudConfig,
    EnrichmentConfig,
    ValueMap,
    build_cloud,
    build_value_map,
    featurize,
    load_map,
    save_map,
    unfeaturize,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticOracle",
    "BasisSet",
    "BeliefState",
    "Cloud",
    "CloudConfig",
    "ControlMapping",
    "EnrichmentConfig",
    "EvalResult",
    "FittedRegressor",
    "NoiseModel",
    "PredictiveMoments",
    "ProblemSpec",
    "QCurve",
    "RegressionSpec",
    "RunOutcome",
    "RunTrace",
    "SamplingPlan",
    "SubprocessOracle",
    "SubprocessOracleConfig",
    "Transform",
    "ValueMap",
    "argmax_qcurve",
    "build_cloud",
    "build_value_map",
    "default_basis",
    "default_basis_1d",
    "default_basis_2d",
    "eval_phi",
    "eval_psi",
    "featurize",
    "fit",
    "kalman_update",
    "lambda_estimate",
    "load_map",
    "map_control",
    "otf",
    "predictive_moments",
    "run_exact",
    "run_otf",
    "run_relaxed",
    "sample_transition",
    "save_map",
    "transform_observation",
    "unfeaturize",
    "upsilon",
]

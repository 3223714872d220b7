"""Configuration documents: presets, parsing, and effective-config dumps.

A run is described by a single JSON document.  A ``preset`` key pulls one of
the bundled experiment presets as the base; any other keys deep-merge over
it.  ``AUTOBCT_SEED`` overrides the configured seed; a --seed flag overrides
both.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .basis import BasisSet
from .belief import BeliefState, NoiseModel
from .controller import ControlMapping, ProblemSpec, Transform
from .errors import ConfigError
from .oracle import AnalyticOracle, SubprocessOracle, SubprocessOracleConfig
from .qvalue import SamplingPlan, default_argmax_resolution, uniform_grid
from .regress import RegressionSpec, default_qfit_spec, default_vfit_spec
from .valuemap import CloudConfig, EnrichmentConfig

PRESET_NAMES = ("synthetic", "cnn-batch", "cnn-r", "cnn-2d", "higgs", "intel", "fraud-1d", "fraud-2d")


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    text = resources.files("autobct.presets").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config_document(path: Optional[str] = None, inline: Optional[dict] = None) -> dict:
    """Read a config file (or inline dict) and resolve its preset base."""
    if inline is None:
        if path is None:
            raise ConfigError("a config file is required")
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    else:
        doc = copy.deepcopy(inline)
    preset = doc.pop("preset", None)
    if preset is not None:
        doc = _deep_merge(load_preset(preset), doc)
        doc["name"] = preset
    return doc


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"missing required field {key!r} in {where}")
    return doc[key]


def build_problem(doc: dict) -> ProblemSpec:
    problem = _require(doc, "problem", "config")
    basis = BasisSet.from_description(_require(problem, "basis", "problem"))
    prior_doc = _require(problem, "prior", "problem")
    prior = BeliefState.create(
        prior_doc["mu_alpha"], prior_doc["sigma_alpha"], prior_doc["mu_beta"], prior_doc["sigma_beta"]
    )
    return ProblemSpec(
        gamma=float(_require(problem, "gamma", "problem")),
        epsilon=float(problem.get("epsilon", 0.0 if basis.dim_control == 1 else 0.02)),
        noise=NoiseModel(float(_require(problem, "sigma_h", "problem")),
                         float(_require(problem, "sigma_t", "problem"))),
        basis=basis,
        prior=prior,
        score_transform=Transform.from_description(_require(problem, "score_transform", "problem")),
        cost_transform=Transform.from_description(_require(problem, "cost_transform", "problem")),
        control_maps=tuple(
            ControlMapping.from_description(m) for m in _require(problem, "control_maps", "problem")
        ),
        replicates=int(problem.get("replicates", 1)),
    )


@dataclass
class SamplingSettings:
    grid_points: int
    n_samples: int
    run_grid_points: int
    run_n_samples: int
    argmax_resolution: int

    def build_plan(self, dim: int, seed: int) -> SamplingPlan:
        return SamplingPlan(uniform_grid(dim, self.grid_points), self.n_samples, seed)

    def run_plan(self, dim: int, seed: int) -> SamplingPlan:
        return SamplingPlan(uniform_grid(dim, self.run_grid_points), self.run_n_samples, seed)


def build_sampling(doc: dict, dim: int) -> SamplingSettings:
    sampling = doc.get("sampling", {})
    grid_points = int(sampling.get("grid_points", 101 if dim == 1 else 21))
    n_samples = int(sampling.get("n_samples", 20))
    return SamplingSettings(
        grid_points=grid_points,
        n_samples=n_samples,
        # the run-time plan defaults to the build grid with 10x the samples
        run_grid_points=int(sampling.get("run_grid_points", grid_points)),
        run_n_samples=int(sampling.get("run_n_samples", 10 * n_samples)),
        argmax_resolution=int(sampling.get("argmax_resolution", default_argmax_resolution(dim))),
    )


def build_cloud_config(doc: dict, spec: ProblemSpec) -> CloudConfig:
    build = doc.get("map_build", {})
    cloud = build.get("cloud", {})
    enrich_doc = cloud.get("enrichment")
    if enrich_doc is None:
        default_grid = uniform_grid(spec.basis.dim_control, 5 if spec.basis.dim_control == 1 else 3)
        enrichment = EnrichmentConfig(grid=tuple(tuple(g) for g in default_grid.tolist()))
    else:
        enrichment = EnrichmentConfig(
            n_shapes=int(enrich_doc.get("n_shapes", 20)),
            depth=int(enrich_doc.get("depth", 3)),
            grid=tuple(tuple(np.atleast_1d(g).tolist()) for g in enrich_doc.get("grid", [[0.0], [0.5], [1.0]])),
        )
    # covariance sampling laws default to Wishart draws centered at the prior
    # covariances, so the surface is learnt where runs will actually live
    return CloudConfig(
        n_centers=int(cloud.get("n_centers", 500)),
        k_scales=int(cloud.get("k_scales", 4)),
        mean_alpha=cloud.get("mean_alpha", spec.prior.mu_alpha.tolist()),
        mean_beta=cloud.get("mean_beta", spec.prior.mu_beta.tolist()),
        mean_spread=float(cloud.get("mean_spread", 1.0)),
        cov_alpha=cloud.get("cov_alpha", spec.prior.sigma_alpha.tolist()),
        cov_beta=cloud.get("cov_beta", spec.prior.sigma_beta.tolist()),
        cov_scale_alpha=float(cloud.get("cov_scale_alpha", 1.0)),
        cov_scale_beta=float(cloud.get("cov_scale_beta", 1.0)),
        enrichment=enrichment,
    )


def build_fit_specs(doc: dict, dim: int) -> tuple[RegressionSpec, RegressionSpec]:
    build = doc.get("map_build", {})
    qfit_doc = build.get("qfit")
    vfit_doc = build.get("vfit")
    qfit = RegressionSpec.from_description(qfit_doc) if qfit_doc else default_qfit_spec(dim)
    vfit = RegressionSpec.from_description(vfit_doc) if vfit_doc else default_vfit_spec()
    return qfit, vfit


def build_trainer(doc: dict, spec: ProblemSpec):
    trainer = _require(doc, "trainer", "config")
    kind = _require(trainer, "kind", "trainer")
    if kind == "analytic":
        # the truth may live in a richer basis than the surrogate's
        basis = BasisSet.from_description(trainer["basis"]) if "basis" in trainer else spec.basis
        return AnalyticOracle(
            alpha_true=trainer["alpha_true"],
            beta_true=trainer["beta_true"],
            basis=basis,
            noise_h=float(trainer.get("noise_h", spec.noise.sigma_h)),
            noise_t=float(trainer.get("noise_t", spec.noise.sigma_t)),
            score_transform=spec.score_transform,
            cost_transform=spec.cost_transform,
        )
    if kind == "subprocess":
        oracle = SubprocessOracle(SubprocessOracleConfig(
            command=list(_require(trainer, "command", "trainer")),
            cwd=trainer.get("cwd"),
            env=trainer.get("env", {}),
            timeout=float(trainer.get("timeout", 300.0)),
            retries=int(trainer.get("retries", 1)),
            static_params=trainer.get("static_params", {}),
        ))
        oracle.handshake(spec.basis.dim_control, spec.param_names())
        return oracle
    raise ConfigError(f"unknown trainer kind {kind!r}")


def resolve_seed(doc: dict, flag_seed: Optional[int]) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    env_seed = os.environ.get("AUTOBCT_SEED")
    if env_seed is not None:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"AUTOBCT_SEED must be an integer, got {env_seed!r}")
    return int(doc.get("seed", 0))


def effective_config(doc: dict, seed: int) -> dict:
    out = copy.deepcopy(doc)
    out["seed"] = seed
    return out

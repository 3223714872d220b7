# Driving a real external trainer over the wire protocol.
#
# Requires the companion trainers package (pip install -e trainers/).  The
# checkerboard trainer fits a random forest per evaluation and reports
# validation accuracy and measured seconds; the optimizer sees only raw
# numbers through the newline-delimited JSON protocol.

import sys

import numpy as np

from autobct import (
    BeliefState,
    ControlMapping,
    NoiseModel,
    ProblemSpec,
    RegressionSpec,
    SamplingPlan,
    SubprocessOracle,
    SubprocessOracleConfig,
    Transform,
    default_basis_1d,
    run_relaxed,
)

basis = default_basis_1d()
spec = ProblemSpec(
    gamma=0.16,
    epsilon=0.0,
    noise=NoiseModel(0.05, 0.1),
    basis=basis,
    prior=BeliefState.create(
        [0.4, 0.1, -0.2, 0.1], np.eye(4), [1.0, 1.0, 2.0, 2.0], np.diag([0.64, 4, 4, 4])
    ),
    score_transform=Transform("affine", 0.5, 1.0),
    cost_transform=Transform("affine", 0.0, 3.0),  # seconds of forest training
    control_maps=(ControlMapping("linear-int", 1, 100, "n_trees"),),
)

oracle = SubprocessOracle(SubprocessOracleConfig(
    command=[sys.executable, "-m", "autobct_trainers.checkerboard"],
    timeout=120.0,
    static_params={"data_seed": 7, "n_train": 30_000, "n_valid": 20_000},
))
oracle.handshake(1, spec.param_names())

# no precomputed map here: pure one-step lookahead, capped at five epochs
outcome = run_relaxed(
    spec, None, oracle, SamplingPlan(np.linspace(0, 1, 51), 100, seed=1),
    RegressionSpec("smoothing-spline-1d"), budget_guard=5,
)
oracle.close()

for row in outcome.trace.rows:
    accuracy = 0.5 + 0.5 * row.h
    print(f"epoch {row.n}: n_trees={spec.map_controls(row.u)['n_trees']:>3} "
          f"accuracy={accuracy:.3f} cost={row.t:.3f} value={row.value:.3f}")
print(f"stopped ({outcome.stop_reason}) at n_trees="
      f"{spec.map_controls(outcome.trace.u_star)['n_trees']}, "
      f"posterior score {outcome.trace.h_star:.3f}")

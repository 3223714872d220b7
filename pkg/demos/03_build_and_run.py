# Build a small value map offline, then run the optimizer against the
# bundled synthetic trainer: accuracy saturates in the tree count, cost
# grows linearly, and the filter models both with cubic surrogates.
#
# The trace mirrors the run tables: realized score/cost per epoch, the
# posterior mean at the applied control, and the value estimate that the
# stopping rule compares against.

import numpy as np

from autobct import RegressionSpec, SamplingPlan, build_cloud, build_value_map, run_relaxed
from autobct.config import build_cloud_config, build_problem, build_trainer, load_preset

doc = load_preset("synthetic")
doc["problem"]["epsilon"] = 0.1          # damping against small-map overestimation
doc["map_build"]["cloud"]["n_centers"] = 150
doc["map_build"]["cloud"]["enrichment"]["n_shapes"] = 10
spec = build_problem(doc)
trainer = build_trainer(doc, spec)

print("building the cloud and a depth-2 value map (a minute or so)...")
cloud = build_cloud(build_cloud_config(doc, spec), spec.basis, spec.noise, seed=11)
vmap = build_value_map(
    cloud, 2, spec.gamma, SamplingPlan(np.linspace(0, 1, 101), 20, seed=11),
    spec.basis, spec.noise, RegressionSpec("smoothing-spline-1d"),
    RegressionSpec("tree-ensemble", {"n_trees": 100, "min_samples_leaf": 10}),
)
print(f"cloud: {len(cloud.states)} states ({cloud.truth_count} truths)")

outcome = run_relaxed(
    spec, vmap, trainer, SamplingPlan(np.linspace(0, 1, 101), 800, seed=3),
    RegressionSpec("smoothing-spline-1d"), budget_guard=10,
)

print(f"\n{'n':>2} {'h':>7} {'t':>7} {'sum t':>7} {'u':>6} {'post mean':>10} {'V':>7}")
for row in outcome.trace.rows:
    print(f"{row.n:>2} {row.h:>7.3f} {row.t:>7.3f} {row.cum_t:>7.3f} "
          f"{row.u[0]:>6.2f} {row.post_mean:>10.3f} {row.value:>7.3f}")
trace = outcome.trace
print(f"\nstopped: {outcome.stop_reason}")
print(f"u* = {trace.u_star[0]:.2f}  (n_trees = {spec.map_controls(trace.u_star)['n_trees']})")
print(f"h* = {trace.h_star:.3f}, total cost = {trace.t_total:.3f}")

# The one-step Q-value curve: where is it worth evaluating next?
#
# At the synthetic prior the curve trades the truncated expected cost of one
# epoch against the expected best of "stop at the new posterior mean" and a
# continuation value.  A constant continuation lifts the whole curve but the
# cost term still shapes it.

import numpy as np

from autobct import (
    BeliefState,
    NoiseModel,
    RegressionSpec,
    SamplingPlan,
    argmax_qcurve,
    default_basis_1d,
    lambda_estimate,
    upsilon,
)

basis = default_basis_1d()
noise = NoiseModel(0.05, 0.1)
prior = BeliefState.create(
    [0.4, 0.1, -0.2, 0.1], np.eye(4), [1.0, 1.0, 2.0, 2.0], np.diag([0.64, 4, 4, 4])
)

plan = SamplingPlan(np.linspace(0, 1, 101), 200, seed=42)
qfit = RegressionSpec("smoothing-spline-1d")

print("Upsilon sanity: E[max(N(0,1),0)] =", round(upsilon(0.0, 1.0), 6))

stop_now = lambda_estimate(prior, None, 0.16, plan, basis, noise, qfit)
u0, v0 = argmax_qcurve(stop_now, 1001)
print(f"\nno continuation:   best u = {u0[0]:.3f}, value = {v0:.4f}")

flat = lambda states: np.full(len(states), 0.8)
with_cont = lambda_estimate(prior, flat, 0.16, plan, basis, noise, qfit)
u1, v1 = argmax_qcurve(with_cont, 1001)
print(f"flat continuation: best u = {u1[0]:.3f}, value = {v1:.4f}")

print("\n   u   Q(stop-next)  Q(continuation 0.8)")
for u in (0.0, 0.25, 0.5, 0.75, 1.0):
    a = stop_now.value([u])
    b = with_cont.value([u])
    print(f"{u:>5.2f} {a:>13.4f} {b:>20.4f}")

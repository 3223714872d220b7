# Watching the belief filter learn a score curve.
#
# A ground-truth cubic generates noisy observations; each one is folded into
# the Gaussian coefficient posterior, which concentrates toward the truth.

import numpy as np

from autobct import BeliefState, NoiseModel, default_basis_1d, eval_phi, kalman_update

basis = default_basis_1d()
noise = NoiseModel(sigma_h=0.05, sigma_t=0.1)

alpha_true = np.array([0.935, 0.33, -0.66, 0.44])   # saturates at 0.99
beta_true = np.array([0.47, 0.8, 0.0, 0.0])         # cost 0.07 + 0.8u

state = BeliefState.create(
    mu_alpha=[0.4, 0.1, -0.2, 0.1], sigma_alpha=np.eye(4),
    mu_beta=[1.0, 1.0, 2.0, 2.0], sigma_beta=np.diag([0.64, 4, 4, 4]),
)

rng = np.random.default_rng(0)
print(f"{'step':>4} {'u':>5} {'h':>7} {'|mu_a - alpha|':>15} {'tr Sigma_a':>11}")
for step in range(25):
    u = rng.uniform(0, 1)
    h = float(alpha_true @ eval_phi(basis, u)) + noise.sigma_h * rng.standard_normal()
    t = float(beta_true @ eval_phi(basis, u)) + noise.sigma_t * rng.standard_normal()
    state = kalman_update(state, [u], h, t, basis, noise)
    err = np.linalg.norm(state.mu_alpha - alpha_true)
    print(f"{step + 1:>4} {u:>5.2f} {h:>7.3f} {err:>15.4f} {np.trace(state.sigma_alpha):>11.4f}")

print("\nfinal coefficient estimate:", np.round(state.mu_alpha, 3))
print("truth:                     ", alpha_true)

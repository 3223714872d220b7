"""Brute-force dynamic program for the scalar constant-basis instance.

Independent reference for the nested Monte Carlo evaluator: with one constant
basis function for score and cost, the control is irrelevant and the belief
state reduces to four scalars (mean/variance of the score and cost levels).
Values are computed by backward induction with trapezoid quadrature over the
observation space; nothing here imports the package under test.
"""

import math

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def truncated_mean(mean, variance, n_nodes=4001, span=10.0):
    """E[max(Y, 0)] for Y ~ N(mean, variance), by trapezoid quadrature.

    ``mean`` may be an array; the quadrature runs on standardized nodes.
    """
    mean = np.asarray(mean, dtype=float)
    sd = math.sqrt(variance)
    z = np.linspace(-span, span, n_nodes)
    y = mean[..., None] + sd * z
    integrand = np.maximum(y, 0.0) * _norm_pdf(z)
    return np.trapezoid(integrand, z, axis=-1)


def _posterior_var(var, noise_sd):
    return var * noise_sd**2 / (var + noise_sd**2)


def value_depth1(ma, va, mb, vb, gamma, sigma_h, sigma_t, n_nodes=4001):
    """One training epoch left: stop right after observing.

    The expected posterior score mean equals the prior mean, so only the
    truncated expected cost matters.
    """
    cost = float(truncated_mean(np.array(mb), vb + sigma_t**2, n_nodes=n_nodes))
    return ma - gamma * cost


def value_depth2(ma, va, mb, vb, gamma, sigma_h, sigma_t, n_obs=1501, n_nodes=2001, span=8.0):
    """Two epochs left: integrate the stop-or-continue decision over (h, t)."""
    var_h = va + sigma_h**2
    var_t = vb + sigma_t**2
    zh = np.linspace(-span, span, n_obs)
    zt = np.linspace(-span, span, n_obs)
    h = ma + math.sqrt(var_h) * zh
    t = mb + math.sqrt(var_t) * zt

    gain_a = va / var_h
    gain_b = vb / var_t
    ma1 = ma + gain_a * (h - ma)            # posterior score means over the h grid
    mb1 = mb + gain_b * (t - mb)            # posterior cost means over the t grid
    va1 = _posterior_var(va, sigma_h)
    vb1 = _posterior_var(vb, sigma_t)

    # continuation value V_1 at each reachable posterior state
    inner_cost = truncated_mean(mb1, vb1 + sigma_t**2, n_nodes=n_nodes)
    v1 = ma1[:, None] - gamma * inner_cost[None, :]        # [h, t]
    decision = np.maximum(ma1[:, None], v1)

    w_h = _norm_pdf(zh)
    w_t = _norm_pdf(zt)
    over_t = np.trapezoid(decision * w_t[None, :], zt, axis=1)
    expected = np.trapezoid(over_t * w_h, zh)

    first_cost = float(truncated_mean(np.array(mb), var_t, n_nodes=n_nodes))
    return float(-gamma * first_cost + expected)

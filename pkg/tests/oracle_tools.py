"""Independent numeric oracles: brute-force quadrature and small generators.

Everything here integrates or simulates the latent-state pair-copula model
without going through the package's importance-sampling path, so it can
serve as the reference for likelihood-level agreement tests.
"""

import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from scarvine.copulas import Family, h_inverse, pair_density
from scarvine.latent import ScarParams

TAU_EPS = 1e-5


def theta_of_lambda(family, lam):
    """Latent-state to copula-parameter map, restated independently."""
    tau = np.tanh(np.asarray(lam, dtype=float))
    if family.base is Family.GAUSSIAN:
        tau = np.clip(tau, -1.0 + TAU_EPS, 1.0 - TAU_EPS)
        return np.sin(0.5 * math.pi * tau)
    tau = np.clip(tau, TAU_EPS, 1.0 - TAU_EPS)
    if family.base is Family.CLAYTON:
        return 2.0 * tau / (1.0 - tau)
    return 1.0 / (1.0 - tau)


def tensor_quadrature_likelihood(params: ScarParams, u_pair, family, n_nodes=60):
    """Likelihood of a T-period pair by tensor Gauss-Hermite quadrature.

    Integrates prod_t c(u_t, v_t; theta(lambda_t)) against the stationary
    start N(mu, avar) and the AR(1) transitions.  Exact up to quadrature
    error; intended for T <= 4.
    """
    u_pair = np.asarray(u_pair, dtype=float)
    T = u_pair.shape[0]
    nodes, weights = hermegauss(n_nodes)  # weight exp(-z^2/2)
    weights = weights / math.sqrt(2.0 * math.pi)

    lam = params.mu + math.sqrt(params.avar) * nodes
    acc = weights * pair_density(family, u_pair[0, 0], u_pair[0, 1], theta_of_lambda(family, lam))
    for t in range(1, T):
        mean_next = params.mu + params.phi * (lam - params.mu)
        lam_new = mean_next[:, None] + params.sigma * nodes[None, :]
        c = pair_density(family, u_pair[t, 0], u_pair[t, 1], theta_of_lambda(family, lam_new))
        acc = (acc[:, None] * weights[None, :] * c).ravel()
        lam = lam_new.ravel()
    return float(acc.sum())


def quadrature_smoothed_tau(params: ScarParams, u_pair, family, n_nodes=80):
    """Smoothed E[tanh(lambda_t) | data] for T = 2 by 2-D quadrature."""
    u_pair = np.asarray(u_pair, dtype=float)
    assert u_pair.shape[0] == 2
    nodes, weights = hermegauss(n_nodes)
    weights = weights / math.sqrt(2.0 * math.pi)
    lam1 = params.mu + math.sqrt(params.avar) * nodes
    mean2 = params.mu + params.phi * (lam1 - params.mu)
    lam2 = mean2[:, None] + params.sigma * nodes[None, :]

    c1 = pair_density(family, u_pair[0, 0], u_pair[0, 1], theta_of_lambda(family, lam1))
    c2 = pair_density(family, u_pair[1, 0], u_pair[1, 1], theta_of_lambda(family, lam2))
    joint = weights[:, None] * weights[None, :] * c1[:, None] * c2
    denom = joint.sum()
    tau1 = (joint * np.tanh(lam1)[:, None]).sum() / denom
    tau2 = (joint * np.tanh(lam2)).sum() / denom
    return np.array([tau1, tau2])


def grid_normalizer(mu_p, sigma2, a1, a2, n=40001, width=15.0):
    """Trapezoid integral of N(x; mu_p, sigma2) exp(a1 x + a2 x^2)."""
    v = 1.0 / (1.0 / sigma2 - 2.0 * a2)
    m = v * (mu_p / sigma2 + a1)
    half = width * math.sqrt(max(v, sigma2))
    x = np.linspace(m - half, m + half, n)
    k = (
        np.exp(-0.5 * (x - mu_p) ** 2 / sigma2) / math.sqrt(2.0 * math.pi * sigma2)
        * np.exp(a1 * x + a2 * x * x)
    )
    return np.trapezoid(k, x), x, k


def grid_moments(mu_p, sigma2, a1, a2):
    """Mean and variance of the normalized tilted kernel on a fine grid."""
    z, x, k = grid_normalizer(mu_p, sigma2, a1, a2)
    mean = np.trapezoid(x * k, x) / z
    var = np.trapezoid((x - mean) ** 2 * k, x) / z
    return mean, var


def simulate_scar_pair(family, params: ScarParams, T, seed):
    """Simulate one bivariate series from the latent-state copula model."""
    rng = np.random.default_rng(seed)
    lam = np.empty(T)
    lam[0] = params.mu + math.sqrt(params.avar) * rng.standard_normal()
    for t in range(1, T):
        lam[t] = params.mu + params.phi * (lam[t - 1] - params.mu) + params.sigma * rng.standard_normal()
    theta = theta_of_lambda(family, lam)
    v = rng.uniform(size=T)
    p = rng.uniform(size=T)
    base = family.base
    u = h_inverse(base, p, v, theta)
    uv = np.column_stack([u, v])
    if family.is_survival:
        uv = 1.0 - uv
    return uv, np.tanh(lam)

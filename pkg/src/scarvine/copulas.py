"""Bivariate copula families: densities, cdfs, h-functions and their inverses.

Implemented families are Gaussian, Clayton, Gumbel, the 180-degree survival
rotations of Clayton and Gumbel, and the independence copula.  Each
one-parameter family comes with the closed-form maps between its parameter
theta and Kendall's tau, plus the Fisher transform pair used to drive tau
from a real-valued latent state.

All functions accept scalars or numpy arrays (broadcasting applies) and
clamp unit-interval inputs away from the boundary before evaluation.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr, ndtri

UNIT_EPS = 1e-10
TAU_EPS = 1e-5

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Family(enum.Enum):
    """Bivariate copula family tags; codes match the CLI family flags."""

    GAUSSIAN = "N"
    CLAYTON = "C"
    GUMBEL = "G"
    SURVIVAL_CLAYTON = "SC"
    SURVIVAL_GUMBEL = "SG"
    INDEPENDENCE = "I"

    @classmethod
    def from_code(cls, code: str) -> "Family":
        try:
            return cls(code.strip().upper())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown copula family {code!r}; valid codes: {valid}") from None

    @property
    def is_survival(self) -> bool:
        return self in (Family.SURVIVAL_CLAYTON, Family.SURVIVAL_GUMBEL)

    @property
    def base(self) -> "Family":
        if self is Family.SURVIVAL_CLAYTON:
            return Family.CLAYTON
        if self is Family.SURVIVAL_GUMBEL:
            return Family.GUMBEL
        return self

    @property
    def positive_only(self) -> bool:
        """True for families that only admit positive dependence."""
        return self.base in (Family.CLAYTON, Family.GUMBEL)

    @property
    def has_parameter(self) -> bool:
        return self is not Family.INDEPENDENCE


# Deterministic candidate ordering used for BIC tie-breaking.
SELECTABLE_FAMILIES = (
    Family.GAUSSIAN,
    Family.CLAYTON,
    Family.GUMBEL,
    Family.SURVIVAL_CLAYTON,
    Family.SURVIVAL_GUMBEL,
)


def clamp_unit(u):
    """Clamp unit-interval data into [UNIT_EPS, 1 - UNIT_EPS]."""
    return np.clip(u, UNIT_EPS, 1.0 - UNIT_EPS)


def _as_float(x):
    """Return a python float for 0-d results, else the array."""
    x = np.asarray(x)
    if x.ndim == 0:
        return float(x)
    return x


def _check_theta(family: Family, theta) -> None:
    if family is Family.INDEPENDENCE:
        if theta is not None:
            raise ValueError("independence copula takes no parameter")
        return
    if theta is None:
        raise ValueError(f"{family.value} copula requires a parameter")
    th = np.asarray(theta, dtype=float)
    base = family.base
    if base is Family.GAUSSIAN:
        if np.any(np.abs(th) >= 1.0):
            raise ValueError("Gaussian copula parameter must lie in (-1, 1)")
    elif base is Family.CLAYTON:
        if np.any(th <= 0.0):
            raise ValueError("Clayton copula parameter must be positive")
    elif base is Family.GUMBEL:
        if np.any(th < 1.0):
            raise ValueError("Gumbel copula parameter must be >= 1")


# ---------------------------------------------------------------------------
# Gaussian family
# ---------------------------------------------------------------------------

def _gauss_logdensity(u, v, rho):
    x = ndtri(u)
    y = ndtri(v)
    r2 = 1.0 - rho * rho
    return -0.5 * np.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)


_BVN_NODES, _BVN_WEIGHTS = leggauss(96)


def _bvn_cdf(x, y, rho):
    """Bivariate standard normal cdf via the tetrachoric integral.

    Phi2(x, y; rho) = Phi(x) Phi(y)
        + (1/2pi) int_0^asin(rho) exp(-(x^2 - 2 x y sin t + y^2) / (2 cos^2 t)) dt

    The integrand is smooth on the substituted interval, so fixed-order
    Gauss-Legendre is accurate to ~1e-14 even for |rho| near 1.
    """
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    upper = math.asin(rho)
    t = 0.5 * upper * (_BVN_NODES + 1.0)
    w = 0.5 * upper * _BVN_WEIGHTS
    sin_t = np.sin(t)
    cos2_t = np.cos(t) ** 2
    integrand = np.exp(-(x * x - 2.0 * x * y * sin_t + y * y) / (2.0 * cos2_t))
    corr = (integrand * w).sum(axis=-1) / (2.0 * math.pi)
    return ndtr(x[..., 0]) * ndtr(y[..., 0]) + corr


def _gauss_h(u, v, rho):
    x = ndtri(u)
    y = ndtri(v)
    return ndtr((x - rho * y) / np.sqrt(1.0 - rho * rho))


def _gauss_hinv(p, v, rho):
    y = ndtri(v)
    return ndtr(ndtri(p) * np.sqrt(1.0 - rho * rho) + rho * y)


# ---------------------------------------------------------------------------
# Clayton family
# ---------------------------------------------------------------------------

def _log_clayton_s(a, b):
    """log(e^a + e^b - 1) for a, b >= 0, stable for large arguments."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    m = np.maximum(a, b)
    small = m < 30.0
    out = np.empty_like(m)
    if np.any(small):
        out[small] = np.log1p(np.expm1(a[small]) + np.expm1(b[small]))
    if np.any(~small):
        ml = m[~small]
        out[~small] = ml + np.log(
            np.exp(a[~small] - ml) + np.exp(b[~small] - ml) - np.exp(-ml)
        )
    return out


def _clayton_logdensity(u, v, theta):
    lu = np.log(u)
    lv = np.log(v)
    log_s = _log_clayton_s(-theta * lu, -theta * lv)
    return np.log1p(theta) - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * log_s


def _clayton_cdf(u, v, theta):
    log_s = _log_clayton_s(-theta * np.log(u), -theta * np.log(v))
    return np.exp(-log_s / theta)


def _clayton_h(u, v, theta):
    lv = np.log(v)
    log_s = _log_clayton_s(-theta * np.log(u), -theta * lv)
    return np.exp(-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * log_s)


def _clayton_hinv(p, v, theta):
    # Invert p = v^-(theta+1) * s^-(1+1/theta) for u; exact in log space.
    lp = np.log(p)
    lv = np.log(v)
    c = -theta / (1.0 + theta) * lp - theta * lv  # log of (p v^(1+theta))^(-theta/(1+theta))
    b = -theta * lv
    m = np.maximum(c, 0.0)
    inner = m + np.log(np.exp(c - m) - np.exp(b - m) + np.exp(-m))
    return np.exp(-inner / theta)


# ---------------------------------------------------------------------------
# Gumbel family
# ---------------------------------------------------------------------------

def _gumbel_parts(u, v, theta):
    lx = np.log(-np.log(u))
    ly = np.log(-np.log(v))
    log_s = np.logaddexp(theta * lx, theta * ly)
    w = np.exp(log_s / theta)
    return lx, ly, log_s, w


def _gumbel_logdensity(u, v, theta):
    lx, ly, log_s, w = _gumbel_parts(u, v, theta)
    return (
        -w
        + (1.0 / theta - 2.0) * log_s
        + (theta - 1.0) * (lx + ly)
        + np.log(w + theta - 1.0)
        - np.log(u)
        - np.log(v)
    )


def _gumbel_cdf(u, v, theta):
    _, _, _, w = _gumbel_parts(u, v, theta)
    return np.exp(-w)


def _gumbel_h(u, v, theta):
    _, ly, log_s, w = _gumbel_parts(u, v, theta)
    return np.exp(-w + (1.0 / theta - 1.0) * log_s + (theta - 1.0) * ly - np.log(v))


def _gumbel_hinv(p, v, theta, tol=1e-10, max_iter=100):
    """Invert h(u | v, theta) = p by safeguarded Newton with bisection bracket."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    v = np.broadcast_to(np.asarray(v, dtype=float), p.shape).copy()
    theta = np.broadcast_to(np.asarray(theta, dtype=float), p.shape).copy()
    lo = np.full(p.shape, UNIT_EPS)
    hi = np.full(p.shape, 1.0 - UNIT_EPS)
    u = np.clip(p, UNIT_EPS, 1.0 - UNIT_EPS).copy()
    active = np.ones(p.shape, dtype=bool)
    for _ in range(max_iter):
        f = _gumbel_h(u, v, theta) - p
        below = f < 0.0
        lo = np.where(active & below, u, lo)
        hi = np.where(active & ~below, u, hi)
        slope = np.exp(_gumbel_logdensity(u, v, theta))
        step = f / np.maximum(slope, 1e-300)
        # converged when the residual AND the implied u-space correction are tiny
        done = (np.abs(f) <= tol) & (np.abs(step) <= 1e-13)
        active = active & ~done & (hi - lo > 1e-15)
        if not np.any(active):
            break
        u_new = u - step
        out = ~np.isfinite(u_new) | (u_new <= lo) | (u_new >= hi)
        u_new = np.where(out, 0.5 * (lo + hi), u_new)
        u = np.where(active, u_new, u)
    else:
        f = _gumbel_h(u, v, theta) - p
        bad = (np.abs(f) > 1e-8) & (hi - lo > 1e-14)
        if np.any(bad):
            raise RuntimeError(
                "Gumbel h-inverse did not converge; parameter is numerically extreme"
            )
    return u


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def _survival_args(family: Family, u, v):
    if family.is_survival:
        return 1.0 - u, 1.0 - v
    return u, v


def log_pair_density(family: Family, u, v, theta=None):
    """Log copula density log c(u, v; theta)."""
    _check_theta(family, theta)
    u = clamp_unit(np.asarray(u, dtype=float))
    v = clamp_unit(np.asarray(v, dtype=float))
    if family is Family.INDEPENDENCE:
        return _as_float(np.zeros(np.broadcast(u, v).shape))
    theta = np.asarray(theta, dtype=float)
    u, v = _survival_args(family, u, v)
    base = family.base
    if base is Family.GAUSSIAN:
        out = _gauss_logdensity(u, v, theta)
    elif base is Family.CLAYTON:
        out = _clayton_logdensity(u, v, theta)
    else:
        out = _gumbel_logdensity(u, v, theta)
    return _as_float(out)


def pair_density(family: Family, u, v, theta=None):
    """Copula density c(u, v; theta)."""
    return _as_float(np.exp(log_pair_density(family, u, v, theta)))


def pair_cdf(family: Family, u, v, theta=None):
    """Copula cdf C(u, v; theta).

    The Gaussian cdf is evaluated with a scalar parameter only; the other
    families broadcast theta like the remaining operations.
    """
    _check_theta(family, theta)
    u = clamp_unit(np.asarray(u, dtype=float))
    v = clamp_unit(np.asarray(v, dtype=float))
    if family is Family.INDEPENDENCE:
        return _as_float(u * v)
    base = family.base
    if family.is_survival:
        us, vs = 1.0 - u, 1.0 - v
        if base is Family.CLAYTON:
            inner = _clayton_cdf(us, vs, np.asarray(theta, dtype=float))
        else:
            inner = _gumbel_cdf(us, vs, np.asarray(theta, dtype=float))
        out = u + v - 1.0 + inner
    elif base is Family.GAUSSIAN:
        rho = float(np.asarray(theta, dtype=float))
        out = _bvn_cdf(ndtri(u), ndtri(v), rho)
    elif base is Family.CLAYTON:
        out = _clayton_cdf(u, v, np.asarray(theta, dtype=float))
    else:
        out = _gumbel_cdf(u, v, np.asarray(theta, dtype=float))
    # Frechet-Hoeffding bounds absorb boundary clamping error.
    out = np.clip(out, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
    return _as_float(out)


def h_func(family: Family, u, v, theta=None):
    """Conditional cdf h(u | v; theta) = dC(u, v; theta)/dv."""
    _check_theta(family, theta)
    u = clamp_unit(np.asarray(u, dtype=float))
    v = clamp_unit(np.asarray(v, dtype=float))
    if family is Family.INDEPENDENCE:
        return _as_float(np.broadcast_to(u, np.broadcast(u, v).shape).copy())
    theta = np.asarray(theta, dtype=float)
    base = family.base
    if family.is_survival:
        us, vs = 1.0 - u, 1.0 - v
        out = 1.0 - (_clayton_h(us, vs, theta) if base is Family.CLAYTON else _gumbel_h(us, vs, theta))
    elif base is Family.GAUSSIAN:
        out = _gauss_h(u, v, theta)
    elif base is Family.CLAYTON:
        out = _clayton_h(u, v, theta)
    else:
        out = _gumbel_h(u, v, theta)
    return _as_float(np.clip(out, UNIT_EPS, 1.0 - UNIT_EPS))


def h_inverse(family: Family, p, v, theta=None):
    """Inverse of ``h_func`` in its first argument: h(result | v; theta) = p."""
    _check_theta(family, theta)
    p = clamp_unit(np.asarray(p, dtype=float))
    v = clamp_unit(np.asarray(v, dtype=float))
    if family is Family.INDEPENDENCE:
        return _as_float(np.broadcast_to(p, np.broadcast(p, v).shape).copy())
    theta = np.asarray(theta, dtype=float)
    base = family.base
    if family.is_survival:
        ps, vs = 1.0 - p, 1.0 - v
        out = 1.0 - (_clayton_hinv(ps, vs, theta) if base is Family.CLAYTON else _gumbel_hinv(ps, vs, theta))
    elif base is Family.GAUSSIAN:
        out = _gauss_hinv(p, v, theta)
    elif base is Family.CLAYTON:
        out = _clayton_hinv(p, v, theta)
    else:
        out = _gumbel_hinv(p, v, theta)
    out = np.clip(out, UNIT_EPS, 1.0 - UNIT_EPS)
    if np.asarray(p).ndim == 0 and np.asarray(v).ndim == 0 and np.asarray(theta).ndim == 0:
        return float(np.asarray(out).reshape(()))
    return _as_float(out)


def tau_to_theta(family: Family, tau):
    """Map Kendall's tau to the family parameter theta."""
    if family is Family.INDEPENDENCE:
        raise ValueError("independence copula has no parameter")
    tau = np.asarray(tau, dtype=float)
    if np.any(np.abs(tau) >= 1.0):
        raise ValueError("Kendall's tau must lie in (-1, 1)")
    if family.positive_only and np.any(tau <= 0.0):
        raise ValueError(
            f"{family.value} copula admits only positive dependence; got tau <= 0"
        )
    base = family.base
    if base is Family.GAUSSIAN:
        out = np.sin(0.5 * math.pi * tau)
    elif base is Family.CLAYTON:
        out = 2.0 * tau / (1.0 - tau)
    else:
        out = 1.0 / (1.0 - tau)
    return _as_float(out)


def theta_to_tau(family: Family, theta):
    """Map the family parameter theta back to Kendall's tau."""
    if family is Family.INDEPENDENCE:
        return 0.0
    _check_theta(family, theta)
    theta = np.asarray(theta, dtype=float)
    base = family.base
    if base is Family.GAUSSIAN:
        out = 2.0 / math.pi * np.arcsin(theta)
    elif base is Family.CLAYTON:
        out = theta / (theta + 2.0)
    else:
        out = (theta - 1.0) / theta
    return _as_float(out)


def fisher(tau):
    """Fisher transform, mapping tau in (-1, 1) to the real line."""
    tau = np.asarray(tau, dtype=float)
    if np.any(np.abs(tau) >= 1.0):
        raise ValueError("Fisher transform requires |tau| < 1")
    return _as_float(np.arctanh(tau))


def fisher_inv(lam):
    """Inverse Fisher transform (e^(2x) - 1) / (e^(2x) + 1) = tanh(x)."""
    return _as_float(np.tanh(np.asarray(lam, dtype=float)))


def latent_tau(family: Family, lam):
    """Kendall's tau implied by latent state lam, clamped into the family domain.

    Clayton/Gumbel type families only admit positive dependence, so tau from
    the latent process is clamped to [TAU_EPS, 1 - TAU_EPS]; the Gaussian
    family keeps the sign and clamps |tau| at 1 - TAU_EPS.
    """
    tau = np.tanh(np.asarray(lam, dtype=float))
    if family.positive_only:
        return _as_float(np.clip(tau, TAU_EPS, 1.0 - TAU_EPS))
    return _as_float(np.clip(tau, -1.0 + TAU_EPS, 1.0 - TAU_EPS))


def theta_from_latent(family: Family, lam):
    """Copula parameter driven by the latent state: r(psi(lam)) with clamping."""
    return tau_to_theta(family, latent_tau(family, lam))

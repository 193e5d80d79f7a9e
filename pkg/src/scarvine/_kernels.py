"""Numba kernels for the importance-sampling hot path.

These loops run inside every likelihood evaluation of the simplex optimizer,
so they are jitted and cached.  The copula log-densities here duplicate the
closed forms in ``copulas`` (kernels cannot call scipy); a unit test pins the
two implementations against each other on dense grids.

Family kind codes: 0 independence, 1 Gaussian, 2 Clayton, 3 Gumbel.
Survival rotations are handled by the caller feeding transformed data
(1-u, 1-v) with the base family's code.
"""

import math

import numpy as np
from numba import njit

TAU_EPS = 1e-5

KIND_INDEPENDENCE = 0
KIND_GAUSSIAN = 1
KIND_CLAYTON = 2
KIND_GUMBEL = 3


@njit(cache=True)
def draw_paths(eps, a1, a2, mu, phi, sigma2, avar):
    """Draw latent trajectories from the auxiliary Gaussian sampler.

    Period 1 uses the stationary prior N(mu, avar); later periods the AR(1)
    transition.  Completing the square with (a1_t, a2_t) tilts each period.
    """
    N, T = eps.shape
    lam = np.empty((N, T))
    v0 = 1.0 / (1.0 / avar - 2.0 * a2[0])
    s0 = math.sqrt(v0)
    m0 = v0 * (mu / avar + a1[0])
    for i in range(N):
        lam[i, 0] = m0 + s0 * eps[i, 0]
    for t in range(1, T):
        v = 1.0 / (1.0 / sigma2 - 2.0 * a2[t])
        s = math.sqrt(v)
        for i in range(N):
            mp = mu + phi * (lam[i, t - 1] - mu)
            lam[i, t] = v * (mp / sigma2 + a1[t]) + s * eps[i, t]
    return lam


@njit(cache=True, inline="always")
def _logdens_scalar(kind, lam, d1, d2, d3, d4):
    tau = math.tanh(lam)
    if kind == KIND_GAUSSIAN:
        if tau > 1.0 - TAU_EPS:
            tau = 1.0 - TAU_EPS
        elif tau < -1.0 + TAU_EPS:
            tau = -1.0 + TAU_EPS
        rho = math.sin(0.5 * math.pi * tau)
        r2 = 1.0 - rho * rho
        x = d1
        y = d2
        return -0.5 * math.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
    if tau > 1.0 - TAU_EPS:
        tau = 1.0 - TAU_EPS
    elif tau < TAU_EPS:
        tau = TAU_EPS
    if kind == KIND_CLAYTON:
        th = 2.0 * tau / (1.0 - tau)
        lu = d1
        lv = d2
        a = -th * lu
        b = -th * lv
        m = a if a > b else b
        if m < 30.0:
            ls = math.log1p(math.expm1(a) + math.expm1(b))
        else:
            ls = m + math.log(math.exp(a - m) + math.exp(b - m) - math.exp(-m))
        return math.log1p(th) - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * ls
    # Gumbel
    th = 1.0 / (1.0 - tau)
    lu = d1
    lv = d2
    llu = d3
    llv = d4
    a = th * llu
    b = th * llv
    m = a if a > b else b
    lo = b if a > b else a
    ls = m + math.log1p(math.exp(lo - m))
    w = math.exp(ls / th)
    return -w + (1.0 / th - 2.0) * ls + (th - 1.0) * (llu + llv) + math.log(w + th - 1.0) - lu - lv


@njit(cache=True)
def log_density_matrix(kind, lam, d1, d2, d3, d4):
    """log pair-density at theta(lambda) for every trajectory and period."""
    N, T = lam.shape
    out = np.zeros((N, T))
    if kind == KIND_INDEPENDENCE:
        return out
    for t in range(T):
        for i in range(N):
            out[i, t] = _logdens_scalar(kind, lam[i, t], d1[t], d2[t], d3[t], d4[t])
    return out


@njit(cache=True)
def backward_pass(lam, logc, mu, phi, sigma2, avar, weighted):
    """Per-period least squares of the EIS target on [1, lambda, lambda^2],
    backward in t.

    The target at period t is the log pair-density plus the log normalizing
    constant carried back from period t+1.  Targets are winsorized 60 logs
    below the period max: draws whose relative weight is ~e^-60 are
    irrelevant to the likelihood, but a saturated-tau tail draw carries
    log-density ~ -1e9 and would hijack the least-squares fit.

    ``weighted`` switches to a mass-weighted fit (weights exp(y - max y)),
    the robustness fallback for short diffuse problems whose targets a
    global quadratic cannot represent; the plain fit is the default.

    Regressors are standardized for conditioning and the coefficients mapped
    back.  a2 is capped so the sampler precision stays positive (linear term
    and intercept refit with a2 held at the cap); degenerate latent spread
    falls back to the natural sampler (a1 = a2 = 0) for that period.
    """
    N, T = lam.shape
    a1 = np.zeros(T)
    a2 = np.zeros(T)
    c0 = np.zeros(T)
    y_raw = np.empty(N)
    y = np.empty(N)
    w = np.ones(N)
    for i in range(N):
        y_raw[i] = logc[i, T - 1]
    for t in range(T - 1, -1, -1):
        ymax = y_raw[0]
        for i in range(1, N):
            if y_raw[i] > ymax:
                ymax = y_raw[i]
        yfloor = ymax - 1e5
        wsum = 0.0
        for i in range(N):
            y[i] = y_raw[i] if y_raw[i] > yfloor else yfloor
            if weighted:
                w[i] = math.exp(y[i] - ymax)
            wsum += w[i]
        zm = 0.0
        for i in range(N):
            zm += w[i] * lam[i, t]
        zm /= wsum
        zv = 0.0
        for i in range(N):
            d = lam[i, t] - zm
            zv += w[i] * d * d
        zv /= wsum
        zs = math.sqrt(zv)
        if zs < 1e-5:
            ym = 0.0
            for i in range(N):
                ym += w[i] * y[i]
            c0[t] = ym / wsum
            a1[t] = 0.0
            a2[t] = 0.0
        else:
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            s4 = 0.0
            sy = 0.0
            szy = 0.0
            sz2y = 0.0
            for i in range(N):
                z = (lam[i, t] - zm) / zs
                z2 = z * z
                s1 += w[i] * z
                s2 += w[i] * z2
                s3 += w[i] * z2 * z
                s4 += w[i] * z2 * z2
                sy += w[i] * y[i]
                szy += w[i] * z * y[i]
                sz2y += w[i] * z2 * y[i]
            n = wsum
            # 3x3 symmetric normal equations solved by cofactor expansion
            det = n * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) + s2 * (s1 * s3 - s2 * s2)
            if abs(det) < 1e-12 * n:
                c0[t] = sy / n
                a1[t] = 0.0
                a2[t] = 0.0
            else:
                b0 = (
                    sy * (s2 * s4 - s3 * s3)
                    - s1 * (szy * s4 - s3 * sz2y)
                    + s2 * (szy * s3 - s2 * sz2y)
                ) / det
                b1 = (
                    n * (szy * s4 - s3 * sz2y)
                    - sy * (s1 * s4 - s3 * s2)
                    + s2 * (s1 * sz2y - szy * s2)
                ) / det
                b2 = (
                    n * (s2 * sz2y - szy * s3)
                    - s1 * (s1 * sz2y - szy * s2)
                    + sy * (s1 * s3 - s2 * s2)
                ) / det
                a2[t] = b2 / (zs * zs)
                a1[t] = b1 / zs - 2.0 * b2 * zm / (zs * zs)
                c0[t] = b0 - b1 * zm / zs + b2 * zm * zm / (zs * zs)
        prior_var = avar if t == 0 else sigma2
        cap = 0.5 * (1.0 / prior_var - 1e-6)
        if a2[t] > cap:
            a2[t] = cap
            sx = 0.0
            sxx = 0.0
            sr = 0.0
            sxr = 0.0
            for i in range(N):
                x = lam[i, t]
                r = y[i] - a2[t] * x * x
                sx += w[i] * x
                sxx += w[i] * x * x
                sr += w[i] * r
                sxr += w[i] * x * r
            varx = sxx - sx * sx / wsum
            if varx > 1e-12:
                a1[t] = (sxr - sx * sr / wsum) / varx
                c0[t] = (sr - a1[t] * sx) / wsum
            else:
                a1[t] = 0.0
                c0[t] = sr / wsum
        if t > 0:
            # fold log chi(lambda_{t-1}; a_t) into the next target; an
            # untilted period has chi = 1 exactly
            if a1[t] == 0.0 and a2[t] == 0.0:
                for i in range(N):
                    y_raw[i] = logc[i, t - 1]
            else:
                v = 1.0 / (1.0 / sigma2 - 2.0 * a2[t])
                lvr = math.log(v / sigma2)
                for i in range(N):
                    mp = mu + phi * (lam[i, t - 1] - mu)
                    m = v * (mp / sigma2 + a1[t])
                    y_raw[i] = logc[i, t - 1] + 0.5 * (m * m / v - mp * mp / sigma2 + lvr)
    return c0, a1, a2


@njit(cache=True)
def log_weights(lam, logc, a1, a2, mu, phi, sigma2, avar):
    """Per-trajectory log importance weights log(f / m).

    Equals sum_t [log c_t + log chi(lambda_t; a_{t+1}) - a1_t lambda_t
    - a2_t lambda_t^2] plus the period-1 constant log chi computed under the
    stationary prior (the constant is required for the weight to be the exact
    density ratio).
    """
    N, T = lam.shape
    if a1[0] == 0.0 and a2[0] == 0.0:
        logchi1 = 0.0
    else:
        v0 = 1.0 / (1.0 / avar - 2.0 * a2[0])
        m0 = v0 * (mu / avar + a1[0])
        logchi1 = 0.5 * (m0 * m0 / v0 - mu * mu / avar + math.log(v0 / avar))
    out = np.empty(N)
    for i in range(N):
        s = logchi1
        for t in range(T):
            x = lam[i, t]
            s += logc[i, t] - a1[t] * x - a2[t] * x * x
            if t < T - 1 and (a1[t + 1] != 0.0 or a2[t + 1] != 0.0):
                v = 1.0 / (1.0 / sigma2 - 2.0 * a2[t + 1])
                mp = mu + phi * (x - mu)
                m = v * (mp / sigma2 + a1[t + 1])
                s += 0.5 * (m * m / v - mp * mp / sigma2 + math.log(v / sigma2))
        out[i] = s
    return out

"""Fitting a single vine edge: simulated ML, static MLE, and BIC selection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .copulas import (
    SELECTABLE_FAMILIES,
    Family,
    fisher,
    log_pair_density,
    tau_to_theta,
    theta_to_tau,
)
from .eis import EisConfig, eis_fixed_point, log_mean_weight, make_base_noise
from .latent import ScarParams, from_unconstrained

STATIC_TAU_BOUND = 0.99
STATIC_TAU_MIN_POSITIVE = 0.01
MIN_T_TIME_VARYING = 50
MIN_T_STATIC = 10


class Mode(enum.Enum):
    TIME_VARYING = "time-varying"
    STATIC = "static"
    INDEPENDENCE = "independence"


def bic(loglik: float, k: int, T: int) -> float:
    """Bayesian information criterion -2 loglik + k log T; smaller is better."""
    if T < 1 or k < 0:
        raise ValueError("bic requires T >= 1 and k >= 0")
    return -2.0 * loglik + k * math.log(T)


@dataclass
class EdgeModel:
    """One fitted pair-copula slot: family, mode, and parameters."""

    family: Family
    mode: Mode
    scar: ScarParams | None = None
    theta: float | None = None
    loglik: float = 0.0
    n_params: int = 0
    bic: float = 0.0
    converged: bool = True

    def __post_init__(self):
        expected = {Mode.TIME_VARYING: 3, Mode.STATIC: 1, Mode.INDEPENDENCE: 0}[self.mode]
        if self.n_params != expected:
            raise ValueError(f"{self.mode.value} edge must have {expected} parameters")
        if self.mode is Mode.TIME_VARYING and self.scar is None:
            raise ValueError("time-varying edge requires latent process parameters")
        if self.mode is Mode.STATIC and self.theta is None:
            raise ValueError("static edge requires a copula parameter")
        if self.mode is Mode.INDEPENDENCE and (self.scar is not None or self.theta is not None):
            raise ValueError("independence edge carries no parameters")

    @property
    def static_tau(self) -> float:
        """Kendall's tau of a static or independence edge."""
        if self.mode is Mode.INDEPENDENCE:
            return 0.0
        if self.mode is Mode.STATIC:
            return float(theta_to_tau(self.family, self.theta))
        raise ValueError("time-varying edge has no single tau")


@dataclass
class CandidateScore:
    family: Family
    mode: Mode
    bic: float
    loglik: float


def independence_edge(T: int) -> EdgeModel:
    return EdgeModel(
        family=Family.INDEPENDENCE,
        mode=Mode.INDEPENDENCE,
        loglik=0.0,
        n_params=0,
        bic=bic(0.0, 0, T),
    )


def _static_loglik(u, v, family: Family, tau: float) -> float:
    theta = tau_to_theta(family, tau)
    return float(np.sum(log_pair_density(family, u, v, theta)))


def fit_static_edge(u_pair: np.ndarray, family: Family) -> EdgeModel:
    """Constant-parameter MLE over the Kendall's tau parameterization."""
    u_pair = np.asarray(u_pair, dtype=float)
    T = u_pair.shape[0]
    if T < MIN_T_STATIC:
        raise ValueError(f"static fit requires at least {MIN_T_STATIC} observations")
    if not family.has_parameter:
        raise ValueError("use independence_edge for the independence copula")
    u, v = u_pair[:, 0], u_pair[:, 1]
    lo = STATIC_TAU_MIN_POSITIVE if family.positive_only else -STATIC_TAU_BOUND
    hi = STATIC_TAU_BOUND
    res = minimize_scalar(
        lambda tau: -_static_loglik(u, v, family, tau),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-6},
    )
    tau_hat = float(res.x)
    at_boundary = tau_hat - lo < 1e-4 or hi - tau_hat < 1e-4
    loglik = -float(res.fun)
    return EdgeModel(
        family=family,
        mode=Mode.STATIC,
        theta=float(tau_to_theta(family, tau_hat)),
        loglik=loglik,
        n_params=1,
        bic=bic(loglik, 1, T),
        converged=bool(res.success) and not at_boundary,
    )


def _scar_start(u_pair: np.ndarray, family: Family) -> np.ndarray:
    from .vine import empirical_kendall_tau

    tau0 = empirical_kendall_tau(u_pair[:, 0], u_pair[:, 1])
    if family.positive_only:
        tau0 = max(tau0, 0.05)
    tau0 = float(np.clip(tau0, -0.95, 0.95))
    return np.array([fisher(tau0), math.atanh(0.9), math.log(0.1)])


def fit_scar_edge(
    u_pair: np.ndarray,
    family: Family,
    config: EisConfig,
    base_noise: np.ndarray | None = None,
) -> EdgeModel:
    """Maximize the simulated log-likelihood over (mu, artanh phi, log sigma).

    Derivative-free simplex search on the unconstrained triple; the same
    base-noise matrix is reused for every candidate point so the objective is
    smooth, and the importance-sampling fixed point is re-run at each point.
    One restart from the best vertex.
    """
    u_pair = np.asarray(u_pair, dtype=float)
    T = u_pair.shape[0]
    if T < MIN_T_TIME_VARYING:
        raise ValueError(
            f"time-varying fit requires at least {MIN_T_TIME_VARYING} observations; "
            "the latent dynamics are unidentifiable below that"
        )
    if not family.has_parameter:
        raise ValueError("the independence copula has no time-varying form")
    if base_noise is None:
        base_noise = make_base_noise(config, T)

    def objective(x):
        if (
            not np.all(np.isfinite(x))
            or abs(x[0]) > 20.0
            or abs(x[1]) > 20.0
            or x[2] > 1.6
            or x[2] < -9.0
        ):
            return math.inf
        params = from_unconstrained(x)
        res = eis_fixed_point(params, u_pair, family, config, base_noise=base_noise)
        ll = log_mean_weight(res.trajectories.log_weights)
        return -ll if math.isfinite(ll) else math.inf

    x0 = _scar_start(u_pair, family)
    # simplex spread wide enough to cross the (phi, sigma) likelihood ridge
    steps = np.array([0.15, 0.3, 0.4])
    simplex = np.vstack([x0] + [x0 + steps[j] * np.eye(3)[j] for j in range(3)])
    first = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-3, "fatol": 1e-3, "maxfev": 400, "initial_simplex": simplex},
    )
    second = minimize(
        objective,
        first.x,
        method="Nelder-Mead",
        options={"xatol": 1e-3, "fatol": 1e-3, "maxfev": 200},
    )
    best = second if second.fun <= first.fun else first
    params = from_unconstrained(best.x)
    loglik = -float(best.fun)
    return EdgeModel(
        family=family,
        mode=Mode.TIME_VARYING,
        scar=params,
        loglik=loglik,
        n_params=3,
        bic=bic(loglik, 3, T),
        converged=bool(second.success or first.success),
    )


_FAMILY_ORDER = {f: i for i, f in enumerate(SELECTABLE_FAMILIES)}


def select_edge_model(
    u_pair: np.ndarray,
    families=SELECTABLE_FAMILIES,
    allow_tv: bool = True,
    config: EisConfig | None = None,
    base_noise: np.ndarray | None = None,
) -> tuple[EdgeModel, list[CandidateScore]]:
    """Pick the smallest-BIC model among independence, static and time-varying
    candidates; ties break toward fewer parameters, then the fixed family order.

    All time-varying candidates share one base-noise matrix so their
    likelihoods are comparable.
    """
    u_pair = np.asarray(u_pair, dtype=float)
    T = u_pair.shape[0]
    families = list(families)
    if any(not f.has_parameter for f in families):
        raise ValueError("families must be parametric; independence is always a candidate")
    config = config or EisConfig()
    if allow_tv and base_noise is None:
        base_noise = make_base_noise(config, T)

    candidates = [independence_edge(T)]
    for family in families:
        candidates.append(fit_static_edge(u_pair, family))
    if allow_tv:
        for family in families:
            candidates.append(fit_scar_edge(u_pair, family, config, base_noise=base_noise))

    def sort_key(edge: EdgeModel):
        return (edge.bic, edge.n_params, _FAMILY_ORDER.get(edge.family, -1))

    winner = min(candidates, key=sort_key)
    scores = [CandidateScore(c.family, c.mode, c.bic, c.loglik) for c in candidates]
    return winner, scores

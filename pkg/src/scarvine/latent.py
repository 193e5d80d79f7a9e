"""Latent Gaussian AR(1) state process driving time-varying edges."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScarParams:
    """Hyper-parameters (mu, phi, sigma) of one latent AR(1) process."""

    mu: float
    phi: float
    sigma: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValueError(f"AR coefficient must satisfy |phi| < 1, got {self.phi}")
        if not self.sigma > 0.0:
            raise ValueError(f"innovation scale must be positive, got {self.sigma}")

    @property
    def avar(self) -> float:
        """Stationary variance sigma^2 / (1 - phi^2)."""
        return self.sigma**2 / (1.0 - self.phi**2)

    @property
    def sn(self) -> float:
        """Signal-to-noise ratio mu / (sigma (1 - phi^2)^(-1/2)) = mu / sqrt(avar)."""
        return self.mu * math.sqrt(1.0 - self.phi**2) / self.sigma


@dataclass(frozen=True)
class StationaryStats:
    sn: float
    avar: float


def stationary_stats(params: ScarParams) -> StationaryStats:
    return StationaryStats(sn=params.sn, avar=params.avar)


def simulate_path(params: ScarParams, T: int, noise: np.ndarray) -> np.ndarray:
    """Simulate the latent path lambda_1..lambda_T from standard-normal noise.

    The first state is drawn from the stationary distribution N(mu, avar);
    subsequent states follow the AR(1) recursion.  Deterministic given noise.
    """
    if T < 1:
        raise ValueError("path length must be at least 1")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (T,):
        raise ValueError(f"noise must have shape ({T},), got {noise.shape}")
    lam = np.empty(T)
    lam[0] = params.mu + math.sqrt(params.avar) * noise[0]
    for t in range(1, T):
        lam[t] = params.mu + params.phi * (lam[t - 1] - params.mu) + params.sigma * noise[t]
    return lam


def to_unconstrained(params: ScarParams) -> np.ndarray:
    """(mu, phi, sigma) -> (mu, artanh phi, log sigma) for unconstrained search."""
    return np.array([params.mu, math.atanh(params.phi), math.log(params.sigma)])


def from_unconstrained(triple) -> ScarParams:
    mu, aphi, lsig = (float(x) for x in triple)
    # tanh saturates to +-1.0 in floats for |x| > ~19; keep phi strictly inside
    phi = min(max(math.tanh(aphi), -1.0 + 1e-12), 1.0 - 1e-12)
    return ScarParams(mu=mu, phi=phi, sigma=math.exp(lsig))

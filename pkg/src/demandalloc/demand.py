"""Market demand model and Gaussian sample-path simulation.

Aggregate demand is a stationary Gaussian moving average around a positive
mean: D_t = mu + sum_k psi_k e_{t-k} with unit-variance shocks.  The filter
must be invertible so the market-wide shock history is recoverable from
observed demand; scale lives entirely in the coefficients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .polyalg import as_poly, is_invertible, variance
from .seller import std_normal_cdf

# Flag scenarios where the Gaussian approximation puts nontrivial mass on
# negative demand.
NEGATIVE_DEMAND_WARN_LEVEL = 0.05


class DemandModel:
    """Invertible MA(q) demand around mean mu, unit-variance shocks."""

    __slots__ = ("mu", "psi")

    def __init__(self, mu: float, psi, boundary_tol: float = 1e-9) -> None:
        psi = as_poly(psi)
        if mu <= 0:
            raise ValueError("mean demand mu must be positive")
        if psi.coeffs[0] == 0.0:
            raise ValueError("psi(0) must be nonzero")
        if not is_invertible(psi, boundary_tol):
            raise ValueError("psi must be invertible (no roots inside the unit disk)")
        self.mu = float(mu)
        self.psi = psi

    def __repr__(self) -> str:
        return f"DemandModel(mu={self.mu:g}, psi={self.psi!r})"


@dataclass(frozen=True)
class DemandPath:
    """Simulated demand realizations D_0..D_{T-1} with the shock history
    e_{-q}..e_{T-1} that produced them and the seed that drew it."""

    demands: np.ndarray
    shocks: np.ndarray
    seed: int


def simulate(model: DemandModel, horizon: int, seed: int) -> DemandPath:
    """Draw a stationary demand path of the given length.

    Shocks come from numpy's default PCG64 generator, so paths are bit-exact
    reproducible per seed.  q extra shocks are drawn before t=0 so the path
    is stationary from the first reported period.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p_neg = prob_negative(model)
    if p_neg > NEGATIVE_DEMAND_WARN_LEVEL:
        warnings.warn(
            f"P(D <= 0) = {p_neg:.3f} under the Gaussian model; simulated "
            "paths will contain negative demand",
            stacklevel=2,
        )
    q = model.psi.degree
    rng = np.random.default_rng(seed)
    shocks = rng.standard_normal(horizon + q)
    demands = model.mu + np.convolve(shocks, model.psi.coeffs)[q:q + horizon]
    demands.flags.writeable = False
    shocks.flags.writeable = False
    return DemandPath(demands=demands, shocks=shocks, seed=int(seed))


def prob_negative(model: DemandModel) -> float:
    """P(D_t <= 0) under the Gaussian model: cdf(-1/CV)."""
    cv = np.sqrt(variance(model.psi)) / model.mu
    return std_normal_cdf(-1.0 / cv) if cv > 0 else 0.0


def seller_cv_bound(model: DemandModel, alpha_bar: float, N: int) -> float:
    """Conservative cap on any seller's demand coefficient of variation
    under the one-lag neutral designs: market CV times sqrt(2(1+alpha^2)).

    Loose by design; use it to screen whether seller-level negative demand
    could matter before simulating.
    """
    if alpha_bar < 1:
        raise ValueError("alpha_bar is at least 1 for any implementable target")
    if N < 1:
        raise ValueError("N must be positive")
    cv = np.sqrt(variance(model.psi)) / model.mu
    return float(cv * np.sqrt(2.0 * (1.0 + alpha_bar ** 2)))

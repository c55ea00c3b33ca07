"""Platform payoff evaluation and the volatility design problem.

The platform earns the intermediation fee on all volume plus fulfillment
margin and storage rent on platform-fulfilled sellers.  Raising the design
volatility sigma grows rented safety stock linearly but pushes sellers past
their adoption thresholds one by one, so the payoff is piecewise linear with
downward jumps at finitely many breakpoints and the optimum sits at one of
them (or at the volatility floor).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .demand import DemandModel
from .policy import sigma_lower_bound
from .seller import (FBM, FBP, PlatformCosts, adoption_set, mode_choice,
                     mode_economics, seller_utility, sigma_participation_ub)

_PAYOFF_TIE_TOL = 1e-9


class EmptyFeasibleSet(ValueError):
    """Participation cap falls below the volatility floor; no design exists."""


@dataclass(frozen=True)
class PayoffResult:
    total: float
    intermediation: float
    fulfillment_share: float
    storage_rent: float
    adopters: frozenset
    n_adopters: int

    @property
    def breakdown(self) -> dict:
        return {"intermediation": self.intermediation,
                "fulfillment_share": self.fulfillment_share,
                "storage_rent": self.storage_rent}


@dataclass(frozen=True)
class PlatformSolution:
    sigma_star: float
    payoff_star: float
    adopters: frozenset
    gamma_fbp: float
    gamma_fbm: float
    payoff_breakdown: dict
    breakpoints: tuple
    sigma_lower: float
    sigma_upper: float


@dataclass(frozen=True)
class CurvePoint:
    sigma: float
    payoff: float
    n_adopters: int
    gamma_fbp: float
    gamma_fbm: float
    side: str


def breakpoints(sellers, costs: PlatformCosts, N: int, mu: float):
    """Ascending (sigma, seller) exit thresholds mu dF_n / (N dK_n).

    Only sellers whose platform-mode inventory coefficient is strictly
    dearer (dK_n > 0) ever exit; the rest stay for any sigma.
    """
    out = []
    for idx, params in enumerate(sellers, start=1):
        dF = params.f - costs.F
        dK = mode_economics(params, costs, FBP).K - mode_economics(params, costs, FBM).K
        if dK > 0:
            out.append((mu * dF / (N * dK), idx))
    out.sort()
    return out


def safety_stock_totals(sigma: float, sellers, costs: PlatformCosts, N: int,
                        mu: float, adopters=None):
    """(Gamma_FBP, Gamma_FBM): cumulative safety stock held at the platform
    by adopters and privately by everyone else, at this sigma."""
    if adopters is None:
        adopters = adoption_set(sellers, costs, N, mu, sigma)
    g_fbp = 0.0
    g_fbm = 0.0
    for idx, params in enumerate(sellers, start=1):
        if idx in adopters:
            g_fbp += sigma * mode_economics(params, costs, FBP).zeta
        else:
            g_fbm += sigma * mode_economics(params, costs, FBM).zeta
    return g_fbp, g_fbm


def payoff(sigma: float, sellers, costs: PlatformCosts, N: int, mu: float,
           adopters=None) -> PayoffResult:
    """Expected per-period platform payoff at design volatility sigma.

    adopters normally comes from the inclusive adoption rule; pass an
    explicit set to probe one-sided limits at a breakpoint.
    """
    if adopters is None:
        adopters = adoption_set(sellers, costs, N, mu, sigma)
    adopters = frozenset(adopters)
    n_adopt = len(adopters)
    zeta_sum = sum(mode_economics(sellers[i - 1], costs, FBP).zeta for i in adopters)
    mu_share = mu / N
    intermediation = costs.rho * mu
    fulfillment = costs.delta_f * mu_share * n_adopt
    storage = costs.delta_h * (mu_share * n_adopt + sigma * zeta_sum)
    return PayoffResult(total=intermediation + fulfillment + storage,
                        intermediation=intermediation,
                        fulfillment_share=fulfillment,
                        storage_rent=storage,
                        adopters=adopters,
                        n_adopters=n_adopt)


def cumulative_utility(sellers, costs: PlatformCosts, N: int, mu: float,
                       sigma: float) -> float:
    """Sum over sellers of the better mode's operating payoff."""
    total = 0.0
    for params in sellers:
        mode = mode_choice(params, costs, N, mu, sigma)
        total += seller_utility(params, costs, mode, mu / N, sigma)
    return total


def optimize(sellers, costs: PlatformCosts, model: DemandModel, N: int,
             sigma_cap: float) -> PlatformSolution:
    """Maximize the payoff over implementable sigma in [sigma_L, sigma_U].

    Within a fixed adopter set the payoff is affine and (for nonnegative
    storage rent) nondecreasing, so it suffices to evaluate the volatility
    floor, every exit threshold in range, and the participation cap.  Ties
    resolve to the smallest sigma.
    """
    sigma_l = sigma_lower_bound(model, N)
    sigma_u = sigma_participation_ub(sellers, costs, N, model.mu, sigma_cap)
    if sigma_u < sigma_l:
        raise EmptyFeasibleSet(
            f"participation cap {sigma_u:g} below volatility floor {sigma_l:g}"
        )
    bps = breakpoints(sellers, costs, N, model.mu)
    candidates = [sigma_l] + [s for s, _ in bps if sigma_l <= s <= sigma_u] + [sigma_u]
    candidates = sorted(set(candidates))

    best_sigma = None
    best = None
    for s in candidates:
        res = payoff(s, sellers, costs, N, model.mu)
        if best is None or res.total > best.total + _PAYOFF_TIE_TOL * max(1.0, abs(best.total)):
            best, best_sigma = res, s
    g_fbp, g_fbm = safety_stock_totals(best_sigma, sellers, costs, N, model.mu,
                                       adopters=best.adopters)
    return PlatformSolution(sigma_star=best_sigma, payoff_star=best.total,
                            adopters=best.adopters, gamma_fbp=g_fbp,
                            gamma_fbm=g_fbm, payoff_breakdown=best.breakdown,
                            breakpoints=tuple(bps), sigma_lower=sigma_l,
                            sigma_upper=sigma_u)


def _curve_point(sigma, sellers, costs, N, mu, side, adopters=None) -> CurvePoint:
    res = payoff(sigma, sellers, costs, N, mu, adopters=adopters)
    g_fbp, g_fbm = safety_stock_totals(sigma, sellers, costs, N, mu,
                                       adopters=res.adopters)
    return CurvePoint(sigma=sigma, payoff=res.total, n_adopters=res.n_adopters,
                      gamma_fbp=g_fbp, gamma_fbm=g_fbm, side=side)


def payoff_curve(sellers, costs: PlatformCosts, N: int, mu: float, sigma_grid,
                 sigma_cap: float = math.inf):
    """Plot-ready payoff samples: the grid plus both one-sided limits at
    every jump (each breakpoint in range, and the participation cap where
    the payoff falls to zero)."""
    grid = sorted(float(s) for s in sigma_grid)
    if not grid:
        return []
    sigma_u = sigma_participation_ub(sellers, costs, N, mu, sigma_cap)
    lo, hi = grid[0], grid[-1]
    points = []
    for s in grid:
        if s > sigma_u:
            points.append(CurvePoint(sigma=s, payoff=0.0, n_adopters=0,
                                     gamma_fbp=0.0, gamma_fbm=0.0, side="interior"))
        else:
            points.append(_curve_point(s, sellers, costs, N, mu, "interior"))
    for s, seller_idx in breakpoints(sellers, costs, N, mu):
        if lo <= s <= min(hi, sigma_u):
            points.append(_curve_point(s, sellers, costs, N, mu, "left"))
            strict = adoption_set(sellers, costs, N, mu, s, boundary="exclusive")
            points.append(_curve_point(s, sellers, costs, N, mu, "right",
                                       adopters=strict))
    if lo <= sigma_u <= hi:
        points.append(_curve_point(sigma_u, sellers, costs, N, mu, "left"))
        points.append(CurvePoint(sigma=sigma_u, payoff=0.0, n_adopters=0,
                                 gamma_fbp=0.0, gamma_fbm=0.0, side="right"))
    side_rank = {"left": 0, "interior": 1, "right": 2}
    points.sort(key=lambda p: (p.sigma, side_rank[p.side]))
    return points


def export_curve(points, fileobj) -> None:
    """CSV columns: sigma, payoff, n_adopters, gamma_fbp, gamma_fbm, side."""
    writer = csv.writer(fileobj)
    writer.writerow(["sigma", "payoff", "n_adopters", "gamma_fbp", "gamma_fbm", "side"])
    for p in points:
        writer.writerow([f"{p.sigma:.6f}", f"{p.payoff:.6f}", p.n_adopters,
                         f"{p.gamma_fbp:.6f}", f"{p.gamma_fbm:.6f}", p.side])


def solution_document(solution: PlatformSolution, sellers, costs: PlatformCosts,
                      model: DemandModel, N: int) -> dict:
    """Structured summary mirroring the headline outcome table."""
    at_floor = payoff(solution.sigma_lower, sellers, costs, N, model.mu)
    floor_fbp, floor_fbm = safety_stock_totals(solution.sigma_lower, sellers,
                                               costs, N, model.mu,
                                               adopters=at_floor.adopters)
    return {
        "sigma_star": solution.sigma_star,
        "payoff_star": solution.payoff_star,
        "adopters": sorted(solution.adopters),
        "gamma_fbp": solution.gamma_fbp,
        "gamma_fbm": solution.gamma_fbm,
        "payoff_breakdown": dict(solution.payoff_breakdown),
        "cumulative_utility": cumulative_utility(sellers, costs, N, model.mu,
                                                 solution.sigma_star),
        "sigma_lower": solution.sigma_lower,
        "sigma_upper": solution.sigma_upper,
        "breakpoints": [{"sigma": s, "seller": n} for s, n in solution.breakpoints],
        "at_sigma_lower": {
            "payoff": at_floor.total,
            "adopters": sorted(at_floor.adopters),
            "gamma_fbp": floor_fbp,
            "gamma_fbm": floor_fbm,
            "cumulative_utility": cumulative_utility(sellers, costs, N,
                                                     model.mu,
                                                     solution.sigma_lower),
        },
    }

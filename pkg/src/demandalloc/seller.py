"""Seller-side economics: critical fractiles, inventory cost coefficients,
base stocks, fulfillment-mode utilities, adoption sets, and the
participation cap on demand volatility.

A seller holding inventory against a Gaussian demand forecast with root MSFE
sigma pays an expected holding-plus-backorder cost K * sigma per period at
the optimal base stock, where K depends only on the unit costs of the chosen
fulfillment mode.  Mode choice compares the two margins net of K * sigma.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

FBM = "FBM"
FBP = "FBP"

# Relative slack for the adoption comparator so a sigma computed exactly at a
# seller's switching threshold still classifies as adopting (the boundary is
# inclusive by convention).
_BOUNDARY_SLACK = 1e-9


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


def std_normal_cdf(x: float) -> float:
    """Standard normal cdf via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation to the inverse normal cdf (abs error
# ~1.15e-9 before polishing).
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)


def std_normal_quantile(p: float) -> float:
    """Inverse standard normal cdf.

    Acklam's rational approximation with one Newton polish step; absolute
    error well under 1e-9 across (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile defined on open interval (0, 1), got {p}")
    p_low = 0.02425
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    # Newton step on cdf(x) - p.
    err = std_normal_cdf(x) - p
    pdf = _std_normal_pdf(x)
    if pdf > 0.0:
        x -= err / pdf
    return x


def std_normal_loss(z: float) -> float:
    """Standard normal loss L(z) = pdf(z) - z * (1 - cdf(z)); nonnegative."""
    return max(_std_normal_pdf(z) - z * std_normal_cdf(-z), 0.0)


@dataclass(frozen=True)
class SellerParams:
    """Per-unit seller costs under self-fulfillment: holding h, backorder b,
    fulfillment f."""

    h: float
    b: float
    f: float

    def __post_init__(self):
        if self.h <= 0 or self.b <= 0:
            raise DomainError("holding and backorder costs must be positive")
        if self.f < 0:
            raise DomainError("fulfillment cost must be nonnegative")


@dataclass(frozen=True)
class PlatformCosts:
    """Platform-wide unit economics.

    rho: intermediation fee; F / H: fulfillment and holding costs charged to
    platform-fulfilled sellers; delta_f / delta_h: platform's net fulfillment
    payoff and storage rent; r: gross per-unit margin.
    """

    rho: float
    F: float
    H: float
    delta_f: float
    delta_h: float
    r: float

    def __post_init__(self):
        if self.r <= self.rho + self.F:
            warnings.warn(
                "gross margin r does not exceed rho + F; platform-fulfilled "
                "sellers earn a nonpositive margin in this scenario",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ModeEconomics:
    """Critical fractile and inventory cost coefficient for one mode."""

    zeta: float
    K: float
    mode: str

    def __post_init__(self):
        if self.K < 0:
            raise DomainError("inventory coefficient must be nonnegative")


def inventory_coefficient(h_bar: float, b: float, mode: str = FBM) -> ModeEconomics:
    """K = h_bar * zeta + (h_bar + b) * L(zeta) at zeta = quantile(b/(h_bar+b)).

    The mode argument is a label carried through to the result; K itself
    depends only on the costs.
    """
    if h_bar <= 0 or b <= 0:
        raise DomainError("inventory coefficient needs positive h_bar and b")
    zeta = std_normal_quantile(b / (h_bar + b))
    K = h_bar * zeta + (h_bar + b) * std_normal_loss(zeta)
    return ModeEconomics(zeta=zeta, K=K, mode=mode)


def mode_economics(params: SellerParams, costs: PlatformCosts, mode: str) -> ModeEconomics:
    """Fractile and K for this seller under the requested fulfillment mode."""
    if mode == FBP:
        return inventory_coefficient(costs.H, params.b, mode=FBP)
    if mode == FBM:
        return inventory_coefficient(params.h, params.b, mode=FBM)
    raise ValueError(f"unknown mode {mode!r}")


def base_stock(mean_forecast: float, sigma: float, zeta: float) -> float:
    """Order-up-to level: forecast plus zeta standard deviations of error."""
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    return mean_forecast + zeta * sigma


def seller_utility(params: SellerParams, costs: PlatformCosts, mode: str,
                   mu_share: float, sigma: float) -> float:
    """Expected per-period operating payoff under the given mode.

    Margin on the mean share minus the inventory cost K * sigma.
    """
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if mu_share <= 0:
        raise DomainError("mu_share must be positive")
    econ = mode_economics(params, costs, mode)
    f_eff = costs.F if mode == FBP else params.f
    return (costs.r - costs.rho - f_eff) * mu_share - econ.K * sigma


def _adoption_margin(params: SellerParams, costs: PlatformCosts, N: int,
                     mu: float, sigma: float) -> float:
    """Utility advantage of FBP over FBM: (mu/N) dF - sigma dK.

    Nonnegative means adopt.  This is the utility comparison itself, so it
    stays correct even when dK < 0 and the ratio form of the threshold flips.
    """
    dF = params.f - costs.F
    dK = mode_economics(params, costs, FBP).K - mode_economics(params, costs, FBM).K
    if dK < 0:
        warnings.warn(
            "K_FBP < K_FBM for a seller (holding-cost assumption violated); "
            "adoption decided by direct utility comparison",
            stacklevel=3,
        )
    return (mu / N) * dF - sigma * dK


def mode_choice(params: SellerParams, costs: PlatformCosts, N: int, mu: float,
                sigma: float) -> str:
    """FBP iff the fulfillment saving covers the extra inventory cost.

    The boundary is inclusive: a seller exactly at its switching threshold
    adopts.  A small relative slack keeps thresholds computed in floating
    point on the inclusive side.
    """
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    margin = _adoption_margin(params, costs, N, mu, sigma)
    dF = params.f - costs.F
    scale = max(1.0, abs((mu / N) * dF), abs(margin - (mu / N) * dF))
    return FBP if margin >= -_BOUNDARY_SLACK * scale else FBM


def adoption_set(sellers, costs: PlatformCosts, N: int, mu: float,
                 sigma: float, boundary: str = "inclusive") -> set:
    """1-based indices of sellers choosing FBP at this sigma.

    boundary="exclusive" drops sellers sitting exactly on their threshold;
    the payoff-curve export uses it for right-sided limits.
    """
    out = set()
    for idx, params in enumerate(sellers, start=1):
        margin = _adoption_margin(params, costs, N, mu, sigma)
        dF = params.f - costs.F
        scale = max(1.0, abs((mu / N) * dF), abs(margin - (mu / N) * dF))
        slack = _BOUNDARY_SLACK * scale
        adopt = margin >= -slack if boundary == "inclusive" else margin > slack
        if adopt:
            out.add(idx)
    return out


def sigma_participation_ub(sellers, costs: PlatformCosts, N: int, mu: float,
                           sigma_cap: float) -> float:
    """Largest sigma at which every seller's best-mode utility stays nonnegative.

    Per seller this is max over modes of margin / K; the market-wide cap is
    the minimum over sellers, floored at 0 and capped at sigma_cap.
    """
    if sigma_cap <= 0:
        raise DomainError("sigma_cap must be positive")
    mu_share = mu / N
    bound = math.inf
    for params in sellers:
        k_fbm = mode_economics(params, costs, FBM).K
        k_fbp = mode_economics(params, costs, FBP).K
        t = max((costs.r - costs.rho - params.f) * mu_share / k_fbm,
                (costs.r - costs.rho - costs.F) * mu_share / k_fbp)
        bound = min(bound, t)
    if bound < 0:
        return 0.0
    if bound > sigma_cap:
        warnings.warn(
            f"participation bound exceeds sigma_cap={sigma_cap:g}; cap binds",
            stacklevel=2,
        )
        return sigma_cap
    return float(bound)


def check_cost_assumptions(sellers, costs: PlatformCosts) -> list:
    """Warn (and list messages) where platform fulfillment is not weakly
    cheaper (F <= f_n) or platform holding not weakly dearer (H >= h_n)."""
    messages = []
    for idx, params in enumerate(sellers, start=1):
        if costs.F > params.f:
            messages.append(f"seller {idx}: platform fulfillment cost F={costs.F:g} "
                            f"exceeds own cost f={params.f:g}")
        if costs.H < params.h:
            messages.append(f"seller {idx}: platform holding cost H={costs.H:g} "
                            f"below own cost h={params.h:g}")
    for msg in messages:
        warnings.warn(msg, stacklevel=2)
    return messages


def k_table(sellers, costs: PlatformCosts):
    """Rows of (seller, h, b, f, K_fbm, K_fbp), 1-based."""
    rows = []
    for idx, params in enumerate(sellers, start=1):
        rows.append((idx, params.h, params.b, params.f,
                     mode_economics(params, costs, FBM).K,
                     mode_economics(params, costs, FBP).K))
    return rows


def export_k_table(sellers, costs: PlatformCosts, fileobj) -> None:
    """Write the per-seller inventory-coefficient table as CSV."""
    writer = csv.writer(fileobj)
    writer.writerow(["seller", "h", "b", "f", "K_fbm", "K_fbp"])
    for row in k_table(sellers, costs):
        writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])

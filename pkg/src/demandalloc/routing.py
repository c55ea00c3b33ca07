"""Online order routing that tracks the benchmark allocation.

Each period the benchmark hands seller n a target x_n = D_t/N + b_n, where
the offsets b_n depend only on lagged aggregate demand and sum to zero.  The
greedy router assigns every arriving order to the seller with the smallest
offset-adjusted count; when all targets are nonnegative the final counts
land within one order of every target.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandPath

OFFSET_SUM_TOL = 1e-9
# Floating-point slack when comparing adjusted counts for the argmin and
# when screening targets for feasibility.
_TIE_TOL = 1e-12


class InfeasibleTargets(ValueError):
    """Some benchmark targets are negative; the one-unit tracking guarantee
    does not apply.  Carries the offending 1-based seller indices."""

    def __init__(self, sellers, period=None):
        self.sellers = list(sellers)
        self.period = period
        where = f" in period {period}" if period is not None else ""
        super().__init__(f"negative targets for sellers {self.sellers}{where}")


@dataclass(frozen=True)
class PeriodOffsets:
    """Per-seller additive corrections to the equal split for one period."""

    offsets: np.ndarray
    period: int = 0

    def __post_init__(self):
        b = np.asarray(self.offsets, dtype=float)
        object.__setattr__(self, "offsets", b)
        scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0)
        if abs(float(b.sum())) > OFFSET_SUM_TOL * scale:
            raise ValueError("offsets must sum to zero")


@dataclass(frozen=True)
class RoutingResult:
    counts: np.ndarray
    targets: np.ndarray
    max_discrepancy: float
    assignment_log: np.ndarray


def compute_offsets(N: int, mu: float, sigma: float, sigma_L: float,
                    D_prev: float, D_prev2: float, period: int = 0) -> PeriodOffsets:
    """Offsets for the minimal-memory neutral designs.

    Even N alternates +-(sigma/(N sigma_L)) times last period's demand
    deviation; odd N gives sellers 1 and 2 the two-lag roles and alternates
    the rest.  A single seller has no offset.
    """
    if not sigma >= sigma_L > 0:
        raise ValueError("need sigma >= sigma_L > 0")
    scale = sigma / (N * sigma_L)
    d1 = D_prev - mu
    d2 = D_prev2 - mu
    if N == 1:
        b = np.zeros(1)
    elif N % 2 == 0:
        signs = np.array([(-1.0) ** n for n in range(1, N + 1)])
        b = scale * d1 * signs
    else:
        b = np.empty(N)
        b[0] = scale * (d1 + d2)
        b[1] = -scale * d2
        for n in range(3, N + 1):
            b[n - 1] = scale * (-1.0) ** n * d1
    return PeriodOffsets(offsets=b, period=period)


def route_orders(offsets: PeriodOffsets, D_t: int, seed: int,
                 tie_break: str = "random", mask=None) -> RoutingResult:
    """Assign D_t orders one at a time by smallest offset-adjusted count.

    Ties go to a uniformly random candidate under the seeded generator, or
    to the lowest index with tie_break="lowest" for reproducible goldens.
    mask optionally restricts each order to a subset of sellers: a boolean
    row per order (shape (D_t, N)) or one row applied to every order.  The
    one-unit tracking bound is only guaranteed unmasked.
    """
    b = offsets.offsets
    N = b.size
    if D_t < 0:
        raise ValueError("order count must be nonnegative")
    targets = D_t / N + b
    scale = max(1.0, float(np.max(np.abs(targets))))
    bad = np.flatnonzero(targets < -_TIE_TOL * scale)
    if bad.size:
        raise InfeasibleTargets((bad + 1).tolist(), period=offsets.period)

    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape == (N,):
            mask = np.broadcast_to(mask, (D_t, N))
        if mask.shape != (D_t, N):
            raise ValueError("mask must have shape (N,) or (D_t, N)")

    rng = np.random.default_rng(seed)
    counts = np.zeros(N, dtype=np.int64)
    log = np.empty(D_t, dtype=np.int64)
    for k in range(D_t):
        adjusted = counts - b
        if mask is not None:
            allowed = np.flatnonzero(mask[k])
            if allowed.size == 0:
                raise ValueError(f"order {k} has no available seller")
        else:
            allowed = None
        pool = adjusted if allowed is None else adjusted[allowed]
        m = pool.min()
        ties = np.flatnonzero(pool <= m + _TIE_TOL * max(1.0, abs(m)))
        pick = ties[0] if tie_break == "lowest" else rng.choice(ties)
        chosen = int(pick if allowed is None else allowed[pick])
        counts[chosen] += 1
        log[k] = chosen + 1
    discrepancy = float(np.max(np.abs(counts - targets))) if N else 0.0
    return RoutingResult(counts=counts, targets=targets,
                         max_discrepancy=discrepancy, assignment_log=log)


@dataclass(frozen=True)
class RoutePathResult:
    """Per-period routing outcomes over a demand path."""

    results: list
    infeasible_periods: list
    cumulative_counts: np.ndarray
    cumulative_shares: np.ndarray
    max_discrepancy: float
    integer_demand: np.ndarray = field(repr=False, default=None)


def integerize_demand(path: DemandPath) -> np.ndarray:
    """Round a simulated Gaussian path to nonnegative integer order counts."""
    return np.maximum(np.rint(np.asarray(path.demands)), 0.0).astype(np.int64)


def route_path(N: int, mu: float, sigma: float, sigma_L: float,
               path: DemandPath, seed: int, on_infeasible: str = "raise",
               tie_break: str = "random") -> RoutePathResult:
    """Route a whole demand path period by period.

    Offsets are recomputed each period from the lagged realized (integer)
    demand; missing lags before the path starts count as demand at the mean.
    on_infeasible="skip" records periods with negative targets instead of
    raising; their orders are not routed.
    """
    demand = integerize_demand(path)
    T = demand.size
    period_seeds = np.random.default_rng(seed).integers(0, 2 ** 63, size=T)
    results = []
    infeasible = []
    cumulative = np.zeros(N, dtype=np.int64)
    worst = 0.0
    for t in range(T):
        d_prev = float(demand[t - 1]) if t >= 1 else mu
        d_prev2 = float(demand[t - 2]) if t >= 2 else mu
        offs = compute_offsets(N, mu, sigma, sigma_L, d_prev, d_prev2, period=t)
        try:
            res = route_orders(offs, int(demand[t]), int(period_seeds[t]),
                               tie_break=tie_break)
        except InfeasibleTargets:
            if on_infeasible != "skip":
                raise
            infeasible.append(t)
            results.append(None)
            continue
        results.append(res)
        cumulative += res.counts
        worst = max(worst, res.max_discrepancy)
    total = int(cumulative.sum())
    shares = cumulative / total if total else np.zeros(N)
    return RoutePathResult(results=results, infeasible_periods=infeasible,
                           cumulative_counts=cumulative,
                           cumulative_shares=shares,
                           max_discrepancy=worst,
                           integer_demand=demand)


def export_assignment_log(path_result: RoutePathResult, fileobj) -> None:
    """CSV log: period, order index, chosen seller, adjusted counts snapshot.

    The snapshot columns adj_1..adj_N hold counts minus offsets immediately
    after the order is assigned.
    """
    n = path_result.cumulative_counts.size
    writer = csv.writer(fileobj)
    writer.writerow(["period", "order", "seller"] + [f"adj_{i}" for i in range(1, n + 1)])
    for t, res in enumerate(path_result.results):
        if res is None:
            continue
        offs = res.targets - float(res.counts.sum()) / res.counts.size
        counts = np.zeros(res.counts.size, dtype=np.int64)
        for k, seller in enumerate(res.assignment_log):
            counts[seller - 1] += 1
            adjusted = counts - offs
            writer.writerow([t, k, int(seller)] + [f"{a:.6f}" for a in adjusted])

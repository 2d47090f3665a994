"""Weighted, demand-capped max-min sharing of a single bottleneck link.

`weighted_share` is the allocation rule used by the simulator every step:
flows saturated by their own demand keep it, and the leftover capacity is
water-filled across the remaining flows in proportion to their weights.

`available_rates` answers the counterfactual a client measures when it
bursts: the rate flow i would get if its own demand were unbounded while
everyone else kept theirs.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ModelError


def _validate(demands, weights, capacity):
    demands = np.asarray(demands, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if demands.shape != weights.shape or demands.ndim != 1:
        raise ModelError("demands and weights must be 1-D arrays of equal length")
    if capacity <= 0 or not math.isfinite(capacity):
        raise ModelError(f"capacity must be finite and > 0, got {capacity}")
    if demands.size and (np.any(weights <= 0) or not np.all(np.isfinite(weights))):
        raise ModelError("weights must be finite and strictly positive")
    if np.any(demands < 0):
        raise ModelError("demands must be >= 0 (use inf for unbounded)")
    return demands, weights


def weighted_share(demands, weights, capacity: float) -> np.ndarray:
    """Allocate capacity by demand-capped weighted max-min fairness.

    Each flow receives min(demand, w_i * level) where the water level is
    raised until capacity is exhausted or every demand is met. Allocations
    sum to capacity exactly whenever total demand is at least capacity, and
    are invariant to rescaling all weights by a constant.
    """
    demands, weights = _validate(demands, weights, capacity)
    n = demands.size
    if n == 0:
        return np.zeros(0)

    total_demand = demands.sum()
    if np.isfinite(total_demand) and total_demand <= capacity:
        return demands.copy()

    # Sort by saturation level demand/weight; flows saturate in this order.
    ratio = demands / weights
    order = np.argsort(ratio, kind="stable")
    d_s = demands[order]
    w_s = weights[order]
    r_s = ratio[order]

    # After saturating the first k flows the level is
    # (capacity - sum of their demands) / (remaining weight).
    cum_d = np.concatenate(([0.0], np.cumsum(np.where(np.isfinite(d_s), d_s, 0.0))))
    cum_w = np.concatenate(([0.0], np.cumsum(w_s)))
    total_w = cum_w[-1]

    k = 0
    level = capacity / total_w
    while k < n and np.isfinite(r_s[k]) and r_s[k] <= level:
        k += 1
        rem_w = total_w - cum_w[k]
        if rem_w <= 0:
            level = math.inf
            break
        level = (capacity - cum_d[k]) / rem_w

    alloc_sorted = np.empty(n)
    alloc_sorted[:k] = d_s[:k]
    alloc_sorted[k:] = w_s[k:] * max(level, 0.0)

    alloc = np.empty(n)
    alloc[order] = alloc_sorted
    return alloc


def available_rates(demands, weights, capacity: float, allocations=None) -> np.ndarray:
    """Per-flow rate if that flow alone had unbounded demand.

    For a flow that is weight-limited in the base allocation this equals its
    current allocation (its demand was not the binding constraint). For a
    demand-saturated flow the link is re-solved with that demand removed.
    Results for flows sharing the same (demand, weight) are identical, so
    the re-solve is memoized on that pair.
    """
    demands, weights = _validate(demands, weights, capacity)
    n = demands.size
    if n == 0:
        return np.zeros(0)
    if allocations is None:
        allocations = weighted_share(demands, weights, capacity)
    else:
        allocations = np.asarray(allocations, dtype=float)

    avail = allocations.copy()
    finite = np.isfinite(demands)
    saturated = np.zeros(n, dtype=bool)
    saturated[finite] = allocations[finite] >= demands[finite] - 1e-12 * np.maximum(
        np.abs(demands[finite]), 1.0
    )
    if not np.any(saturated):
        return avail

    cache: dict[tuple[float, float], float] = {}
    probe = demands.copy()
    for i in np.nonzero(saturated)[0]:
        key = (demands[i], weights[i])
        rate = cache.get(key)
        if rate is None:
            probe[i] = math.inf
            rate = weighted_share(probe, weights, capacity)[i]
            probe[i] = demands[i]
            cache[key] = rate
        avail[i] = rate
    return avail

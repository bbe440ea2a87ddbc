"""Neighborhood balancing index and the station-side weight heuristic."""

import math
from dataclasses import dataclass, field, replace

from .errors import EmptyNeighborhood


@dataclass
class NeighborhoodCosts:
    ap_costs: dict = field(default_factory=dict)  # ap id -> uplink + downlink cost, us
    epoch_us: float = 0.0


def balancing_index(costs):
    """Fairness of the loads in a neighborhood, between 1/n and 1.

    Accepts a ``NeighborhoodCosts`` or any iterable of non-negative costs.
    Evaluated in exact rational arithmetic, so the result does not depend
    on the order of the costs. An all-idle neighborhood counts as balanced.
    """
    values = costs.ap_costs.values() if isinstance(costs, NeighborhoodCosts) else costs
    ratios = [v.as_integer_ratio() for v in values]
    if not ratios:
        raise EmptyNeighborhood("balancing index of an empty neighborhood")
    if any(p < 0 for p, _ in ratios):
        raise ValueError("costs must be non-negative")
    # Scale to a common denominator and work in integers; int / int rounds
    # correctly, so this equals the exact rational result rounded once.
    denom = math.lcm(*(q for _, q in ratios))
    nums = [p * (denom // q) for p, q in ratios]
    squares = sum(x * x for x in nums)
    if squares == 0:
        return 1.0
    total = sum(nums)
    return total * total / (len(nums) * squares)


def laba_exchange(all_ap_loads, neighbor_map, epoch_us=0.0):
    """Each AP learns its own cost and the cost of every neighbor."""
    for ap, nbrs in neighbor_map.items():
        for other in nbrs:
            if ap not in neighbor_map.get(other, ()):
                raise ValueError(f"neighbor map is not symmetric: {ap} -> {other}")
    out = {}
    for ap in sorted(all_ap_loads):
        members = {ap} | set(neighbor_map.get(ap, ()))
        out[ap] = NeighborhoodCosts(
            {m: all_ap_loads[m] for m in sorted(members) if m in all_ap_loads}, epoch_us)
    return out


@dataclass(frozen=True)
class BalancerState:
    b: float = 1.0
    threshold_T: float = 0.8
    w1: float = 0.5
    w2: float = 0.5
    w1_init: float = 0.5
    w1_max: float = 0.9
    step_delta: float = 0.05
    relax_patience: int = 5
    relax_count: int = 0

    @classmethod
    def from_policy(cls, policy):
        return cls(
            threshold_T=policy.balance_threshold_T,
            w1=policy.w1_init,
            w2=policy.w2_init,
            w1_init=policy.w1_init,
            w1_max=max(policy.w1_max, policy.w1_init),
            step_delta=policy.step_delta,
            relax_patience=policy.relax_patience,
        )


def beacon_annotation(state):
    return state.b


def adapt_weights(state, heard_b):
    """One step of the weight heuristic after hearing ``heard_b`` in a beacon.

    Below the threshold the association weight grows by one step, capped at
    ``w1_max``. After ``relax_patience`` consecutive balanced beacons it
    steps back toward ``w1_init``.
    """
    if not 0.0 < heard_b <= 1.0:
        raise ValueError(f"balancing index {heard_b} outside (0, 1]")
    if heard_b < state.threshold_T:
        w1 = min(state.w1 + state.step_delta, state.w1_max)
        return replace(state, b=heard_b, w1=w1, w2=1.0 - w1, relax_count=0)
    relax = state.relax_count + 1
    if relax >= state.relax_patience:
        w1 = max(state.w1 - state.step_delta, state.w1_init)
        return replace(state, b=heard_b, w1=w1, w2=1.0 - w1, relax_count=0)
    return replace(state, b=heard_b, relax_count=relax)

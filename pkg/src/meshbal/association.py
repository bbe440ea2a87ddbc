"""Association decision policies run by each station."""

import enum
from dataclasses import dataclass
from typing import Optional

from .airtime import check_weights, total_cost
from .errors import MissingCost, MissingRouteCost, NoCandidates


class Cause(enum.Enum):
    INITIAL_JOIN = "InitialJoin"
    PERIODIC_REASSOC = "PeriodicReassoc"
    BALANCER_TRIGGERED = "BalancerTriggered"


@dataclass(frozen=True)
class CandidateAp:
    ap_id: str
    channel: int
    rssi_dbm: float
    uplink_cost_us: Optional[float] = None
    downlink_cost_us: Optional[float] = None
    route_cost_us: Optional[float] = None
    beacon_age_us: float = 0.0


@dataclass(frozen=True)
class AssocDecision:
    chosen_ap: str
    score: float
    cause: Cause = Cause.INITIAL_JOIN


def _argmin(candidates, score, cause):
    # Ties resolve to the lowest ap_id through the tuple comparison.
    best_score, best_id = min((score(c), c.ap_id) for c in candidates)
    return AssocDecision(best_id, best_score, cause)


def _require(candidates):
    if not candidates:
        raise NoCandidates("no candidate access points")


def airtime_score(c):
    if c.uplink_cost_us is None or c.downlink_cost_us is None:
        raise MissingCost(f"candidate {c.ap_id} lacks uplink or downlink cost")
    return c.uplink_cost_us + c.downlink_cost_us


def decide_rssi(candidates, cause=Cause.INITIAL_JOIN):
    """Strongest signal wins; equal RSSI goes to the lowest AP id."""
    _require(candidates)
    best_neg, best_id = min((-c.rssi_dbm, c.ap_id) for c in candidates)
    return AssocDecision(best_id, -best_neg, cause)


def decide_airtime(candidates, cause=Cause.INITIAL_JOIN):
    _require(candidates)
    return _argmin(candidates, airtime_score, cause)


def crosslayer_score(c, w1, w2):
    if c.route_cost_us is None:
        raise MissingRouteCost(f"candidate {c.ap_id} lacks a route cost")
    return total_cost(*_costs(c), c.route_cost_us, w1, w2)


def _costs(c):
    if c.uplink_cost_us is None or c.downlink_cost_us is None:
        raise MissingCost(f"candidate {c.ap_id} lacks uplink or downlink cost")
    return c.uplink_cost_us, c.downlink_cost_us


def decide_crosslayer(candidates, w1, w2, cause=Cause.INITIAL_JOIN):
    _require(candidates)
    check_weights(w1, w2)
    return _argmin(candidates, lambda c: crosslayer_score(c, w1, w2), cause)


def should_reassociate(current_score, best_other_score, hysteresis_h=0.1):
    """Cost semantics: move only when the other AP is cheaper by more than h."""
    return best_other_score < current_score * (1.0 - hysteresis_h)

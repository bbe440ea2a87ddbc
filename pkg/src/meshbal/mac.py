"""Simplified contention MAC: one backoff draw per round, ties collide.

Each backlogged transmitter in a contention domain draws a slot uniformly
from ``0..cw_slots-1``. A unique minimum wins the medium; several
transmitters sharing the minimum collide and all of them retry. A winning
frame can still be lost to channel errors. A frame is dropped once its
retry count exceeds ``retry_limit``.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class MacParams:
    slot_us: float = 20.0
    cw_slots: int = 16
    retry_limit: int = 7


def frame_airtime(params, size_bits, rate_mbps):
    """Medium occupancy of one attempt, using the access/protocol overheads."""
    return params.o_ca_us + params.o_p_us + size_bits / rate_mbps


@dataclass
class RoundOutcome:
    start_us: float          # first bit on air, after the idle backoff slots
    end_us: float            # medium free again
    winner: object           # contender key, or None on collision
    colliders: tuple         # contender keys that collided (empty on success path)
    errored: bool = False    # winner's frame lost to channel error


def contention_round(now_us, contenders, mac=MacParams()):
    """Resolve one contention round.

    ``contenders`` is a sequence of ``(key, airtime_us, slot_rng, error_rng,
    error_prob)``. Each contender draws its own slot from its own stream so
    adding a transmitter never perturbs the others' draws. Returns a
    ``RoundOutcome``; the caller applies retry bookkeeping.
    """
    draws = [(c[2].randrange(mac.cw_slots), c) for c in contenders]
    low = min(d[0] for d in draws)
    at_low = [c for slot, c in draws if slot == low]
    start = now_us + low * mac.slot_us
    if len(at_low) == 1:
        key, airtime, _, err_rng, err_p = at_low[0]
        errored = err_p > 0.0 and err_rng.random() < err_p
        return RoundOutcome(start, start + airtime, key, (), errored)
    return RoundOutcome(start, start + max(c[1] for c in at_low), None,
                        tuple(c[0] for c in at_low))

"""Airtime cost algebra for association and routing decisions.

All costs are in microseconds: a bit count divided by a rate in Mb/s is a
duration in microseconds, so ``b_t_bits / rate_mbps`` needs no conversion.
"""

from dataclasses import dataclass

from .errors import DegenerateError, WeightError

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AirtimeParams:
    """Overheads and test-frame size; defaults are the 802.11b values."""

    o_ca_us: float = 335.0
    o_p_us: float = 364.0
    b_t_bits: float = 8224.0

    def __post_init__(self):
        for name in ("o_ca_us", "o_p_us", "b_t_bits"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def overhead_us(self):
        return self.o_ca_us + self.o_p_us


@dataclass(frozen=True)
class StationLinkSample:
    rate_mbps: float
    error_prob: float


def _check_error(e):
    if e >= 1.0:
        raise DegenerateError(f"error probability {e} makes 1/(1-e) singular")
    if e < 0.0:
        raise ValueError(f"error probability {e} is negative")


def station_airtime(params, sample):
    """Expected channel occupancy of one test frame on a single link."""
    _check_error(sample.error_prob)
    if not sample.rate_mbps > 0:
        raise ValueError("rate_mbps must be positive")
    return (params.o_ca_us + params.o_p_us + params.b_t_bits / sample.rate_mbps) * (
        1.0 / (1.0 - sample.error_prob)
    )


def harmonic_rate(rates):
    """Rate whose reciprocal is the mean reciprocal of ``rates`` (0 if empty)."""
    rates = list(rates)
    if not rates:
        return 0.0
    return len(rates) / sum(1.0 / r for r in rates)


def uplink_load(params, avg_rate, avg_error, n_stations):
    """Uplink cell load from the beacon-advertised aggregates.

    ``avg_rate`` is the aggregate whose reciprocal is the mean reciprocal
    uplink rate, so ``B_t / avg_rate`` equals ``B_t * mean(1/r)``.
    """
    if n_stations == 0:
        return 0.0
    if n_stations < 0:
        raise ValueError("n_stations must be non-negative")
    return station_airtime(params, StationLinkSample(avg_rate, avg_error)) * n_stations


def downlink_load(params, samples):
    overhead_sum = 0.0
    payload_sum = 0.0
    for s in samples:
        _check_error(s.error_prob)
        if not s.rate_mbps > 0:
            raise ValueError("rate_mbps must be positive")
        inv = 1.0 / (1.0 - s.error_prob)
        overhead_sum += inv
        payload_sum += 1.0 / (s.rate_mbps * (1.0 - s.error_prob))
    return (params.o_ca_us + params.o_p_us) * overhead_sum + params.b_t_bits * payload_sum


def check_weights(w1, w2):
    if not (0.0 <= w1 <= 1.0 and 0.0 <= w2 <= 1.0):
        raise WeightError(f"weights ({w1}, {w2}) must lie in [0, 1]")
    if abs(w1 + w2 - 1.0) > WEIGHT_TOLERANCE:
        raise WeightError(f"weights ({w1}, {w2}) must sum to 1")


def total_cost(ac_up, ac_down, rc, w1, w2):
    """Weighted end-to-end cost: association part times w1 plus route part times w2."""
    check_weights(w1, w2)
    return (ac_up + ac_down) * w1 + rc * w2

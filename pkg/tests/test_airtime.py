import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshbal.airtime import (
    AirtimeParams,
    StationLinkSample,
    downlink_load,
    harmonic_rate,
    station_airtime,
    total_cost,
    uplink_load,
)
from meshbal.errors import DegenerateError, WeightError

P = AirtimeParams()
rates = st.sampled_from([1.0, 2.0, 5.5, 11.0, 6.0, 12.0]) | st.floats(0.1, 54.0)
errors = st.floats(0.0, 0.95)


def test_defaults_match_reference_constants():
    assert (P.o_ca_us, P.o_p_us, P.b_t_bits) == (335.0, 364.0, 8224.0)


def test_station_airtime_examples():
    assert station_airtime(P, StationLinkSample(1.0, 0.0)) == 8923.0
    assert station_airtime(P, StationLinkSample(1.0, 0.5)) == 17846.0
    with pytest.raises(DegenerateError):
        station_airtime(P, StationLinkSample(1.0, 1.0))


def test_uplink_load_examples():
    assert uplink_load(P, 0.0, 0.0, 0) == 0.0
    assert uplink_load(P, 1.0, 0.0, 1) == 8923.0
    assert uplink_load(P, 1.0, 0.0, 3) == 26769.0
    with pytest.raises(DegenerateError):
        uplink_load(P, 1.0, 1.0, 2)


def test_downlink_load_examples():
    one = StationLinkSample(1.0, 0.0)
    assert downlink_load(P, []) == 0.0
    assert downlink_load(P, [one]) == 8923.0
    s = StationLinkSample(5.5, 0.13)
    assert downlink_load(P, [s, s]) == 2 * downlink_load(P, [s])
    with pytest.raises(DegenerateError):
        downlink_load(P, [one, StationLinkSample(2.0, 1.0)])


def test_total_cost_examples():
    assert total_cost(4.0, 6.0, 20.0, 0.5, 0.5) == 15.0
    assert total_cost(4.0, 6.0, 20.0, 1.0, 0.0) == 10.0
    with pytest.raises(WeightError):
        total_cost(4.0, 6.0, 20.0, 0.6, 0.5)


def test_harmonic_rate_is_reciprocal_mean():
    assert harmonic_rate([]) == 0.0
    assert harmonic_rate([1.0, 11.0]) == pytest.approx(2 / (1 + 1 / 11))


@given(rates, errors)
def test_error_factor_scales_cost(r, e):
    base = station_airtime(P, StationLinkSample(r, 0.0))
    assert station_airtime(P, StationLinkSample(r, e)) == pytest.approx(base / (1 - e), rel=1e-12)


@given(st.lists(st.tuples(rates, errors), min_size=1, max_size=8))
def test_downlink_equals_sum_of_station_costs(samples):
    ss = [StationLinkSample(r, e) for r, e in samples]
    assert downlink_load(P, ss) == pytest.approx(sum(station_airtime(P, s) for s in ss),
                                                 rel=1e-12)


@given(st.lists(rates, min_size=1, max_size=8), errors)
def test_uplink_with_harmonic_rate_equals_per_station_sum(rs, e):
    # With a shared error rate the harmonic aggregate reproduces the exact sum.
    expected = sum(station_airtime(P, StationLinkSample(r, e)) for r in rs)
    got = uplink_load(P, harmonic_rate(rs), e, len(rs))
    assert math.isclose(got, expected, rel_tol=1e-12)


def test_rejects_bad_params():
    with pytest.raises(ValueError):
        AirtimeParams(o_ca_us=0.0)
    with pytest.raises(ValueError):
        station_airtime(P, StationLinkSample(0.0, 0.0))
    with pytest.raises(ValueError):
        uplink_load(P, 1.0, 0.0, -1)


def test_random_weights_summing_to_one_accepted():
    rng = random.Random(5)
    for _ in range(200):
        w1 = rng.random()
        total_cost(1.0, 2.0, 3.0, w1, 1.0 - w1)

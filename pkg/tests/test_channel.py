import pytest
from hypothesis import given
from hypothesis import strategies as st

from meshbal.channel import (
    MAX_ERROR_PROB,
    ChannelParams,
    contention_domains,
    link_quality,
    quality_at,
)
from meshbal.errors import OutOfRange

C = ChannelParams()


def test_zero_distance_is_best_link():
    q = link_quality((0.0, 0.0), (0.0, 0.0), 1)
    assert q.rate_mbps == 11.0
    assert q.error_prob == 0.0
    assert q.rssi_dbm == C.ref_rssi_dbm
    assert q.rssi_dbm >= link_quality((0.0, 0.0), (30.0, 0.0), 1).rssi_dbm


def test_beyond_range_is_out_of_range():
    with pytest.raises(OutOfRange):
        link_quality((0.0, 0.0), (150.0, 0.0), 1)
    with pytest.raises(OutOfRange):
        quality_at(300.0, C, backbone=True)


def test_half_range_error_is_quarter_base():
    q = quality_at(C.access_range_m / 2, C)
    assert q.error_prob == pytest.approx(C.base_e / 4, rel=1e-12)


def test_rate_steps():
    assert [quality_at(d, C).rate_mbps for d in (10, 49.9, 50, 79, 100, 140)] == \
        [11.0, 11.0, 5.5, 5.5, 2.0, 1.0]
    assert quality_at(100, C, backbone=True).rate_mbps == 12.0
    assert quality_at(100, C, backbone=True, nominal_rate=6.0).rate_mbps == 6.0
    assert quality_at(200, C, backbone=True).rate_mbps == 6.0


@given(st.floats(0.0, 149.999), st.booleans())
def test_quality_invariants(d, backbone):
    q = quality_at(d, C, backbone=backbone)
    allowed = {12.0, 6.0} if backbone else {1.0, 2.0, 5.5, 11.0}
    assert q.rate_mbps in allowed
    assert 0.0 <= q.error_prob <= MAX_ERROR_PROB < 1.0


@given(st.floats(0.0, 148.0), st.floats(0.0, 1.9))
def test_monotone_in_distance(d, step):
    near, far = quality_at(d, C), quality_at(d + step, C)
    assert far.rate_mbps <= near.rate_mbps
    assert far.error_prob >= near.error_prob
    assert far.rssi_dbm <= near.rssi_dbm


def test_channel_index_validated():
    with pytest.raises(ValueError):
        link_quality((0, 0), (1, 0), 14)


def test_cross_channel_isolation():
    doms = contention_domains({"a": (0, 0), "b": (0, 0)}, {"a": 1, "b": 6}, 250.0)
    assert [sorted(d.members) for d in doms] == [["a"], ["b"]]


def test_transitive_closure_chain():
    r = 250.0
    nodes = {"a": (0, 0), "b": (0.9 * r, 0), "c": (1.8 * r, 0)}
    doms = contention_domains(nodes, {k: 1 for k in nodes}, r)
    assert len(doms) == 1 and doms[0].members == frozenset(nodes)


def test_empty_and_far_apart():
    assert contention_domains({}, {}, 250.0) == []
    doms = contention_domains({"a": (0, 0), "b": (500, 0)}, {"a": 3, "b": 3}, 250.0)
    assert len(doms) == 2 and all(d.channel == 3 for d in doms)

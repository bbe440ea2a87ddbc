import pytest

from meshbal.balancer import (
    BalancerState,
    NeighborhoodCosts,
    adapt_weights,
    balancing_index,
    beacon_annotation,
    laba_exchange,
)
from meshbal.errors import EmptyNeighborhood


def test_index_examples():
    assert balancing_index([7.0, 7.0]) == 1.0
    assert balancing_index([7.0, 0.0]) == 0.5
    assert balancing_index([1, 2, 3]) == pytest.approx(6 / 7, rel=1e-15)
    assert balancing_index(NeighborhoodCosts({"a": 3.0})) == 1.0
    assert balancing_index([0.0, 0.0, 0.0]) == 1.0
    with pytest.raises(EmptyNeighborhood):
        balancing_index([])
    with pytest.raises(ValueError):
        balancing_index([1.0, -1.0])


def test_laba_exchange():
    out = laba_exchange({"a": 1.0, "b": 2.0}, {"a": {"b"}, "b": {"a"}})
    assert out["a"].ap_costs == out["b"].ap_costs == {"a": 1.0, "b": 2.0}
    iso = laba_exchange({"a": 5.0}, {"a": set()})
    assert balancing_index(iso["a"]) == 1.0
    ids = "abcd"
    clique = laba_exchange({k: float(i) for i, k in enumerate(ids)},
                           {k: set(ids) - {k} for k in ids})
    assert len({tuple(v.ap_costs.items()) for v in clique.values()}) == 1
    with pytest.raises(ValueError):
        laba_exchange({"a": 1, "b": 1}, {"a": {"b"}, "b": set()})


def test_adapt_weights_examples():
    s = BalancerState(w1=0.5, w2=0.5, step_delta=0.1)
    up = adapt_weights(s, 0.4)
    assert (up.w1, up.w2) == (pytest.approx(0.6), pytest.approx(0.4))
    capped = BalancerState(w1=0.9, w2=0.1, w1_max=0.9)
    assert adapt_weights(capped, 0.1).w1 == 0.9
    assert beacon_annotation(up) == 0.4


def test_decay_after_patience():
    s = BalancerState(w1=0.7, w2=0.3, relax_patience=3)
    for _ in range(2):
        s = adapt_weights(s, 0.95)
        assert s.w1 == 0.7
    s = adapt_weights(s, 0.95)
    assert s.w1 == pytest.approx(0.65) and s.relax_count == 0


def test_heard_b_range_checked():
    with pytest.raises(ValueError):
        adapt_weights(BalancerState(), 0.0)

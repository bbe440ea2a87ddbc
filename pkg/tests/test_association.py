import random

import pytest

from meshbal.association import (
    CandidateAp,
    decide_airtime,
    decide_crosslayer,
    decide_rssi,
    should_reassociate,
)
from meshbal.errors import MissingCost, MissingRouteCost, NoCandidates, WeightError


def cand(ap_id, rssi=-50.0, up=None, down=None, rc=None):
    return CandidateAp(ap_id, 1, rssi, up, down, rc)


def test_rssi_examples():
    assert decide_rssi([cand("a", -60), cand("b", -40)]).chosen_ap == "b"
    assert decide_rssi([cand("b", -40), cand("a", -40)]).chosen_ap == "a"
    with pytest.raises(NoCandidates):
        decide_rssi([])


def test_airtime_examples():
    d = decide_airtime([cand("a", up=10, down=10), cand("b", up=5, down=30)])
    assert d.chosen_ap == "a" and d.score == 20
    assert decide_airtime([cand("z", up=1, down=1)]).chosen_ap == "z"
    with pytest.raises(MissingCost):
        decide_airtime([cand("a", up=1)])


def test_crosslayer_examples():
    cs = [cand("a", up=5, down=5, rc=100), cand("b", up=20, down=20, rc=10)]
    d = decide_crosslayer(cs, 0.5, 0.5)
    assert d.chosen_ap == "b" and d.score == 25
    assert decide_crosslayer(cs, 1.0, 0.0).chosen_ap == decide_airtime(cs).chosen_ap
    scaled = [cand(c.ap_id, up=3 * c.uplink_cost_us, down=3 * c.downlink_cost_us,
                   rc=3 * c.route_cost_us) for c in cs]
    assert decide_crosslayer(scaled, 0.5, 0.5).chosen_ap == "b"
    with pytest.raises(MissingRouteCost):
        decide_crosslayer([cand("a", up=1, down=1)], 0.5, 0.5)
    with pytest.raises(WeightError):
        decide_crosslayer(cs, 0.6, 0.5)


def test_hysteresis_rule():
    assert should_reassociate(100, 85, 0.1)
    assert not should_reassociate(100, 95, 0.1)
    assert not should_reassociate(100, 90, 0.1)
    assert should_reassociate(100, 99.999, 0.0)
    assert not should_reassociate(100, 100, 0.0)


def test_deciders_match_brute_force():
    rng = random.Random(7)
    for _ in range(2000):
        n = rng.randint(1, 10)
        pool = [-40.0, -55.5, -70.0, 3.0, 10.0]  # small pool forces ties
        cs = [cand(f"ap{rng.randrange(100):02d}{i}", rng.choice(pool), rng.choice(pool[3:]),
                   rng.choice(pool[3:]), rng.choice(pool[3:])) for i in range(n)]
        best = max(c.rssi_dbm for c in cs)
        assert decide_rssi(cs).chosen_ap == min(c.ap_id for c in cs if c.rssi_dbm == best)

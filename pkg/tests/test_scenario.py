from dataclasses import replace
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshbal.builtin import builtin_scenario
from meshbal.errors import ScenarioSyntaxError, UnknownScenario, ValidationError
from meshbal.scenario import (
    AssocPolicy,
    NodeKind,
    PolicySpec,
    dump_defaults,
    parse_scenario,
    policy_from_label,
    serialize_scenario,
)

MINIMAL = """
[node]
id = ap1
kind = MeshAp
position = 0, 0
channel = 1

[node]
id = sta1
kind = Station
position = 10, 0
"""


def test_minimal_file_gets_defaults():
    s = parse_scenario(MINIMAL)
    assert len(s.nodes) == 2
    assert s.duration_us == 10_000_000 and s.beacon_interval_us == 100_000
    assert s.laba_interval_us == 1_000_000 and s.policy == PolicySpec()


def test_weights_must_sum_to_one():
    with pytest.raises(ValidationError, match="weights must sum to 1") as exc:
        parse_scenario(MINIMAL + "\n[policy]\nw1_init = 0.7\nw2_init = 0.2\n")
    assert exc.value.field == "policy.w1_init"


@pytest.mark.parametrize("text, line", [
    ("[general]\nduration_us 5\n", 2),
    ("[general]\nbogus = 1\n", 2),
    ("[nope]\n", 1),
    ("[general]\nduration_us = abc\n", 2),
    ("[general]\n[general]\n", 2),
])
def test_syntax_errors_carry_line(text, line):
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario(text)
    assert exc.value.line == line


@pytest.mark.parametrize("extra, field", [
    ("[node]\nid = ap1\nkind = Station\n", "node.id"),
    ("[node]\nid = ap2\nkind = MeshAp\nchannel = 13\n", "node.channel"),
    ("[node]\nid = sta2\nkind = Station\nchannel = 3\n", "node.channel"),
    ("[node]\nid = sta2\nkind = Station\non_at = 5\noff_at = 5\n", "node.on_at"),
    ("[link]\na = ap1\nb = sta1\n", "link"),
    ("[traffic]\nkind = Cbr\nsource = sta1\ndestination = sink\n", "traffic.rate_kbps"),
    ("[traffic]\nkind = FtpLike\nsource = sta1\ndestination = sink\n", "traffic.file_size_kb"),
    ("[general]\nduration_us = 0\n", "general.duration_us"),
])
def test_validation_names_field(extra, field):
    with pytest.raises(ValidationError) as exc:
        parse_scenario(MINIMAL + extra)
    assert exc.value.field == field


def test_disconnected_backbone_rejected():
    text = MINIMAL + "[node]\nid = ap2\nkind = MeshAp\nchannel = 6\nposition = 50, 0\n"
    with pytest.raises(ValidationError, match="not connected"):
        parse_scenario(text)


def test_threshold_checked_against_neighborhood_size():
    text = MINIMAL + "[policy]\nassociation = CrossLayer\nload_balancing = true\n" \
        "balance_threshold_T = 1.0\n"
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text)
    assert exc.value.field == "policy.balance_threshold_T"


def test_dump_defaults_parses_and_round_trips():
    s = parse_scenario(dump_defaults())
    assert parse_scenario(serialize_scenario(s)) == s


def test_bundled_fourcell():
    text = resources.files("meshbal").joinpath("data", "fourcell.scn").read_text()
    s = parse_scenario(text)
    aps = [n for n in s.nodes if n.kind is NodeKind.MESH_AP]
    stas = [n for n in s.nodes if n.kind is NodeKind.STATION]
    assert len(aps) == 4 and len({a.channel for a in aps}) == 4
    assert len(stas) == 65
    on = sorted(n.on_at for n in stas)
    assert on.count(0) == 5 and len(set(on)) == 7
    assert s == builtin_scenario("fourcell", seed=s.seed)


@pytest.mark.parametrize("name", ["fourcell", "mesh_ftp", "mesh_voip"])
def test_builtins_are_pure_and_round_trip(name):
    a, b = builtin_scenario(name, seed=7), builtin_scenario(name, seed=7)
    assert a == b
    assert builtin_scenario(name, seed=8) != a
    assert parse_scenario(serialize_scenario(a)) == a


def test_mesh_ftp_backbone():
    s = builtin_scenario("mesh_ftp")
    assert {rate for _, _, rate in s.backbone_links} == {12.0}
    assert s.sink_nodes == ("gw",)
    assert all("sink" in (t.source, t.destination) for t in s.traffic)


def test_unknown_builtin():
    with pytest.raises(UnknownScenario):
        builtin_scenario("bogus")
    with pytest.raises(UnknownScenario):
        builtin_scenario("fourcell", nonsense=1)


def test_policy_labels():
    p = policy_from_label("crosslayer+lb+coop")
    assert p.association is AssocPolicy.CROSS_LAYER and p.load_balancing and p.cooperative
    assert p.label == "crosslayer+lb+coop"
    assert policy_from_label("lb").association is AssocPolicy.CROSS_LAYER
    for bad in ("", "rssi+airtime", "airtime+lb", "coop", "warp"):
        with pytest.raises(ValueError):
            policy_from_label(bad)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(0, 12),
       label=st.sampled_from(["rssi", "airtime+coop", "crosslayer+lb+coop"]),
       w1=st.sampled_from([0.1, 0.25, 0.5]), spread=st.floats(0.3, 1.0))
def test_round_trip_property(seed, n, label, w1, spread):
    s = builtin_scenario("mesh_voip", seed=seed, voip_sessions=n, spread=spread, w1_init=w1)
    s = replace(s, policy=policy_from_label(label, s.policy))
    assert parse_scenario(serialize_scenario(s)) == s

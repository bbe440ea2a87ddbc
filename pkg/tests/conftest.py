import pytest

from meshbal.scenario import (
    SINK,
    NodeKind,
    NodeSpec,
    PolicySpec,
    Scenario,
    TrafficKind,
    TrafficSpec,
    validate,
)


def ap(node_id, pos, channel):
    return NodeSpec(node_id, NodeKind.MESH_AP, pos, channel=channel)


def sta(node_id, pos, on_at=None, off_at=None):
    return NodeSpec(node_id, NodeKind.STATION, pos, on_at=on_at, off_at=off_at)


def cbr(src, dst=SINK, rate_kbps=256.0, **kw):
    return TrafficSpec(TrafficKind.CBR, src, dst, rate_kbps=rate_kbps, **kw)


def make_scenario(nodes, traffic=(), links=(), policy=None, **kw):
    kw.setdefault("duration_us", 2_000_000)
    return validate(Scenario(nodes=tuple(nodes), backbone_links=tuple(links),
                             traffic=tuple(traffic), policy=policy or PolicySpec(), **kw))


@pytest.fixture
def one_cell():
    """One AP with one nearby station sending light CBR to the AP's sink."""
    return make_scenario([ap("ap1", (0.0, 0.0), 1), sta("sta1", (10.0, 0.0))],
                         [cbr("sta1", rate_kbps=256.0)])


# Acceptance verdicts, printed once at the end of the session.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

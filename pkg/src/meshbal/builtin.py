"""Generated scenarios for the two experiment families.

``fourcell`` is four overlapping cells on distinct channels with stations
joining in stages. ``mesh_ftp`` and ``mesh_voip`` put three APs on a
12 Mb/s backbone behind one gateway that hosts the traffic sink. All
coordinates are modeling choices. Everything is a pure function of
(name, seed, keyword overrides).
"""

import math
from dataclasses import replace

from .errors import UnknownScenario
from .rng import substream
from .scenario import (
    SINK,
    NodeKind,
    NodeSpec,
    PolicySpec,
    Scenario,
    TrafficKind,
    TrafficSpec,
    validate,
)


def stratified_points(n, x_range, y_range, rng):
    """``n`` points, one per cell of a near-square grid, cells in shuffled order."""
    if n <= 0:
        return []
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    cells = [(i, j) for j in range(rows) for i in range(cols)]
    rng.shuffle(cells)
    x0, x1 = x_range
    y0, y1 = y_range
    w = (x1 - x0) / cols
    h = (y1 - y0) / rows
    out = []
    for i, j in cells[:n]:
        x = x0 + (i + rng.random()) * w
        y = y0 + (j + rng.random()) * h
        out.append((round(x, 3), round(y, 3)))
    return out


def _stations(name, seed, n, region, on_at=lambda i: 0):
    rng = substream(seed, "placement", name)
    pts = stratified_points(n, region[0], region[1], rng)
    return [NodeSpec(f"sta{i + 1:02d}", NodeKind.STATION, p, on_at=on_at(i))
            for i, p in enumerate(pts)]


AP_CHANNELS = (1, 4, 8, 11, 2, 6, 10, 3, 7, 12, 5, 9)
AP_SPACING_M = 60.0


def fourcell(seed=1, num_stations=65, rate_kbps=128.0, stage_us=200_000,
             duration_us=6_000_000, warmup_us=2_000_000, policy=None, extent=(-30.0, 36.0),
             num_aps=4):
    """Overlapping cells on distinct channels; stations crowd the first AP.

    APs sit on a two-column grid 60 m apart (four by default). Stations
    join five first, then ten per stage. Every AP is wired to the sink, so
    the experiment measures the access network only.
    """
    if not 1 <= num_aps <= len(AP_CHANNELS):
        raise ValueError(f"num_aps must lie in 1..{len(AP_CHANNELS)}")
    aps = [NodeSpec(f"ap{i + 1}", NodeKind.MESH_AP,
                    ((i % 2) * AP_SPACING_M, (i // 2) * AP_SPACING_M), channel=AP_CHANNELS[i])
           for i in range(num_aps)]

    def stage(i):
        return 0 if i < 5 else (1 + (i - 5) // 10) * stage_us

    stations = _stations("fourcell", seed, num_stations, (extent, extent), stage)
    links = []
    for i in range(num_aps):
        if i % 2 == 0 and i + 1 < num_aps:
            links.append((aps[i].id, aps[i + 1].id, 12.0))
        if i + 2 < num_aps:
            links.append((aps[i].id, aps[i + 2].id, 12.0))
    traffic = tuple(TrafficSpec(TrafficKind.CBR, s.id, SINK, rate_kbps=rate_kbps,
                                start_us=s.on_at or 0) for s in stations)
    return Scenario(
        nodes=tuple(aps + stations),
        backbone_links=tuple(links),
        traffic=traffic,
        policy=policy or PolicySpec(balance_threshold_T=0.8),
        duration_us=duration_us,
        seed=seed,
        name="fourcell",
        sink_nodes=tuple(a.id for a in aps),
        warmup_us=warmup_us,
    )


def _mesh_backbone():
    nodes = [
        NodeSpec("gw", NodeKind.MESH_ROUTER, (0.0, -60.0)),
        NodeSpec("r1", NodeKind.MESH_ROUTER, (80.0, -60.0)),
        NodeSpec("r2", NodeKind.MESH_ROUTER, (-80.0, -60.0)),
        NodeSpec("ap1", NodeKind.MESH_AP, (0.0, 0.0), channel=1),
        NodeSpec("ap2", NodeKind.MESH_AP, (80.0, 0.0), channel=6),
        NodeSpec("ap3", NodeKind.MESH_AP, (-80.0, 0.0), channel=11),
    ]
    links = (("gw", "ap1", 12.0), ("gw", "r1", 12.0), ("gw", "r2", 12.0),
             ("r1", "ap2", 12.0), ("r2", "ap3", 12.0))
    return nodes, links


def _mesh_policy(w1_init):
    return PolicySpec(w1_init=w1_init, w2_init=1.0 - w1_init, balance_threshold_T=0.8)


def mesh_ftp(seed=1, num_stations=15, file_size_kb=500.0, rate_kbps=1024.0, spread=1.0,
             duration_us=8_000_000, warmup_us=2_000_000, policy=None, w1_init=0.5):
    """Backbone with a gateway sink; stations alternate uploads and downloads."""
    nodes, links = _mesh_backbone()
    region = ((-60.0 * spread, 60.0 * spread), (-40.0 * spread, 40.0 * spread))
    stations = _stations("mesh_ftp", seed, num_stations, region,
                         lambda i: (i * 1_000_000) // max(num_stations, 1))
    traffic = []
    for i, s in enumerate(stations):
        src, dst = (s.id, SINK) if i % 2 == 0 else (SINK, s.id)
        traffic.append(TrafficSpec(TrafficKind.FTP_LIKE, src, dst, rate_kbps=rate_kbps,
                                   file_size_kb=file_size_kb, start_us=s.on_at + 1_000_000))
    return Scenario(
        nodes=tuple(nodes + stations),
        backbone_links=links,
        traffic=tuple(traffic),
        policy=policy or _mesh_policy(w1_init),
        duration_us=duration_us,
        seed=seed,
        name="mesh_ftp",
        sink_nodes=("gw",),
        warmup_us=warmup_us,
    )


def mesh_voip(seed=1, voip_sessions=12, spread=1.0, duration_us=8_000_000,
              warmup_us=2_500_000, policy=None, w1_init=0.5):
    """One VoIP session per station, each talking to the gateway sink.

    ``spread`` below 1 squeezes stations around the central AP, which is
    the skewed placement used to exercise the balancer. A low ``w1_init``
    starts stations favoring the short route through that AP.
    """
    nodes, links = _mesh_backbone()
    region = ((-60.0 * spread, 60.0 * spread), (-40.0 * spread, 40.0 * spread))
    stations = _stations("mesh_voip", seed, voip_sessions, region,
                         lambda i: (i * 1_000_000) // max(voip_sessions, 1))
    traffic = tuple(TrafficSpec(TrafficKind.VOIP_LIKE, s.id, SINK, start_us=s.on_at + 1_000_000)
                    for s in stations)
    return Scenario(
        nodes=tuple(nodes + stations),
        backbone_links=links,
        traffic=traffic,
        policy=policy or _mesh_policy(w1_init),
        duration_us=duration_us,
        seed=seed,
        name="mesh_voip",
        sink_nodes=("gw",),
        warmup_us=warmup_us,
    )


BUILTINS = {"fourcell": fourcell, "mesh_ftp": mesh_ftp, "mesh_voip": mesh_voip}

# Sweep variable -> keyword understood by the builtin generators.
SWEEP_KEYWORDS = {
    "num_stations": "num_stations",
    "file_size_kb": "file_size_kb",
    "voip_sessions": "voip_sessions",
    "num_aps": "num_aps",
}


def builtin_scenario(name, seed=1, **overrides):
    """Generate builtin ``name``; keyword overrides go to the generator."""
    try:
        make = BUILTINS[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown builtin {name!r}; choose from {', '.join(sorted(BUILTINS))}") from None
    try:
        scenario = make(seed=seed, **overrides)
    except (TypeError, ValueError) as exc:
        raise UnknownScenario(f"builtin {name!r} does not accept these settings: {exc}") from None
    return validate(scenario)


def with_policy(scenario, policy):
    return validate(replace(scenario, policy=policy))

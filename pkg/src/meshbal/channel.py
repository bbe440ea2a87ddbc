"""Synthetic propagation model: distance -> rate, frame error rate and RSSI.

The model is deliberately simple. Rates step down at fixed distance
thresholds, the frame error rate grows quadratically with distance up to
``base_e`` at the edge of coverage, and RSSI follows a log-distance path
loss. Backbone links use their own rate table and are capped at the
link's nominal rate.
"""

import math
from dataclasses import dataclass, field

from .errors import OutOfRange

MAX_ERROR_PROB = 0.9


@dataclass(frozen=True)
class ChannelParams:
    # (rate Mb/s, range m), fastest first; a rate applies while distance < range.
    access_rates: tuple = ((11.0, 50.0), (5.5, 80.0), (2.0, 110.0), (1.0, 150.0))
    backbone_rates: tuple = ((12.0, 150.0), (6.0, 250.0))
    base_e: float = 0.1
    cs_range_m: float = 250.0
    path_loss_exponent: float = 3.0
    ref_rssi_dbm: float = -40.0

    @property
    def access_range_m(self):
        return self.access_rates[-1][1]

    @property
    def backbone_range_m(self):
        return self.backbone_rates[-1][1]


@dataclass(frozen=True)
class LinkQuality:
    rate_mbps: float
    error_prob: float
    rssi_dbm: float


def distance(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def rssi_at(d, params):
    if d <= 1.0:
        return params.ref_rssi_dbm
    return params.ref_rssi_dbm - 10.0 * params.path_loss_exponent * math.log10(d)


def quality_at(d, params=ChannelParams(), backbone=False, nominal_rate=None):
    table = params.backbone_rates if backbone else params.access_rates
    d_max = table[-1][1]
    rate = None
    for r, reach in table:
        if d < reach:
            rate = r
            break
    if rate is None:
        raise OutOfRange(f"distance {d:.1f} m beyond {d_max:.1f} m")
    if nominal_rate is not None:
        rate = min(rate, nominal_rate)
    err = min(max(params.base_e * (d / d_max) ** 2, 0.0), MAX_ERROR_PROB)
    return LinkQuality(rate, err, rssi_at(d, params))


def link_quality(tx_position, rx_position, channel, params=ChannelParams(), backbone=False,
                 nominal_rate=None):
    """Quality of the link between two positions on ``channel``.

    The channel index does not change the result (all channels share one
    propagation model); it is validated so callers cannot pass garbage.
    """
    if channel is not None and not 0 <= channel <= 12:
        raise ValueError(f"invalid channel {channel}")
    for p in (tx_position, rx_position):
        if not all(math.isfinite(c) for c in p):
            raise ValueError("positions must be finite")
    return quality_at(distance(tx_position, rx_position), params, backbone, nominal_rate)


@dataclass(frozen=True)
class ContentionDomain:
    channel: int
    members: frozenset = field(default_factory=frozenset)


def contention_domains(nodes, channel_assignment, cs_range_m):
    """Group co-channel radios into carrier-sense domains.

    ``nodes`` maps node id -> position, ``channel_assignment`` maps node id
    -> channel. Two radios on one channel share a domain when a chain of
    radios, each within ``cs_range_m`` of the next, connects them.
    Isolated radios form singleton domains. Output is sorted by channel,
    then by smallest member id.
    """
    if not cs_range_m > 0:
        raise ValueError("cs_range_m must be positive")
    by_channel = {}
    for node_id in sorted(nodes):
        ch = channel_assignment.get(node_id)
        if ch is None:
            continue
        by_channel.setdefault(ch, []).append(node_id)

    domains = []
    for ch in sorted(by_channel):
        ids = by_channel[ch]
        parent = {i: i for i in ids}

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if distance(nodes[a], nodes[b]) <= cs_range_m:
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        groups = {}
        for i in ids:
            groups.setdefault(find(i), set()).add(i)
        for root in sorted(groups, key=lambda r: min(groups[r])):
            domains.append(ContentionDomain(ch, frozenset(groups[root])))
    return domains

"""Cooperative association tables shared between stations.

Each station keeps one record per AP (channel, load, measurement time).
Stations exchange these tables either by periodic broadcast or on request
from a newcomer; a fresh, non-overloaded record lets a station hand off
without scanning every channel.
"""

import statistics
import struct
from dataclasses import dataclass, field

_RECORD = struct.Struct("<QBQQ")


@dataclass(frozen=True)
class AssocTableEntry:
    ap_mac: int
    channel: int
    load_us: int
    timestamp_us: int

    def __post_init__(self):
        if self.load_us < 0:
            raise ValueError("load_us must be non-negative")
        if not 0 <= self.channel <= 255:
            raise ValueError(f"invalid channel {self.channel}")


@dataclass
class AssocTable:
    owner: str = ""
    entries: dict = field(default_factory=dict)  # ap_mac -> AssocTableEntry

    def copy(self):
        return AssocTable(self.owner, dict(self.entries))

    def merge(self, received):
        """In-place newest-wins merge; equal timestamps keep what is stored."""
        entries = self.entries
        for e in received:
            old = entries.get(e.ap_mac)
            if old is None or e.timestamp_us > old.timestamp_us:
                entries[e.ap_mac] = e
        return self

    def __len__(self):
        return len(self.entries)


def merge_received(table, received, now_us=None):
    """Return a copy of ``table`` updated with ``received`` records.

    ``now_us`` is accepted for symmetry with the receive flow; records keep
    their own measurement timestamps.
    """
    return table.copy().merge(received)


def default_load_threshold(table):
    loads = [e.load_us for e in table.entries.values()]
    if not loads:
        return 0
    return 2 * statistics.median(loads)


def eligible_aps(table, now_us, staleness_us, load_threshold_us=None):
    """APs whose record is fresh and not overloaded, least loaded first."""
    if load_threshold_us is None:
        load_threshold_us = default_load_threshold(table)
    keep = [
        e for e in table.entries.values()
        if now_us - e.timestamp_us <= staleness_us and e.load_us <= load_threshold_us
    ]
    keep.sort(key=lambda e: (e.load_us, e.ap_mac))
    return [(e.ap_mac, e.channel) for e in keep]


def broadcast_payload(table):
    return [table.entries[mac] for mac in sorted(table.entries)]


def encode_payload(entries):
    """Little-endian wire form: (u64 mac, u8 channel, u64 load, u64 timestamp)*."""
    return b"".join(
        _RECORD.pack(e.ap_mac, e.channel, e.load_us, e.timestamp_us)
        for e in sorted(entries, key=lambda e: e.ap_mac)
    )


def decode_payload(data):
    if len(data) % _RECORD.size:
        raise ValueError(f"payload length {len(data)} is not a multiple of {_RECORD.size}")
    return [AssocTableEntry(*fields) for fields in _RECORD.iter_unpack(data)]


def probe_request_response(neighbor_tables):
    """Union of neighbor payloads, newest record per AP, in MAC order."""
    merged = AssocTable()
    for t in neighbor_tables:
        merged.merge(broadcast_payload(t))
    return broadcast_payload(merged)


@dataclass(frozen=True)
class HandoffDelayModel:
    per_channel_dwell_us: float = 50_000.0
    n_channels: int = 12
    auth_delay_us: float = 5_000.0
    reassoc_delay_us: float = 5_000.0

    def __post_init__(self):
        for name in ("per_channel_dwell_us", "n_channels", "auth_delay_us", "reassoc_delay_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def scan_us(self):
        return self.n_channels * self.per_channel_dwell_us


def handoff_delay(model, used_table):
    """Scan, authentication and reassociation delay; a usable table skips the scan."""
    delay = model.auth_delay_us + model.reassoc_delay_us
    if not used_table:
        delay += model.scan_us
    return delay

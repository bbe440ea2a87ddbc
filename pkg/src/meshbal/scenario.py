"""Declarative experiment description and its text file format.

A scenario file is UTF-8 text made of ``[section]`` blocks holding
``key = value`` lines; ``#`` starts a comment. ``[node]``, ``[link]`` and
``[traffic]`` repeat once per item, every other section appears at most
once. Omitted keys take the defaults of the dataclasses below, which is
also what ``dump_defaults`` prints.
"""

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .airtime import WEIGHT_TOLERANCE, AirtimeParams
from .channel import ChannelParams, distance
from .coop import HandoffDelayModel
from .errors import DisconnectedError, ScenarioSyntaxError, ValidationError
from .mac import MacParams

SINK = "sink"


class NodeKind(enum.Enum):
    MESH_ROUTER = "MeshRouter"
    MESH_AP = "MeshAp"
    STATION = "Station"


class TrafficKind(enum.Enum):
    CBR = "Cbr"
    FTP_LIKE = "FtpLike"
    VOIP_LIKE = "VoipLike"


class AssocPolicy(enum.Enum):
    RSSI = "Rssi"
    AIRTIME = "Airtime"
    CROSS_LAYER = "CrossLayer"


DEFAULT_PAYLOAD_BITS = {
    TrafficKind.CBR: 8192,
    TrafficKind.FTP_LIKE: 8192,
    TrafficKind.VOIP_LIKE: 1280,  # 160-byte frame every 20 ms
}


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind
    position: tuple = (0.0, 0.0)
    channel: Optional[int] = None
    on_at: Optional[int] = None
    off_at: Optional[int] = None

    @property
    def is_backbone(self):
        return self.kind is not NodeKind.STATION


@dataclass(frozen=True)
class TrafficSpec:
    kind: TrafficKind
    source: str
    destination: str
    rate_kbps: Optional[float] = None
    file_size_kb: Optional[float] = None
    start_us: int = 0
    stop_us: Optional[int] = None
    frame_payload_bits: Optional[int] = None

    def __post_init__(self):
        if self.frame_payload_bits is None:
            object.__setattr__(self, "frame_payload_bits", DEFAULT_PAYLOAD_BITS[self.kind])

    @property
    def payload_bits(self):
        return self.frame_payload_bits


@dataclass(frozen=True)
class PolicySpec:
    association: AssocPolicy = AssocPolicy.RSSI
    cooperative: bool = False
    load_balancing: bool = False
    w1_init: float = 0.5
    w2_init: float = 0.5
    balance_threshold_T: float = 0.8
    coop_staleness_us: int = 2_000_000
    coop_load_threshold_us: Optional[float] = None
    hysteresis: float = 0.1
    reassoc_period_us: Optional[int] = None      # default: 10 beacon intervals
    coop_broadcast_period_us: Optional[int] = None  # default: 5 beacon intervals
    coop_range_m: Optional[float] = None         # default: carrier-sense range
    coop_latency_us: int = 2_000
    w1_max: float = 0.9
    step_delta: float = 0.05
    relax_patience: int = 5
    uplink_window_us: int = 1_000_000
    laba_range_m: Optional[float] = None         # default: carrier-sense range

    @property
    def label(self):
        parts = [self.association.value.lower()]
        if self.load_balancing:
            parts.append("lb")
        if self.cooperative:
            parts.append("coop")
        return "+".join(parts)


POLICY_NAMES = {
    "rssi": AssocPolicy.RSSI,
    "airtime": AssocPolicy.AIRTIME,
    "crosslayer": AssocPolicy.CROSS_LAYER,
}


def policy_from_label(label, base=None):
    """``rssi``, ``airtime+coop``, ``crosslayer+lb+coop``, ``lb+coop`` ...

    ``lb`` alone implies cross-layer association, since the weights it
    adapts only exist there.
    """
    tokens = [t.strip().lower() for t in label.split("+") if t.strip()]
    if not tokens:
        raise ValueError("empty policy label")
    assoc = None
    coop = lb = False
    for t in tokens:
        if t in POLICY_NAMES:
            if assoc is not None:
                raise ValueError(f"policy label {label!r} names two association policies")
            assoc = POLICY_NAMES[t]
        elif t == "coop":
            coop = True
        elif t == "lb":
            lb = True
        else:
            raise ValueError(f"unknown policy token {t!r} in {label!r}")
    if assoc is None:
        if not lb:
            raise ValueError(f"policy label {label!r} has no association policy")
        assoc = AssocPolicy.CROSS_LAYER
    if lb and assoc is not AssocPolicy.CROSS_LAYER:
        raise ValueError("load balancing requires cross-layer association")
    base = base or PolicySpec()
    return dataclasses.replace(base, association=assoc, cooperative=coop, load_balancing=lb)


@dataclass(frozen=True)
class Scenario:
    nodes: tuple = ()
    backbone_links: tuple = ()   # (node id, node id, nominal rate Mb/s)
    traffic: tuple = ()
    policy: PolicySpec = field(default_factory=PolicySpec)
    duration_us: int = 10_000_000
    seed: int = 1
    beacon_interval_us: int = 100_000
    laba_interval_us: int = 1_000_000
    name: str = ""
    sink_nodes: tuple = ()       # backbone nodes wired to the sink; empty = all routers
    warmup_us: int = 0
    sample_interval_us: int = 100_000
    channel: ChannelParams = field(default_factory=ChannelParams)
    airtime: AirtimeParams = field(default_factory=AirtimeParams)
    backbone_airtime: AirtimeParams = field(default_factory=AirtimeParams)
    handoff: HandoffDelayModel = field(default_factory=HandoffDelayModel)
    mac: MacParams = field(default_factory=MacParams)

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def of_kind(self, kind):
        return [n for n in self.nodes if n.kind is kind]

    @property
    def aps(self):
        return self.of_kind(NodeKind.MESH_AP)

    @property
    def stations(self):
        return self.of_kind(NodeKind.STATION)

    @property
    def resolved_sink_nodes(self):
        if self.sink_nodes:
            return tuple(self.sink_nodes)
        routers = self.of_kind(NodeKind.MESH_ROUTER)
        return tuple(n.id for n in (routers or self.aps))

    @property
    def reassoc_period_us(self):
        return self.policy.reassoc_period_us or 10 * self.beacon_interval_us

    @property
    def coop_broadcast_period_us(self):
        return self.policy.coop_broadcast_period_us or 5 * self.beacon_interval_us

    @property
    def coop_range_m(self):
        return self.policy.coop_range_m or self.channel.cs_range_m

    @property
    def laba_range_m(self):
        return self.policy.laba_range_m or self.channel.cs_range_m


def ap_neighbor_map(scenario):
    """APs within ``laba_range_m`` of each other exchange load reports."""
    aps = scenario.aps
    reach = scenario.laba_range_m
    out = {a.id: set() for a in aps}
    for i, a in enumerate(aps):
        for b in aps[i + 1:]:
            if distance(a.position, b.position) <= reach:
                out[a.id].add(b.id)
                out[b.id].add(a.id)
    return out


# --------------------------------------------------------------------------
# validation

def validate(s):
    """Raise ``ValidationError`` naming the first violated field."""
    ids = [n.id for n in s.nodes]
    seen = set()
    for i in ids:
        if not i or i == SINK or any(c.isspace() for c in i) or "," in i:
            raise ValidationError("node.id", f"invalid node id {i!r}")
        if i in seen:
            raise ValidationError("node.id", f"duplicate node id {i!r}")
        seen.add(i)
    by_id = {n.id: n for n in s.nodes}

    for n in s.nodes:
        if len(n.position) != 2 or not all(math.isfinite(c) for c in n.position):
            raise ValidationError("node.position", f"{n.id}: position must be two finite numbers")
        if n.kind is NodeKind.MESH_AP:
            if n.channel is None:
                raise ValidationError("node.channel", f"{n.id}: MeshAp requires a channel")
            if not 1 <= n.channel <= 12:
                raise ValidationError("node.channel", f"{n.id}: channel {n.channel} not in 1..=12")
        elif n.channel is not None:
            raise ValidationError("node.channel", f"{n.id}: only MeshAp nodes carry a channel")
        for name in ("on_at", "off_at"):
            v = getattr(n, name)
            if v is not None and n.is_backbone:
                raise ValidationError(f"node.{name}", f"{n.id}: only stations churn")
            if v is not None and v < 0:
                raise ValidationError(f"node.{name}", f"{n.id}: must be non-negative")
        if n.on_at is not None and n.off_at is not None and not n.on_at < n.off_at:
            raise ValidationError("node.on_at", f"{n.id}: on_at must precede off_at")

    backbone = [n.id for n in s.nodes if n.is_backbone]
    for a, b, rate in s.backbone_links:
        for end in (a, b):
            if end not in by_id:
                raise ValidationError("link", f"unknown node {end!r}")
            if not by_id[end].is_backbone:
                raise ValidationError("link", f"{end!r} is a station; links join backbone nodes")
        if a == b:
            raise ValidationError("link", f"self-link on {a!r}")
        if not rate > 0:
            raise ValidationError("link.rate_mbps", f"{a}-{b}: rate must be positive")
    if backbone:
        adj = {v: set() for v in backbone}
        for a, b, _ in s.backbone_links:
            adj[a].add(b)
            adj[b].add(a)
        seen = {backbone[0]}
        stack = [backbone[0]]
        while stack:
            for v in adj[stack.pop()]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(backbone):
            missing = sorted(set(backbone) - seen)
            raise ValidationError("link", str(DisconnectedError(
                f"backbone not connected; unreachable: {', '.join(missing)}")))

    for end in s.sink_nodes:
        if end not in by_id or not by_id[end].is_backbone:
            raise ValidationError("general.sink_nodes", f"{end!r} is not a backbone node")

    for t in s.traffic:
        for end in (t.source, t.destination):
            if end != SINK and end not in by_id:
                raise ValidationError("traffic", f"unknown endpoint {end!r}")
        if t.source == t.destination:
            raise ValidationError("traffic", "source and destination coincide")
        if SINK in (t.source, t.destination) and not s.resolved_sink_nodes:
            raise ValidationError("traffic", "sink used but no backbone node hosts it")
        if t.kind is TrafficKind.CBR and not (t.rate_kbps is not None and t.rate_kbps > 0):
            raise ValidationError("traffic.rate_kbps", "Cbr needs rate_kbps > 0")
        if t.kind is TrafficKind.FTP_LIKE:
            if not (t.file_size_kb is not None and t.file_size_kb > 0):
                raise ValidationError("traffic.file_size_kb", "FtpLike needs file_size_kb > 0")
            if t.rate_kbps is not None and not t.rate_kbps > 0:
                raise ValidationError("traffic.rate_kbps", "FtpLike pacing rate must be > 0")
        if t.payload_bits <= 0:
            raise ValidationError("traffic.frame_payload_bits", "must be positive")
        if t.start_us < 0 or (t.stop_us is not None and t.stop_us <= t.start_us):
            raise ValidationError("traffic.start_us", "need 0 <= start_us < stop_us")

    p = s.policy
    if not (0.0 <= p.w1_init <= 1.0 and 0.0 <= p.w2_init <= 1.0):
        raise ValidationError("policy.w1_init", "weights must lie in [0, 1]")
    if abs(p.w1_init + p.w2_init - 1.0) > WEIGHT_TOLERANCE:
        raise ValidationError("policy.w1_init", "weights must sum to 1")
    if not p.w1_init <= p.w1_max <= 1.0:
        raise ValidationError("policy.w1_max", "need w1_init <= w1_max <= 1")
    if not 0.0 <= p.hysteresis < 1.0:
        raise ValidationError("policy.hysteresis", "must lie in [0, 1)")
    if p.step_delta <= 0 or p.relax_patience < 1:
        raise ValidationError("policy.step_delta", "step_delta > 0 and relax_patience >= 1")
    if p.load_balancing:
        if p.association is not AssocPolicy.CROSS_LAYER:
            raise ValidationError("policy.load_balancing", "requires CrossLayer association")
        n = max((len(v) + 1 for v in ap_neighbor_map(s).values()), default=1)
        if not 1.0 / n < p.balance_threshold_T < 1.0:
            raise ValidationError("policy.balance_threshold_T",
                                  f"must lie in (1/{n}, 1) for a {n}-AP neighborhood")
    if p.coop_staleness_us <= 0:
        raise ValidationError("policy.coop_staleness_us", "must be positive")
    if p.coop_load_threshold_us is not None and p.coop_load_threshold_us <= 0:
        raise ValidationError("policy.coop_load_threshold_us", "must be positive")

    for name in ("duration_us", "beacon_interval_us", "laba_interval_us", "sample_interval_us"):
        if not getattr(s, name) > 0:
            raise ValidationError(f"general.{name}", "must be positive")
    if not 0 <= s.warmup_us < s.duration_us:
        raise ValidationError("general.warmup_us", "need 0 <= warmup_us < duration_us")
    if not 0 <= s.seed < 2 ** 64:
        raise ValidationError("general.seed", "must be a 64-bit unsigned integer")
    return s


# --------------------------------------------------------------------------
# text format

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text):
    return int(text.replace("_", ""))


def _parse_float(text):
    return float(text.replace("_", ""))


def _parse_position(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("position needs two comma-separated numbers")
    return (float(parts[0]), float(parts[1]))


def _parse_pairs(text):
    out = []
    for chunk in text.split(","):
        a, b = chunk.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def _parse_ids(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _enum_parser(cls):
    def parse(text):
        for m in cls:
            if m.value.lower() == text.lower():
                return m
        raise ValueError(f"{text!r} is not one of {', '.join(m.value for m in cls)}")
    return parse


_SCALARS = {int: _parse_int, float: _parse_float, bool: _parse_bool, str: str}

_GENERAL_KEYS = {
    "name": str, "duration_us": _parse_int, "seed": _parse_int,
    "beacon_interval_us": _parse_int, "laba_interval_us": _parse_int,
    "sink_nodes": _parse_ids, "warmup_us": _parse_int, "sample_interval_us": _parse_int,
}
_NODE_KEYS = {
    "id": str, "kind": _enum_parser(NodeKind), "position": _parse_position,
    "channel": _parse_int, "on_at": _parse_int, "off_at": _parse_int,
}
_LINK_KEYS = {"a": str, "b": str, "rate_mbps": _parse_float}
_TRAFFIC_KEYS = {
    "kind": _enum_parser(TrafficKind), "source": str, "destination": str,
    "rate_kbps": _parse_float, "file_size_kb": _parse_float, "start_us": _parse_int,
    "stop_us": _parse_int, "frame_payload_bits": _parse_int,
}
_CHANNEL_KEYS = {
    "access_rates": _parse_pairs, "backbone_rates": _parse_pairs, "base_e": _parse_float,
    "cs_range_m": _parse_float, "path_loss_exponent": _parse_float,
    "ref_rssi_dbm": _parse_float,
}


def _dataclass_keys(cls):
    """Parsers for a flat dataclass's fields, driven by its defaults' types."""
    keys = {}
    hints = {f.name: f for f in dataclasses.fields(cls)}
    for name, f in hints.items():
        ann = str(f.type)
        if "AssocPolicy" in ann:
            keys[name] = _enum_parser(AssocPolicy)
        elif "bool" in ann:
            keys[name] = _parse_bool
        elif "float" in ann:
            keys[name] = _parse_float
        elif "int" in ann:
            keys[name] = _parse_int
        else:
            keys[name] = str
    return keys


_SINGLETONS = {
    "general": (None, _GENERAL_KEYS),
    "policy": (PolicySpec, _dataclass_keys(PolicySpec)),
    "channel": (ChannelParams, _CHANNEL_KEYS),
    "airtime": (AirtimeParams, _dataclass_keys(AirtimeParams)),
    "backbone_airtime": (AirtimeParams, _dataclass_keys(AirtimeParams)),
    "handoff": (HandoffDelayModel, _dataclass_keys(HandoffDelayModel)),
    "mac": (MacParams, _dataclass_keys(MacParams)),
}
_REPEATED = {"node": _NODE_KEYS, "link": _LINK_KEYS, "traffic": _TRAFFIC_KEYS}


def _read_sections(text):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioSyntaxError(f"unterminated section header {line!r}", lineno)
            name = line[1:-1].strip().lower()
            if name not in _SINGLETONS and name not in _REPEATED:
                raise ScenarioSyntaxError(f"unknown section [{name}]", lineno)
            if name in _SINGLETONS and any(s[0] == name for s in sections):
                raise ScenarioSyntaxError(f"section [{name}] repeated", lineno)
            current = (name, lineno, {})
            sections.append(current)
            continue
        if "=" not in line:
            raise ScenarioSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ScenarioSyntaxError("key/value outside any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        name, _, values = current
        keys = _SINGLETONS[name][1] if name in _SINGLETONS else _REPEATED[name]
        if key not in keys:
            raise ScenarioSyntaxError(f"unknown key {key!r} in [{name}]", lineno)
        if key in values:
            raise ScenarioSyntaxError(f"duplicate key {key!r} in [{name}]", lineno)
        try:
            values[key] = keys[key](value)
        except (ValueError, TypeError) as exc:
            raise ScenarioSyntaxError(f"bad value for {key!r}: {exc}", lineno) from None
    return sections


def _require_keys(name, lineno, values, required):
    for key in required:
        if key not in values:
            raise ScenarioSyntaxError(f"[{name}] missing required key {key!r}", lineno)


def parse_scenario(text):
    """Parse and validate scenario-file text."""
    general = {}
    kwargs = {}
    nodes, links, traffic = [], [], []
    for name, lineno, values in _read_sections(text):
        if name == "general":
            general = values
        elif name in _SINGLETONS:
            try:
                kwargs[name] = _SINGLETONS[name][0](**values)
            except ValueError as exc:
                raise ValidationError(name, str(exc)) from None
        elif name == "node":
            _require_keys(name, lineno, values, ("id", "kind"))
            nodes.append(NodeSpec(**values))
        elif name == "link":
            _require_keys(name, lineno, values, ("a", "b"))
            links.append((values["a"], values["b"], values.get("rate_mbps", 12.0)))
        else:
            _require_keys(name, lineno, values, ("kind", "source", "destination"))
            traffic.append(TrafficSpec(**values))
    try:
        scenario = Scenario(
            nodes=tuple(nodes), backbone_links=tuple(links), traffic=tuple(traffic),
            **general, **kwargs)
    except ValueError as exc:
        raise ValidationError("scenario", str(exc)) from None
    return validate(scenario)


def _emit_dataclass(lines, section, obj):
    lines.append(f"[{section}]")
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_fmt(v)}")
    lines.append("")


def serialize_scenario(s):
    """Inverse of ``parse_scenario`` for valid scenarios."""
    lines = ["[general]"]
    if s.name:
        lines.append(f"name = {s.name}")
    for key in ("duration_us", "seed", "beacon_interval_us", "laba_interval_us",
                "warmup_us", "sample_interval_us"):
        lines.append(f"{key} = {getattr(s, key)}")
    if s.sink_nodes:
        lines.append(f"sink_nodes = {_fmt(tuple(s.sink_nodes))}")
    lines.append("")
    _emit_dataclass(lines, "policy", s.policy)
    _emit_dataclass(lines, "channel", s.channel)
    _emit_dataclass(lines, "airtime", s.airtime)
    _emit_dataclass(lines, "backbone_airtime", s.backbone_airtime)
    _emit_dataclass(lines, "handoff", s.handoff)
    _emit_dataclass(lines, "mac", s.mac)
    for n in s.nodes:
        _emit_dataclass(lines, "node", n)
    for a, b, rate in s.backbone_links:
        lines += ["[link]", f"a = {a}", f"b = {b}", f"rate_mbps = {rate!r}", ""]
    for t in s.traffic:
        _emit_dataclass(lines, "traffic", t)
    return "\n".join(lines)


def dump_defaults():
    """A documented template showing every key with its default value."""
    s = Scenario(
        nodes=(NodeSpec("ap1", NodeKind.MESH_AP, (0.0, 0.0), channel=1),
               NodeSpec("sta1", NodeKind.STATION, (10.0, 0.0))),
        traffic=(TrafficSpec(TrafficKind.CBR, "sta1", SINK, rate_kbps=1024.0,
                             frame_payload_bits=8192),),
    )
    header = [
        "# meshbal scenario file: every key shown with its default value.",
        "# [node], [link] and [traffic] repeat once per item.",
        "# node.kind: MeshRouter | MeshAp | Station; channel only on MeshAp (1..12).",
        "# traffic.kind: Cbr (rate_kbps) | FtpLike (file_size_kb, paced at rate_kbps,",
        "#   default 1024) | VoipLike (bidirectional, 1280-bit frame every 20 ms).",
        "# traffic.source/destination: a node id or 'sink'.",
        "# policy.association: Rssi | Airtime | CrossLayer.",
        "# Unset optional keys: reassoc_period_us (10 beacons), coop_broadcast_period_us",
        "#   (5 beacons), coop_range_m and laba_range_m (cs_range_m),",
        "#   coop_load_threshold_us (2 x median known load), node on_at/off_at, stop_us.",
        "# general.sink_nodes: backbone nodes wired to the sink (default: all MeshRouters,",
        "#   or all MeshAps when there are none).",
        "",
    ]
    return "\n".join(header) + serialize_scenario(s)

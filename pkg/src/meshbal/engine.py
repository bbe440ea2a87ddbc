"""Deterministic discrete-event simulation of one scenario.

Everything happens through timestamped events popped in ``(time, seq)``
order. The loop owns all mutable state: AP and station records, transmit
queues, contention domains, route table and metric accumulators. Random
draws come from per-(node, purpose) substreams of the scenario seed, so two
runs of the same scenario produce identical event traces.
"""

import enum
import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .airtime import (
    StationLinkSample,
    downlink_load,
    station_airtime,
    uplink_load,
)
from .association import (
    CandidateAp,
    Cause,
    airtime_score,
    crosslayer_score,
    decide_airtime,
    decide_crosslayer,
    decide_rssi,
    should_reassociate,
)
from .balancer import BalancerState, adapt_weights, balancing_index, laba_exchange
from .channel import contention_domains, distance, link_quality
from .coop import (
    AssocTable,
    AssocTableEntry,
    broadcast_payload,
    eligible_aps,
    handoff_delay,
    probe_request_response,
)
from .errors import MeshbalError, OutOfRange, RunAborted, StaleRoute
from .mac import contention_round
from .rng import Streams
from .routing import RouteTable, build_graph
from .scenario import SINK, AssocPolicy, NodeKind, TrafficKind, ap_neighbor_map

VOIP_INTERVAL_US = 20_000
DEFAULT_FTP_RATE_KBPS = 1024.0
MAX_WINDOW_ERROR = 0.95
BITS_PER_KB = 1024 * 8  # "Kb" file sizes are read as kilobytes


def frames_per_file(spec):
    return math.ceil(spec.file_size_kb * BITS_PER_KB / spec.payload_bits)


def cbr_interval_us(spec):
    return spec.payload_bits / (spec.rate_kbps / 1000.0)


class EventKind(enum.Enum):
    FRAME_TX = "FrameTx"
    BEACON_TX = "BeaconTx"
    LABA_TX = "LabaTx"
    COOP_BROADCAST = "CoopBroadcast"
    TRAFFIC_ARRIVAL = "TrafficArrival"
    ASSOC_EVAL = "AssocEval"
    CHURN_ON = "ChurnOn"
    CHURN_OFF = "ChurnOff"
    ROUTE_REFRESH = "RouteRefresh"
    METRIC_SAMPLE = "MetricSample"


class Fate(enum.Enum):
    DELIVERED = "Delivered"
    DROPPED_RETRY = "DroppedRetry"
    DROPPED_ERROR = "DroppedError"
    DROPPED_NO_ASSOC = "DroppedNoAssoc"


class Frame:
    __slots__ = ("fid", "flow", "size", "created", "src", "dst", "retries", "fate",
                 "delivered_us", "hop_enqueued", "ap_node", "ap_arrival", "measured")

    def __init__(self, fid, flow, size, created, src, dst, measured):
        self.fid = fid
        self.flow = flow
        self.size = size
        self.created = created
        self.src = src
        self.dst = dst
        self.retries = 0
        self.fate = None
        self.delivered_us = None
        self.hop_enqueued = created
        self.ap_node = None      # AP whose access delay is being timed
        self.ap_arrival = None
        self.measured = measured


@dataclass
class FrameRecord:
    flow: int
    size_bits: int
    created_us: float
    src: str
    dst: str
    retries: int
    fate: Fate
    delivered_us: float = None


class TxQueue:
    __slots__ = ("key", "owner", "kind", "frames", "bits", "domain", "peer", "link")

    def __init__(self, key, owner, kind, peer=None, link=None):
        self.key = key
        self.owner = owner    # node state object
        self.kind = kind      # "sta" | "access" | "link"
        self.frames = deque()
        self.bits = 0
        self.domain = None
        self.peer = peer      # backbone neighbor for link queues
        self.link = link      # LinkQuality for link queues


class Domain:
    __slots__ = ("key", "busy_until", "queues", "pending", "tx_log")

    def __init__(self, key):
        self.key = key
        self.busy_until = 0.0
        self.queues = {}
        self.pending = False
        self.tx_log = None


@dataclass
class Snapshot:
    """What an AP advertises in a beacon."""

    time_us: float = 0.0
    avg_rate: float = 0.0      # harmonic-mean uplink rate
    avg_error: float = 0.0
    n: int = 0
    c_down: float = 0.0
    c_up: float = 0.0
    b: float = 1.0

    @property
    def ac(self):
        return self.c_up + self.c_down


class ApState:
    def __init__(self, spec, mac):
        self.id = spec.id
        self.mac = mac
        self.pos = spec.position
        self.channel = spec.channel
        self.kind = spec.kind
        self.associated = {}          # station id -> LinkQuality
        self.access = TxQueue(f"{spec.id}/access", self, "access")
        self.links = {}               # neighbor id -> TxQueue
        self.window = deque()         # (time, 1/rate, failed)
        self.win_inv = 0.0
        self.win_fail = 0
        self.snapshot = Snapshot()
        self.b = 1.0


class RouterState:
    def __init__(self, spec):
        self.id = spec.id
        self.pos = spec.position
        self.kind = spec.kind
        self.links = {}


class StationState:
    def __init__(self, spec, weights):
        self.id = spec.id
        self.pos = spec.position
        self.kind = spec.kind
        self.on = False
        self.state = "off"            # off | joining | associated | handoff
        self.ap = None
        self.queue = TxQueue(f"{spec.id}/sta", self, "sta")
        self.links = {}               # ap id -> LinkQuality, in-range APs only
        self.table = AssocTable(spec.id)
        self.weights = weights
        self.weights_changed = False
        self.receiver = SINK
        self.epoch = 0
        self.coop_neighbors = ()


@dataclass
class HandoffRecord:
    time_us: float
    station: str
    from_ap: str
    to_ap: str
    delay_us: float
    used_table: bool
    cause: Cause


@dataclass
class ConservationSample:
    time_us: float
    generated_bits: int
    delivered_bits: int
    dropped_bits: int
    inflight_bits: int
    generated_frames: int
    delivered_frames: int
    dropped_frames: int
    inflight_frames: int

    @property
    def holds(self):
        return (self.generated_bits == self.delivered_bits + self.dropped_bits + self.inflight_bits
                and self.generated_frames
                == self.delivered_frames + self.dropped_frames + self.inflight_frames)


@dataclass
class RunMetrics:
    throughput_bps: float = 0.0
    throughput_series: list = field(default_factory=list)     # (time_us, bps)
    avg_tx_delay_us: float = 0.0
    avg_client_access_delay_us: float = 0.0
    avg_ap_access_delay_us: float = 0.0
    avg_e2e_delay_us: float = 0.0
    dropped_bits: int = 0
    per_ap_load_series: list = field(default_factory=list)    # (time_us, {ap: AC})
    balance_series: list = field(default_factory=list)        # (time_us, mean b)
    mean_balance_index: float = 1.0
    handoffs: int = 0
    handoff_delay_us: float = 0.0
    handoff_records: list = field(default_factory=list)
    join_records: list = field(default_factory=list)
    weight_trace: list = field(default_factory=list)          # (time, sta, w1, w2, heard_b, T)
    conservation: list = field(default_factory=list)
    drops_by_fate: dict = field(default_factory=dict)
    generated_bits: int = 0
    delivered_bits: int = 0
    event_count: int = 0
    trace_hash: str = ""
    frames: list = None                                       # FrameRecord, when requested
    tx_log: dict = None                                       # domain -> [(start, end)]

    SCALARS = ("throughput_bps", "avg_tx_delay_us", "avg_client_access_delay_us",
               "avg_ap_access_delay_us", "avg_e2e_delay_us", "dropped_bits", "handoffs",
               "mean_balance_index")


class _Mean:
    __slots__ = ("total", "count")

    def __init__(self):
        self.total = 0.0
        self.count = 0

    def add(self, x):
        self.total += x
        self.count += 1

    @property
    def value(self):
        return self.total / self.count if self.count else 0.0


class Simulation:
    """One run of one scenario. Use ``run(scenario)`` for the common case."""

    def __init__(self, scenario, trace=None, keep_frames=False, log_tx=False):
        self.s = scenario
        self.trace_out = trace
        self.keep_frames = keep_frames
        self.log_tx = log_tx
        self.streams = Streams(scenario.seed)
        self.heap = []
        self.seq = 0
        self.now = 0.0
        self.hasher = hashlib.sha256()
        self.metrics = RunMetrics()
        self.policy = scenario.policy
        self._fid = 0
        self._frames = [] if keep_frames else None
        self._build()

    # ------------------------------------------------------------------ setup

    def _build(self):
        s = self.s
        self.nodes = {}
        self.aps = {}
        self.stations = {}
        for i, spec in enumerate(sorted(s.aps, key=lambda n: n.id)):
            ap = ApState(spec, mac=0x020000000000 + i + 1)
            self.aps[ap.id] = ap
        for spec in s.nodes:
            if spec.kind is NodeKind.MESH_AP:
                self.nodes[spec.id] = self.aps[spec.id]
            elif spec.kind is NodeKind.MESH_ROUTER:
                self.nodes[spec.id] = RouterState(spec)
            else:
                st = StationState(spec, BalancerState.from_policy(self.policy))
                self.stations[st.id] = st
                self.nodes[st.id] = st
        self.ap_by_mac = {ap.mac: ap for ap in self.aps.values()}
        self.sink_nodes = s.resolved_sink_nodes

        # Access domains: co-channel APs within carrier-sense range share a medium.
        self.domains = {}
        self.ap_domain = {}
        ap_pos = {a.id: a.pos for a in self.aps.values()}
        ap_ch = {a.id: a.channel for a in self.aps.values()}
        for dom in contention_domains(ap_pos, ap_ch, s.channel.cs_range_m):
            d = Domain(f"ch{dom.channel}:{','.join(sorted(dom.members))}")
            self.domains[d.key] = d
            for m in dom.members:
                self.ap_domain[m] = d
        for ap in self.aps.values():
            self._attach(ap.access, self.ap_domain[ap.id])

        # Backbone: each link is its own two-party medium.
        backbone_ids = [n.id for n in s.nodes if n.is_backbone]
        self.graph = build_graph(s) if backbone_ids else None
        for a, b, rate in s.backbone_links:
            na, nb = self.nodes[a], self.nodes[b]
            q = link_quality(na.pos, nb.pos, None, s.channel, backbone=True, nominal_rate=rate)
            d = Domain(f"link:{a}-{b}")
            self.domains[d.key] = d
            qa = TxQueue(f"{a}->{b}", na, "link", peer=nb, link=q)
            qb = TxQueue(f"{b}->{a}", nb, "link", peer=na, link=q)
            na.links[b] = qa
            nb.links[a] = qb
            self._attach(qa, d)
            self._attach(qb, d)
        if self.log_tx:
            for d in self.domains.values():
                d.tx_log = []

        for st in self.stations.values():
            for ap in self.aps.values():
                try:
                    st.links[ap.id] = link_quality(st.pos, ap.pos, ap.channel, s.channel)
                except OutOfRange:
                    pass
        coop_range = s.coop_range_m
        ids = sorted(self.stations)
        for sid in ids:
            st = self.stations[sid]
            st.coop_neighbors = tuple(
                self.stations[o] for o in ids
                if o != sid and distance(st.pos, self.stations[o].pos) <= coop_range)

        for t in s.traffic:
            for a, b in ((t.source, t.destination), (t.destination, t.source)):
                st = self.stations.get(a)
                if st is not None and st.receiver == SINK:
                    st.receiver = b
        self.neighbor_map = ap_neighbor_map(s)
        self.routes = None
        self._refresh_routes()
        self.sink_choice = {}
        self.acc = {k: _Mean() for k in ("tx", "client", "ap", "e2e")}
        self.gen_bits = self.gen_frames = 0
        self.del_bits = self.del_frames = 0
        self.drop_bits = self.drop_frames = 0
        self.measured_drop_bits = 0
        self.window_delivered_bits = 0
        self.interval_delivered_bits = 0
        self.drops_by_fate = {f.value: 0 for f in Fate if f is not Fate.DELIVERED}

    @staticmethod
    def _attach(q, domain):
        q.domain = domain
        domain.queues[q.key] = q

    @staticmethod
    def _detach(q):
        if q.domain is not None:
            q.domain.queues.pop(q.key, None)
            q.domain = None

    def _refresh_routes(self):
        if self.graph is not None:
            self.routes = RouteTable.compute(self.graph, self.now, self.s.laba_interval_us)
        self.sink_choice = {}

    # ------------------------------------------------------------------ events

    def schedule(self, time_us, kind, subject, detail, fn, *args):
        self.seq += 1
        heapq.heappush(self.heap, (time_us, self.seq, kind, subject, detail, fn, args))

    def run(self):
        s = self.s
        self._schedule_initial()
        end = s.duration_us
        heap = self.heap
        update = self.hasher.update
        out = self.trace_out
        count = 0
        while heap:
            event = heapq.heappop(heap)
            t = event[0]
            if t > end:
                break
            self.now = t
            count += 1
            line = f"{t!r}\t{event[1]}\t{event[2].value}\t{event[3]}\t{event[4]}\n"
            update(line.encode())
            if out is not None:
                out.write(line)
            try:
                event[5](*event[6])
            except MeshbalError as exc:
                raise RunAborted(line.strip(), exc) from exc
        self.now = end
        self.metrics.event_count = count
        return self._finish()

    def _schedule_initial(self):
        s = self.s
        E = EventKind
        for ap in sorted(self.aps.values(), key=lambda a: a.id):
            phase = self.streams.get(ap.id, "beacon").uniform(0, s.beacon_interval_us)
            self.schedule(phase, E.BEACON_TX, ap.id, "", self._beacon, ap)
        self.schedule(0.0, E.LABA_TX, "aps", "", self._laba)
        self.schedule(float(s.laba_interval_us), E.ROUTE_REFRESH, "backbone", "",
                      self._route_refresh)
        self.schedule(float(s.sample_interval_us), E.METRIC_SAMPLE, "run", "", self._sample)
        for spec in s.stations:
            st = self.stations[spec.id]
            self.schedule(float(spec.on_at or 0), E.CHURN_ON, st.id, "", self._churn_on, st)
            if spec.off_at is not None:
                self.schedule(float(spec.off_at), E.CHURN_OFF, st.id, "", self._churn_off, st)
        for flow_id, t in enumerate(s.traffic):
            self._start_flow(flow_id, t)

    # ------------------------------------------------------------------ traffic

    def _start_flow(self, flow_id, t):
        E = EventKind
        if t.kind is TrafficKind.CBR:
            interval = cbr_interval_us(t)
            self.schedule(float(t.start_us), E.TRAFFIC_ARRIVAL, t.source, f"flow{flow_id}",
                          self._periodic_arrival, flow_id, t, t.source, t.destination, interval)
        elif t.kind is TrafficKind.VOIP_LIKE:
            jitter = self.streams.get(f"flow{flow_id}", "voip").uniform(0, VOIP_INTERVAL_US)
            for src, dst in ((t.source, t.destination), (t.destination, t.source)):
                self.schedule(t.start_us + jitter, E.TRAFFIC_ARRIVAL, src, f"flow{flow_id}",
                              self._periodic_arrival, flow_id, t, src, dst,
                              float(VOIP_INTERVAL_US))
        else:
            self._start_file(flow_id, t, float(t.start_us))

    def _periodic_arrival(self, flow_id, t, src, dst, interval):
        if t.stop_us is not None and self.now >= t.stop_us:
            return
        self._generate(flow_id, t, src, dst)
        self.schedule(self.now + interval, EventKind.TRAFFIC_ARRIVAL, src, f"flow{flow_id}",
                      self._periodic_arrival, flow_id, t, src, dst, interval)

    def _start_file(self, flow_id, t, at):
        state = {"left_to_send": frames_per_file(t), "outstanding": 0}
        rate = t.rate_kbps or DEFAULT_FTP_RATE_KBPS
        interval = t.payload_bits / (rate / 1000.0)
        self.schedule(at, EventKind.TRAFFIC_ARRIVAL, t.source, f"flow{flow_id}",
                      self._file_arrival, flow_id, t, state, interval)

    def _file_arrival(self, flow_id, t, state, interval):
        if t.stop_us is not None and self.now >= t.stop_us:
            return
        state["left_to_send"] -= 1
        state["outstanding"] += 1
        if self._generate(flow_id, t, t.source, t.destination, on_done=state) is None:
            state["outstanding"] -= 1
        if state["left_to_send"] > 0:
            self.schedule(self.now + interval, EventKind.TRAFFIC_ARRIVAL, t.source,
                          f"flow{flow_id}", self._file_arrival, flow_id, t, state, interval)
        else:
            self._maybe_next_file(flow_id, t, state)

    def _maybe_next_file(self, flow_id, t, state):
        if state["left_to_send"] == 0 and state["outstanding"] == 0:
            state["left_to_send"] = -1  # this file is finished
            self._start_file(flow_id, t, self.now)

    def _generate(self, flow_id, t, src, dst, on_done=None):
        node = self.nodes.get(src)
        if isinstance(node, StationState) and not node.on:
            return None
        self._fid += 1
        frame = Frame(self._fid, (flow_id, on_done, t), t.payload_bits, self.now, src, dst,
                      self.now >= self.s.warmup_us)
        self.gen_bits += frame.size
        self.gen_frames += 1
        if self._frames is not None:
            self._frames.append(frame)
        if src == SINK:
            target = self._station_ap(dst)
            if dst in self.stations and target is None:
                self._drop(frame, Fate.DROPPED_NO_ASSOC)
                return frame
            gw = self._nearest_sink_node(target.id if target else dst)
            self._arrive(self.nodes[gw], frame)
        elif isinstance(node, StationState):
            if node.state == "associated" or node.state == "handoff":
                self._enqueue(node.queue, frame)
            else:
                self._drop(frame, Fate.DROPPED_NO_ASSOC)
        else:
            self._arrive(node, frame)
        return frame

    # ------------------------------------------------------------------ forwarding

    def _station_ap(self, sid):
        st = self.stations.get(sid)
        return st.ap if st is not None else None

    def _nearest_sink_node(self, target):
        """Sink attachment with the cheapest route to ``target`` (ties: lowest id)."""
        choice = self.sink_choice.get(target)
        if choice is None:
            if self.routes is None or target not in self.graph.adjacency:
                choice = self.sink_nodes[0]
            else:
                choice = min(self.sink_nodes,
                             key=lambda g: (self.routes.lookup(g, target).cost_us, g))
            self.sink_choice[target] = choice
        return choice

    def _sink_cost(self, node_id):
        if node_id in self.sink_nodes:
            return 0.0, node_id
        return min((self.routes.lookup(node_id, g).cost_us, g) for g in self.sink_nodes)

    def _arrive(self, node, frame):
        """A frame reached a backbone node: deliver, hand to the AP cell, or forward."""
        dst = frame.dst
        if dst == SINK:
            if node.id in self.sink_nodes:
                self._deliver(frame)
                return
            target = self._sink_cost(node.id)[1]
        elif dst in self.stations:
            ap = self.stations[dst].ap
            if ap is None:
                self._drop(frame, Fate.DROPPED_NO_ASSOC)
                return
            if ap is node:
                self._ap_timing_start(node, frame)
                self._enqueue(node.access, frame)
                return
            target = ap.id
        elif dst == node.id:
            self._deliver(frame)
            return
        else:
            target = dst
        next_hop = self.routes.lookup(node.id, target).next_hop
        self._ap_timing_start(node, frame)
        self._enqueue(node.links[next_hop], frame)

    def _ap_timing_start(self, node, frame):
        if isinstance(node, ApState) and frame.ap_node is None and frame.src != node.id:
            frame.ap_node = node
            frame.ap_arrival = self.now

    def _ap_timing_stop(self, frame):
        if frame.ap_node is not None and frame.ap_arrival is not None:
            if frame.measured:
                self.acc["ap"].add(self.now - frame.ap_arrival)
            frame.ap_arrival = None

    def _enqueue(self, q, frame):
        frame.hop_enqueued = self.now
        q.frames.append(frame)
        q.bits += frame.size
        d = q.domain
        if d is not None and not d.pending:
            d.pending = True
            self.schedule(max(self.now, d.busy_until), EventKind.FRAME_TX, d.key, "round",
                          self._round, d)

    def _kick(self, d):
        if d is not None and not d.pending:
            d.pending = True
            self.schedule(max(self.now, d.busy_until), EventKind.FRAME_TX, d.key, "round",
                          self._round, d)

    def _pop(self, q):
        frame = q.frames.popleft()
        q.bits -= frame.size
        return frame

    def _deliver(self, frame):
        frame.fate = Fate.DELIVERED
        frame.delivered_us = self.now
        self.del_bits += frame.size
        self.del_frames += 1
        self.interval_delivered_bits += frame.size
        if self.now >= self.s.warmup_us:
            self.window_delivered_bits += frame.size
        if frame.measured:
            self.acc["e2e"].add(self.now - frame.created)
        self._resolved(frame)

    def _drop(self, frame, fate):
        frame.fate = fate
        self.drop_bits += frame.size
        self.drop_frames += 1
        self.drops_by_fate[fate.value] += 1
        if frame.measured:
            self.measured_drop_bits += frame.size
        self._ap_timing_stop(frame)
        self._resolved(frame)

    def _resolved(self, frame):
        flow_id, state, t = frame.flow
        if state is not None:
            state["outstanding"] -= 1
            self._maybe_next_file(flow_id, t, state)

    # ------------------------------------------------------------------ MAC

    def _receiver(self, q, frame):
        """Next-hop node and link quality for the head-of-line frame."""
        if q.kind == "sta":
            st = q.owner
            return st.ap, st.ap.associated[st.id]
        if q.kind == "access":
            st = self.stations[frame.dst]
            return st, q.owner.associated[st.id]
        return q.peer, q.link

    def _sendable(self, q):
        if not q.frames:
            return False
        if q.kind == "sta":
            return q.owner.state == "associated"
        if q.kind == "access":
            ap = q.owner
            frames = q.frames
            while frames and self.stations[frames[0].dst].ap is not ap:
                self._drop(self._pop(q), Fate.DROPPED_NO_ASSOC)
            return bool(frames)
        return True

    def _round(self, d):
        s = self.s
        contenders = []
        attempts = {}
        streams = self.streams
        for q in list(d.queues.values()):
            if not self._sendable(q):
                continue
            frame = q.frames[0]
            rx, lq = self._receiver(q, frame)
            params = s.backbone_airtime if q.kind == "link" else s.airtime
            airtime = params.o_ca_us + params.o_p_us + frame.size / lq.rate_mbps
            owner = q.owner.id
            contenders.append((q.key, airtime, streams.get(owner, "mac"),
                               streams.get(owner, "err"), lq.error_prob))
            attempts[q.key] = (q, frame, rx, lq)
        if not contenders:
            d.pending = False
            return
        outcome = contention_round(self.now, contenders, s.mac)
        d.busy_until = outcome.end_us
        self.schedule(outcome.end_us, EventKind.FRAME_TX, d.key,
                      "ok" if outcome.winner is not None and not outcome.errored
                      else ("err" if outcome.winner is not None else "collision"),
                      self._tx_end, d, outcome, attempts)

    def _tx_end(self, d, outcome, attempts):
        limit = self.s.mac.retry_limit
        if outcome.winner is not None:
            q, frame, rx, lq = attempts[outcome.winner]
            if q.frames and q.frames[0] is frame:
                self._observe_uplink(q, lq, outcome.errored)
                if outcome.errored:
                    self._retry(q, frame, limit, Fate.DROPPED_ERROR)
                else:
                    if d.tx_log is not None:
                        d.tx_log.append((outcome.start_us, outcome.end_us))
                    self._pop(q)
                    self._hop_done(q, frame, rx)
        else:
            for key in outcome.colliders:
                q, frame, rx, lq = attempts[key]
                if q.frames and q.frames[0] is frame:
                    self._observe_uplink(q, lq, True)
                    self._retry(q, frame, limit, Fate.DROPPED_RETRY)
        self._round(d)

    def _retry(self, q, frame, limit, fate):
        frame.retries += 1
        if frame.retries > limit:
            self._pop(q)
            if q.kind == "sta" and frame.measured:
                self.acc["client"].add(self.now - frame.created)
            self._drop(frame, fate)

    def _observe_uplink(self, q, lq, failed):
        if q.kind != "sta":
            return
        ap = q.owner.ap
        if ap is None:
            return
        inv = 1.0 / lq.rate_mbps
        ap.window.append((self.now, inv, failed))
        ap.win_inv += inv
        ap.win_fail += failed

    def _hop_done(self, q, frame, rx):
        now = self.now
        if frame.measured:
            self.acc["tx"].add(now - frame.hop_enqueued)
        if q.kind == "sta":
            if frame.measured:
                self.acc["client"].add(now - frame.created)
            self._arrive(rx, frame)
        elif q.kind == "access":
            self._ap_timing_stop(frame)
            if frame.dst == rx.id:
                self._deliver(frame)
            else:
                self._drop(frame, Fate.DROPPED_NO_ASSOC)
        else:
            if frame.ap_node is q.owner:
                self._ap_timing_stop(frame)
            self._arrive(rx, frame)

    # ------------------------------------------------------------------ AP state

    def _expire_window(self, ap):
        horizon = self.now - self.policy.uplink_window_us
        w = ap.window
        while w and w[0][0] < horizon:
            _, inv, failed = w.popleft()
            ap.win_inv -= inv
            ap.win_fail -= failed
        if not w:
            ap.win_inv = 0.0
            ap.win_fail = 0

    def _uplink_aggregates(self, ap):
        """Harmonic-mean uplink rate and failure ratio over the sliding window.

        With no uplink attempts in the window, fall back to the link
        qualities of the currently associated stations.
        """
        self._expire_window(ap)
        if ap.window:
            n = len(ap.window)
            avg_rate = n / ap.win_inv
            avg_err = min(ap.win_fail / n, MAX_WINDOW_ERROR)
            return avg_rate, avg_err
        if not ap.associated:
            return 0.0, 0.0
        links = list(ap.associated.values())
        avg_rate = len(links) / sum(1.0 / lq.rate_mbps for lq in links)
        return avg_rate, sum(lq.error_prob for lq in links) / len(links)

    def _compute_snapshot(self, ap):
        p = self.s.airtime
        avg_rate, avg_err = self._uplink_aggregates(ap)
        n = len(ap.associated)
        c_up = uplink_load(p, avg_rate, avg_err, n)
        c_down = downlink_load(p, [StationLinkSample(lq.rate_mbps, lq.error_prob)
                                   for _, lq in sorted(ap.associated.items())])
        return Snapshot(self.now, avg_rate, avg_err, n, c_down, c_up, ap.b)

    def _beacon(self, ap):
        snap = ap.snapshot = self._compute_snapshot(ap)
        policy = self.policy
        coop = policy.cooperative
        lb = policy.load_balancing
        if coop or lb:
            entry = AssocTableEntry(ap.mac, ap.channel, int(round(snap.ac)), int(self.now))
            for sid in sorted(ap.associated):
                st = self.stations[sid]
                if coop:
                    st.table.entries[ap.mac] = entry
                if lb:
                    new = adapt_weights(st.weights, snap.b)
                    if new.w1 != st.weights.w1:
                        st.weights_changed = True
                    st.weights = new
                    self.metrics.weight_trace.append(
                        (self.now, sid, new.w1, new.w2, snap.b, new.threshold_T))
        self.schedule(self.now + self.s.beacon_interval_us, EventKind.BEACON_TX, ap.id, "",
                      self._beacon, ap)

    def _laba(self):
        loads = {}
        for ap_id in sorted(self.aps):
            ap = self.aps[ap_id]
            snap = self._compute_snapshot(ap)
            loads[ap_id] = snap.ac
        hoods = laba_exchange(loads, self.neighbor_map, self.now)
        bs = []
        for ap_id, hood in hoods.items():
            b = balancing_index(hood)
            self.aps[ap_id].b = b
            bs.append(b)
        if bs:
            self.metrics.balance_series.append((self.now, sum(bs) / len(bs)))
        self.metrics.per_ap_load_series.append((self.now, loads))
        self.schedule(self.now + self.s.laba_interval_us, EventKind.LABA_TX, "aps", "",
                      self._laba)

    def _route_refresh(self):
        self._refresh_routes()
        self.schedule(self.now + self.s.laba_interval_us, EventKind.ROUTE_REFRESH, "backbone",
                      "", self._route_refresh)

    # ------------------------------------------------------------------ association

    def _route_cost(self, st, ap):
        rcv = st.receiver
        if self.routes is None:
            return 0.0
        try:
            if rcv == SINK:
                return self._sink_cost(ap.id)[0]
            other = self.stations.get(rcv)
            if other is not None:
                if other.ap is None:
                    return self._sink_cost(ap.id)[0]
                return self.routes.lookup(ap.id, other.ap.id, self.now).cost_us
            return self.routes.lookup(ap.id, rcv, self.now).cost_us
        except StaleRoute:
            self._refresh_routes()
            return self._route_cost(st, ap)

    def _candidate(self, st, ap, lq):
        """Beacon-derived costs; for a prospective AP the station counts itself in."""
        p = self.s.airtime
        snap = ap.snapshot
        if st.ap is ap:
            c_up = uplink_load(p, snap.avg_rate, snap.avg_error, snap.n)
            c_down = snap.c_down
        else:
            n = snap.n
            inv = n / snap.avg_rate if n and snap.avg_rate > 0 else 0.0
            inv_new = (inv + 1.0 / lq.rate_mbps) / (n + 1)
            err_new = (snap.avg_error * n + lq.error_prob) / (n + 1)
            c_up = uplink_load(p, 1.0 / inv_new, err_new, n + 1)
            c_down = snap.c_down + station_airtime(p, StationLinkSample(lq.rate_mbps,
                                                                          lq.error_prob))
        rc = self._route_cost(st, ap) if self.policy.association is AssocPolicy.CROSS_LAYER \
            else None
        return CandidateAp(ap.id, ap.channel, lq.rssi_dbm, c_up, c_down, rc,
                           self.now - snap.time_us)

    def _candidates(self, st):
        return [self._candidate(st, self.aps[a], lq) for a, lq in sorted(st.links.items())]

    def _decide(self, st, candidates, cause):
        assoc = self.policy.association
        if assoc is AssocPolicy.RSSI:
            return decide_rssi(candidates, cause)
        if assoc is AssocPolicy.AIRTIME:
            return decide_airtime(candidates, cause)
        w = st.weights
        return decide_crosslayer(candidates, w.w1, w.w2, cause)

    def _score(self, st, c):
        assoc = self.policy.association
        if assoc is AssocPolicy.RSSI:
            return c.rssi_dbm
        if assoc is AssocPolicy.AIRTIME:
            return airtime_score(c)
        return crosslayer_score(c, st.weights.w1, st.weights.w2)

    def _coop_filter(self, st, candidates):
        """Restrict to APs the table vouches for; empty means a full scan is due."""
        p = self.policy
        ok = eligible_aps(st.table, self.now, p.coop_staleness_us, p.coop_load_threshold_us)
        ok_ids = {self.ap_by_mac[mac].id for mac, _ in ok if mac in self.ap_by_mac}
        return [c for c in candidates if c.ap_id in ok_ids]

    def _record_scan(self, st):
        """A full scan hears every in-range AP's beacon."""
        if not self.policy.cooperative:
            return
        now = int(self.now)
        for ap_id in sorted(st.links):
            ap = self.aps[ap_id]
            st.table.entries[ap.mac] = AssocTableEntry(
                ap.mac, ap.channel, int(round(ap.snapshot.ac)), now)

    def _churn_on(self, st):
        if st.on:
            return
        st.on = True
        st.epoch += 1
        st.state = "joining"
        if self.policy.cooperative:
            # Cooperative probe request: neighbors answer with their tables.
            tables = [o.table for o in st.coop_neighbors if o.on and o.table.entries]
            self.schedule(self.now + self.policy.coop_latency_us, EventKind.COOP_BROADCAST,
                          st.id, "probe-response", self._join_decide, st, st.epoch,
                          probe_request_response(tables))
        else:
            self._join_decide(st, st.epoch, None)
        self._schedule_eval(st, first=True)
        if self.policy.cooperative:
            phase = self.streams.get(st.id, "coop").uniform(0, self.s.coop_broadcast_period_us)
            self.schedule(self.now + phase, EventKind.COOP_BROADCAST, st.id, "broadcast",
                          self._coop_broadcast, st, st.epoch)

    def _join_decide(self, st, epoch, received):
        if not st.on or st.epoch != epoch or st.state != "joining":
            return
        if received:
            st.table.merge(received)
        candidates = self._candidates(st)
        if not candidates:
            return  # nothing in range; the periodic evaluation retries
        used_table = False
        if self.policy.cooperative:
            vouched = self._coop_filter(st, candidates)
            if vouched:
                candidates, used_table = vouched, True
        decision = self._decide(st, candidates, Cause.INITIAL_JOIN)
        self._start_move(st, self.aps[decision.chosen_ap], used_table, Cause.INITIAL_JOIN)

    def _start_move(self, st, ap, used_table, cause):
        delay = handoff_delay(self.s.handoff, used_table)
        old = st.ap
        if old is not None:
            old.associated.pop(st.id, None)
            old.snapshot = self._compute_snapshot(old)
            self._detach(st.queue)
            st.ap = None
        if cause is not Cause.INITIAL_JOIN:
            st.state = "handoff"
        if not used_table:
            self._record_scan(st)
        st.weights_changed = False
        self.schedule(self.now + delay, EventKind.ASSOC_EVAL, st.id, f"complete:{ap.id}",
                      self._complete_move, st, st.epoch, ap, old, delay, used_table, cause)

    def _complete_move(self, st, epoch, ap, old, delay, used_table, cause):
        if not st.on or st.epoch != epoch:
            return
        st.ap = ap
        st.state = "associated"
        ap.associated[st.id] = st.links[ap.id]
        ap.snapshot = self._compute_snapshot(ap)
        self._attach(st.queue, self.ap_domain[ap.id])
        self._kick(st.queue.domain)
        rec = HandoffRecord(self.now - delay, st.id, old.id if old else "", ap.id, delay,
                            used_table, cause)
        if cause is Cause.INITIAL_JOIN:
            self.metrics.join_records.append(rec)
        else:
            self.metrics.handoff_records.append(rec)
            self.metrics.handoffs += 1
            self.metrics.handoff_delay_us += delay

    def _schedule_eval(self, st, first=False):
        period = self.s.reassoc_period_us
        delay = self.streams.get(st.id, "eval").uniform(0, period) if first else period
        self.schedule(self.now + delay, EventKind.ASSOC_EVAL, st.id, "periodic",
                      self._assoc_eval, st, st.epoch)

    def _assoc_eval(self, st, epoch):
        if not st.on or st.epoch != epoch:
            return
        self._schedule_eval(st)
        if st.state == "joining":
            self._join_decide(st, epoch, None)
            return
        if st.state != "associated":
            return
        cause = Cause.BALANCER_TRIGGERED if st.weights_changed else Cause.PERIODIC_REASSOC
        candidates = self._candidates(st)
        current = next(c for c in candidates if c.ap_id == st.ap.id)
        pool = candidates
        vouched = []
        if self.policy.cooperative:
            vouched = self._coop_filter(st, candidates)
            if any(c.ap_id != st.ap.id for c in vouched):
                pool = vouched if current in vouched else vouched + [current]
        decision = self._decide(st, pool, cause)
        st.weights_changed = False
        if decision.chosen_ap == st.ap.id:
            return
        if self.policy.association is AssocPolicy.RSSI:
            move = decision.score > current.rssi_dbm
        else:
            move = should_reassociate(self._score(st, current), decision.score,
                                      self.policy.hysteresis)
        if move:
            used_table = any(c.ap_id == decision.chosen_ap for c in vouched)
            self._start_move(st, self.aps[decision.chosen_ap], used_table, cause)

    def _churn_off(self, st):
        if not st.on:
            return
        st.on = False
        st.epoch += 1
        st.state = "off"
        if st.ap is not None:
            st.ap.associated.pop(st.id, None)
            st.ap = None
        self._detach(st.queue)
        while st.queue.frames:
            self._drop(self._pop(st.queue), Fate.DROPPED_NO_ASSOC)

    def _coop_broadcast(self, st, epoch):
        if not st.on or st.epoch != epoch:
            return
        if st.table.entries:
            payload = broadcast_payload(st.table)
            self.schedule(self.now + self.policy.coop_latency_us, EventKind.COOP_BROADCAST,
                          st.id, "deliver", self._coop_deliver, st, payload)
        self.schedule(self.now + self.s.coop_broadcast_period_us, EventKind.COOP_BROADCAST,
                      st.id, "broadcast", self._coop_broadcast, st, epoch)

    def _coop_deliver(self, st, payload):
        for other in st.coop_neighbors:
            if other.on:
                other.table.merge(payload)

    # ------------------------------------------------------------------ metrics

    def _inflight(self):
        bits = frames = 0
        for st in self.stations.values():
            bits += st.queue.bits
            frames += len(st.queue.frames)
        for node in self.nodes.values():
            if isinstance(node, ApState):
                bits += node.access.bits
                frames += len(node.access.frames)
            if not isinstance(node, StationState):
                for q in node.links.values():
                    bits += q.bits
                    frames += len(q.frames)
        return bits, frames

    def _conservation(self):
        bits, frames = self._inflight()
        return ConservationSample(self.now, self.gen_bits, self.del_bits, self.drop_bits, bits,
                                  self.gen_frames, self.del_frames, self.drop_frames, frames)

    def _sample(self):
        m = self.metrics
        interval = self.s.sample_interval_us
        m.throughput_series.append((self.now, self.interval_delivered_bits * 1e6 / interval))
        self.interval_delivered_bits = 0
        m.conservation.append(self._conservation())
        self.schedule(self.now + interval, EventKind.METRIC_SAMPLE, "run", "", self._sample)

    def _finish(self):
        s = self.s
        m = self.metrics
        m.conservation.append(self._conservation())
        window = s.duration_us - s.warmup_us
        m.throughput_bps = self.window_delivered_bits * 1e6 / window
        m.avg_tx_delay_us = self.acc["tx"].value
        m.avg_client_access_delay_us = self.acc["client"].value
        m.avg_ap_access_delay_us = self.acc["ap"].value
        m.avg_e2e_delay_us = self.acc["e2e"].value
        m.dropped_bits = self.measured_drop_bits
        late = [b for t, b in m.balance_series if t >= s.warmup_us]
        m.mean_balance_index = sum(late) / len(late) if late else 1.0
        m.drops_by_fate = dict(self.drops_by_fate)
        m.generated_bits = self.gen_bits
        m.delivered_bits = self.del_bits
        m.trace_hash = self.hasher.hexdigest()
        if self._frames is not None:
            m.frames = [FrameRecord(f.flow[0], f.size, f.created, f.src, f.dst, f.retries,
                                    f.fate, f.delivered_us) for f in self._frames]
        if self.log_tx:
            m.tx_log = {k: list(d.tx_log) for k, d in self.domains.items()}
        return m


def run(scenario, trace=None, keep_frames=False, log_tx=False):
    """Simulate ``scenario`` to ``duration_us`` and return its metrics.

    ``trace`` may be a writable text file receiving one tab-separated line
    per event (time, sequence, kind, subject, detail).
    """
    return Simulation(scenario, trace, keep_frames, log_tx).run()

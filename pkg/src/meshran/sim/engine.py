"""Deterministic discrete-event engine.

Signalling frames and data packets travel hop by hop. Each hop costs the
link latency plus the processing delay of the receiving node (UEs process
in zero time), and each traversal of a lossy link draws once from that
link's own Philox stream. Frames are carried as encoded bytes and decoded
at their destination.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from ..messages import LINK_KIND_CODES, MeshTopologyUpdate, Message, QosProfile, PduSession
from ..messages import SessionRequest, decode, encode
from ..topology import LinkKey, NodeKind, NoPathError, Plane, Topology, compute_path
from ..session.fsm import (
    LinkStatus, NodeStatus, ReleaseCommand, StartSession, handle_local, handle_message,
    handle_timer,
)
from ..session.mapping import DropReason, Forward, Packet, dtf_forward
from ..session.mesh import data_forwarding
from ..session.state import (
    Approach, GnbNode, NodeEnv, RequestFailed, TimerArm, TimerCancel, Transition, UeActive,
    RouteChanged, UeBound, UeDetached, UeNode, UeState, Violation, initial_state,
)
from ..messages import Reason
from .metrics import Metrics, SessionMetrics, TraceLog


_TOPOLOGY_TAGS = frozenset({"MeshTopologyUpdate", "LinkDown", "LinkUp", "NodeDown"})


class ConfigError(ValueError):
    """The workload references something the topology does not have."""


@dataclass(frozen=True)
class SimConfig:
    timeout_us: int = 10_000
    ran_processing_us: int = 50
    core_processing_us: int = 200
    allow_list: frozenset[int] | None = None
    resource_units: tuple[int, ...] = tuple(range(16))
    reinject: bool = True  # B/C: re-establish sessions torn down by a failure
    trace: bool = True


# -- workload events -------------------------------------------------------------------

@dataclass(frozen=True)
class InjectSession:
    at_us: int
    label: str
    src: int
    dst: int
    qos: QosProfile = QosProfile(10_000, 5)
    channel_quality: int = 15
    pdus: tuple[PduSession, ...] = ()


@dataclass(frozen=True)
class InjectTraffic:
    at_us: int
    label: str
    rate_pps: float
    count: int
    size_bytes: int = 100
    reverse: bool = False


@dataclass(frozen=True)
class FailLink:
    at_us: int
    link: LinkKey


@dataclass(frozen=True)
class FailNode:
    at_us: int
    node: int


@dataclass(frozen=True)
class RecoverLink:
    at_us: int
    link: LinkKey


@dataclass(frozen=True)
class ReleaseSession:
    at_us: int
    label: str


WorkloadEvent = Union[InjectSession, InjectTraffic, FailLink, FailNode, RecoverLink, ReleaseSession]


# -- internal ---------------------------------------------------------------------------

@dataclass
class _Transit:
    """A frame or packet moving along ``hops``; ``idx`` is where it is now."""
    hops: tuple[int, ...]
    links: tuple[LinkKey, ...]
    kind: str  # "sig" or "data"
    payload: Any
    stage: str = ""
    label: str = ""
    idx: int = 0
    epoch: int = 0
    trail: tuple[int, ...] = ()  # data: every hop taken so far, across legs


@dataclass
class _Track:
    spec: InjectSession
    metrics: SessionMetrics
    ref: int = 0
    sid: int | None = None
    established: bool = False
    broken_at: int | None = None


class Simulation:
    def __init__(self, topology: Topology, approach: Approach | str,
                 workload: list[WorkloadEvent] | tuple[WorkloadEvent, ...] = (), seed: int = 0,
                 horizon_us: int = 1_000_000, config: SimConfig | None = None):
        if horizon_us <= 0:
            raise ConfigError("horizon_us must be positive")
        self.topology = topology
        self.approach = Approach(approach)
        self.seed = int(seed)
        self.horizon_us = int(horizon_us)
        self.config = config or SimConfig()
        cfg = self.config
        self.env = NodeEnv(topology, self.approach, cfg.timeout_us, cfg.ran_processing_us,
                           cfg.core_processing_us, cfg.allow_list, cfg.resource_units)
        self.nodes = {n: initial_state(topology, n) for n in topology.nodes}
        self.now = 0
        self.metrics = Metrics()
        self.trace = TraceLog(cfg.trace)
        self._queue: list[tuple[int, int, str, Any]] = []
        self._seq = 0
        self._timers: dict[tuple[int, int], int] = {}
        self._down_links: set[LinkKey] = set()
        self._down_nodes: set[int] = set()
        self._epoch: dict[LinkKey, int] = {}
        self._rngs: dict[LinkKey, np.random.Generator] = {}
        self._tracks: dict[str, _Track] = {}
        self._refs: dict[int, str] = {}
        self._next_ref = 1
        self._failures: list[list[int]] = []  # [failed_at, last_update_at]
        self._done = False
        # sessions first so traffic and releases can refer to them by label
        ordered = sorted(workload, key=lambda e: (not isinstance(e, InjectSession), e.at_us))
        for ev in ordered:
            self.schedule(ev)

    # -- scheduling ----------------------------------------------------------------

    def _push(self, at: int, kind: str, payload: Any) -> None:
        if at < self.now:
            raise AssertionError("event scheduled in the past")
        heapq.heappush(self._queue, (at, self._seq, kind, payload))
        self._seq += 1

    def schedule(self, ev: WorkloadEvent) -> WorkloadEvent:
        self._check(ev)
        if isinstance(ev, InjectSession):
            track = self._tracks[ev.label] = _Track(ev, SessionMetrics(ev.label, ev.src, ev.dst))
            self.metrics.sessions[ev.label] = track.metrics
        self._push(ev.at_us, "wl", ev)
        return ev

    def inject_failure(self, at_us: int, target: LinkKey | int) -> WorkloadEvent:
        if not 0 <= at_us <= self.horizon_us:
            raise ConfigError(f"failure time {at_us} outside the horizon")
        ev = FailNode(at_us, target) if isinstance(target, int) else FailLink(at_us, tuple(target))
        return self.schedule(ev)

    def _check(self, ev: WorkloadEvent) -> None:
        topo = self.topology
        if isinstance(ev, InjectSession):
            for end in (ev.src, ev.dst):
                if end not in topo.nodes or topo.kind(end) is not NodeKind.UE:
                    raise ConfigError(f"session {ev.label!r}: {end!r} is not a UE")
            if ev.src == ev.dst:
                raise ConfigError(f"session {ev.label!r}: source and destination are the same UE")
            if topo.serving_gnb(ev.src) == topo.serving_gnb(ev.dst):
                raise ConfigError(f"session {ev.label!r}: both UEs share a serving gNB")
            if ev.label in self._tracks:
                raise ConfigError(f"duplicate session label {ev.label!r}")
        elif isinstance(ev, (InjectTraffic, ReleaseSession)):
            if ev.label not in self._tracks:
                raise ConfigError(f"unknown session {ev.label!r}")
            if isinstance(ev, InjectTraffic) and (ev.rate_pps <= 0 or ev.count < 0 or ev.size_bytes < 1):
                raise ConfigError(f"traffic for {ev.label!r} needs rate > 0, count >= 0, size >= 1")
        elif isinstance(ev, (FailLink, RecoverLink)):
            a, b, kind = ev.link
            if a not in topo.nodes or b not in topo.nodes or not any(l.key == (min(a, b), max(a, b), kind) for l in topo.links_between(a, b)):
                raise ConfigError(f"unknown link {ev.link!r}")
        elif isinstance(ev, FailNode):
            if ev.node not in topo.nodes:
                raise ConfigError(f"unknown node {ev.node!r}")
        if ev.at_us < 0:
            raise ConfigError("event time must be >= 0")

    # -- main loop -----------------------------------------------------------------

    def run(self) -> tuple[Metrics, TraceLog]:
        if self._done:
            return self.metrics, self.trace
        while self._queue and self._queue[0][0] <= self.horizon_us:
            at, _, kind, payload = heapq.heappop(self._queue)
            self.now = at
            self.metrics.events_processed += 1
            if kind == "wl":
                self._workload(payload)
            elif kind == "hop":
                self._arrive(payload)
            elif kind == "timer":
                self._timer(*payload)
            elif kind == "gen":
                self._generate(*payload)
        self._finish()
        return self.metrics, self.trace

    def _finish(self) -> None:
        self._done = True
        for _, _, kind, payload in sorted(self._queue):
            if kind == "hop" and payload.kind == "data":
                self._drop_packet(payload.label, payload.payload, DropReason.HORIZON,
                                  payload.hops[payload.idx], trace=False)
        self._queue.clear()
        # A heals by rerouting: time until the last topology-driven change.
        # B/C heal by re-establishment, recorded as sessions come back up.
        for failed_at, last in self._failures if self.approach is Approach.A else ():
            if last >= failed_at:
                self.metrics.reconvergence_us.append(last - failed_at)

    # -- helpers -----------------------------------------------------------------------

    def label(self, node: int) -> str:
        return self.topology.nodes[node].label

    def _alive(self, node: int) -> bool:
        return node not in self._down_nodes

    def _rng(self, key: LinkKey) -> np.random.Generator:
        rng = self._rngs.get(key)
        if rng is None:
            a, b, kind = key
            ss = np.random.SeedSequence([self.seed, a, b, LINK_KIND_CODES[kind.value]])
            rng = self._rngs[key] = np.random.Generator(np.random.Philox(ss))
        return rng

    def _link(self, key: LinkKey):
        a, b, _ = key
        for l in self.topology.links_between(a, b):
            if l.key == key:
                return l
        raise KeyError(key)

    def _direct(self, a: int, b: int) -> LinkKey | None:
        links = self.topology.links_between(a, b)
        if not links:
            return None
        live = [l for l in links if l.key not in self._down_links] or links
        return min(live, key=lambda l: (l.latency_us, l.kind.value)).key

    def _is_gnb(self, node: int) -> bool:
        return self.topology.kind(node).is_gnb

    # -- transits ------------------------------------------------------------------------

    def _depart(self, tr: _Transit) -> None:
        key = tr.links[tr.idx]
        if key in self._down_links:
            self._lost(tr, DropReason.LINK_DOWN)
            return
        link = self._link(key)
        if link.loss_prob >= 1.0 or (link.loss_prob > 0 and self._rng(key).random() < link.loss_prob):
            self._lost(tr, DropReason.LINK_LOSS)
            return
        nxt = tr.hops[tr.idx + 1]
        delay = link.latency_us + self.env.processing_us(nxt)
        if tr.kind == "data" and link.bandwidth_bps:
            delay += math.ceil(tr.payload.size_bytes * 8 * 1_000_000 / link.bandwidth_bps)
        tr.epoch = self._epoch.get(key, 0)
        tr.idx += 1
        self._push(self.now + delay, "hop", tr)

    def _arrive(self, tr: _Transit) -> None:
        key = tr.links[tr.idx - 1]
        node = tr.hops[tr.idx]
        if self._epoch.get(key, 0) != tr.epoch:
            self._lost(tr, DropReason.LINK_DOWN)
            return
        if not self._alive(node):
            self._lost(tr, DropReason.NODE_DOWN)
            return
        if tr.idx < len(tr.hops) - 1:
            self._depart(tr)
        elif tr.kind == "sig":
            self._deliver_frame(tr)
        else:
            self._deliver_packet(tr)

    def _lost(self, tr: _Transit, reason: DropReason) -> None:
        if tr.kind == "sig":
            self.metrics.sig_dropped += 1
            self.metrics.sig_drop_reasons[reason.value] += 1
            msg = decode(tr.payload)
            self.trace.add(self.now, self.label(tr.hops[tr.idx]), "-", f"drop({reason.value})",
                           msg.name, tr.hops)
        else:
            self._drop_packet(tr.label, tr.payload, reason, tr.hops[tr.idx], route=tr.hops)

    # -- signalling ------------------------------------------------------------------------

    def _send(self, msg: Message) -> None:
        src, dst = msg.src, msg.dst
        topo = self.topology
        if topo.kind(src) is NodeKind.UE or topo.kind(dst) is NodeKind.UE or isinstance(
                msg, MeshTopologyUpdate):
            key = self._direct(src, dst)
            if key is None:
                self._unroutable(msg)
                return
            hops, links = (src, dst), (key,)
        else:
            node = self.nodes[src]
            assert isinstance(node, GnbNode)
            view = topo.without(node.down_links, node.down_nodes)
            try:
                path = compute_path(view, src, dst, Plane.SIGNALLING,
                                    interface=self.approach.interface)
            except NoPathError:
                self._unroutable(msg)
                return
            hops, links = path.hops, path.links
        m = self.metrics
        kinds = {topo.kind(h) for h in hops}
        segment = ("core" if NodeKind.CORE in kinds else
                   "agg" if NodeKind.AGGREGATION in kinds else "ran")
        m.sig_segments[segment] += 1
        m.sig_by_type[msg.name] += 1
        m.sig_sent += 1
        m.donor_hops += sum(topo.kind(h) is NodeKind.DONOR for h in hops)
        frame = encode(msg)
        self.trace.add_frame(frame)
        self._depart(_Transit(hops, links, "sig", frame))

    def _unroutable(self, msg: Message) -> None:
        self.metrics.sig_sent += 1
        self.metrics.sig_dropped += 1
        self.metrics.sig_drop_reasons[DropReason.NO_ROUTE.value] += 1
        self.trace.add(self.now, self.label(msg.src), "-", "drop(NoRoute)", msg.name, None)

    def _deliver_frame(self, tr: _Transit) -> None:
        msg = decode(tr.payload)
        node = msg.dst
        result = handle_message(self.nodes[node], msg, self.now, self.env)
        self._apply(node, result, msg.name, tr.hops)

    def _apply(self, node: int, tr: Transition, tag: str, path: tuple[int, ...] | None) -> None:
        self.nodes[node] = tr.node
        self.trace.add(self.now, self.label(node), tr.before, tr.after, tag, path)
        for eff in tr.effects:
            if isinstance(eff, TimerArm):
                self._timers[(node, eff.timer_id)] = eff.at_us
                self._push(max(eff.at_us, self.now), "timer", (node, eff.timer_id, eff.at_us))
            elif isinstance(eff, TimerCancel):
                self._timers.pop((node, eff.timer_id), None)
            elif isinstance(eff, Violation):
                self.metrics.violations += 1
            elif isinstance(eff, UeBound):
                label = self._refs.get(eff.ref)
                if label is not None and self._tracks[label].ref == eff.ref:
                    self._tracks[label].sid = eff.sid
            elif isinstance(eff, RequestFailed):
                label = self._refs.get(eff.ref)
                if label is not None:
                    self._tracks[label].metrics.failure = eff.reason.name
            elif isinstance(eff, UeDetached):
                self._detached(eff)
        if isinstance(tr.node, UeNode) or any(isinstance(e, (UeActive, UeBound)) for e in tr.effects):
            self._check_established()
        if self._failures and tag in _TOPOLOGY_TAGS and (
                tr.before != tr.after or any(isinstance(e, RouteChanged) for e in tr.effects)):
            self._failures[-1][1] = self.now
        for msg in tr.out:
            self._send(msg)

    def _timer(self, node: int, timer_id: int, at: int) -> None:
        if self._timers.get((node, timer_id)) != at or not self._alive(node):
            return
        del self._timers[(node, timer_id)]
        self._apply(node, handle_timer(self.nodes[node], timer_id, self.now, self.env),
                    "TIMER", None)

    # -- session tracking ------------------------------------------------------------------

    def _start(self, track: _Track) -> None:
        spec = track.spec
        ref = self._next_ref
        self._next_ref += 1
        self._refs[ref] = spec.label
        track.ref, track.sid, track.established = ref, None, False
        if not self._alive(spec.src):
            track.metrics.failure = Reason.NODE_FAILURE.name
            return
        req = SessionRequest(spec.src, spec.dst, spec.qos, spec.channel_quality)
        result = handle_local(self.nodes[spec.src], StartSession(ref, req, spec.pdus), self.now,
                              self.env)
        self._apply(spec.src, result, "START", None)

    def _check_established(self) -> None:
        for track in self._tracks.values():
            if track.established or track.sid is None:
                continue
            src, dst = self.nodes[track.spec.src], self.nodes[track.spec.dst]
            a = src.sessions.get(track.sid)
            b = dst.sessions.get(track.sid)
            if (a and b and a.state is UeState.ACTIVE and b.state is UeState.ACTIVE
                    and b.peer_ue == track.spec.src and a.peer_ue == track.spec.dst):
                track.established = True
                m = track.metrics
                m.establishments += 1
                m.failure = None
                if m.establishment_us is None and m.injected_at_us is not None:
                    m.establishment_us = self.now - m.injected_at_us
                if track.broken_at is not None:
                    self.metrics.reconvergence_us.append(self.now - track.broken_at)
                    track.broken_at = None

    def _detached(self, eff: UeDetached) -> None:
        for track in self._tracks.values():
            if track.spec.src == eff.ue and track.sid == eff.sid:
                track.established = False
                track.sid = None
                track.metrics.failure = eff.reason.name
                if eff.reason is Reason.PATH_FAILURE and self.config.reinject:
                    track.broken_at = self.now
                    self._start(track)

    # -- workload ---------------------------------------------------------------------------

    def _workload(self, ev: WorkloadEvent) -> None:
        if isinstance(ev, InjectSession):
            track = self._tracks[ev.label]
            track.metrics.injected_at_us = self.now
            self._start(track)
        elif isinstance(ev, InjectTraffic):
            interval = 1_000_000 / ev.rate_pps
            for i in range(ev.count):
                at = self.now + int(round(i * interval))
                if at > self.horizon_us:
                    break
                self._push(at, "gen", (ev.label, i, ev.reverse, ev.size_bytes))
        elif isinstance(ev, ReleaseSession):
            track = self._tracks[ev.label]
            serving = self.topology.serving_gnb(track.spec.src)
            if track.sid is not None and self._alive(serving):
                result = handle_local(self.nodes[serving], ReleaseCommand((serving, track.sid)),
                                      self.now, self.env)
                self._apply(serving, result, "RELEASE", None)
        elif isinstance(ev, (FailLink, RecoverLink)):
            a, b, kind = ev.link
            key = (min(a, b), max(a, b), kind)
            up = isinstance(ev, RecoverLink)
            if up:
                self._down_links.discard(key)
            else:
                self._down_links.add(key)
                self._epoch[key] = self._epoch.get(key, 0) + 1
                self._failures.append([self.now, self.now])
            tag = "RecoverLink" if up else "FailLink"
            self.trace.add(self.now, "-", "-", "-", tag, (key[0], key[1]))
            if self.approach is Approach.A:
                aware = [n for n in (key[0], key[1]) if self._is_gnb(n)]
            else:
                aware = [n for n in sorted(self.topology.nodes) if self._is_gnb(n)]
            for n in aware:
                if self._alive(n):
                    self._apply(n, handle_local(self.nodes[n], LinkStatus(key, up), self.now,
                                                self.env), "LinkUp" if up else "LinkDown", None)
        elif isinstance(ev, FailNode):
            node = ev.node
            if node in self._down_nodes:
                return
            self._down_nodes.add(node)
            for l in self.topology.incident(node):
                self._epoch[l.key] = self._epoch.get(l.key, 0) + 1
            self._failures.append([self.now, self.now])
            self.trace.add(self.now, self.label(node), "-", "-", "FailNode", None)
            if self.approach is Approach.A:
                aware = sorted(n for n in self.topology.neighbors(node) if self._is_gnb(n))
            else:
                aware = [n for n in sorted(self.topology.nodes) if self._is_gnb(n)]
            for n in aware:
                if self._alive(n):
                    self._apply(n, handle_local(self.nodes[n], NodeStatus(node, False), self.now,
                                                self.env), "NodeDown", None)

    # -- data plane -------------------------------------------------------------------------

    def _generate(self, label: str, seq_no: int, reverse: bool, size: int) -> None:
        track = self._tracks[label]
        src, dst = track.spec.src, track.spec.dst
        if reverse:
            src, dst = dst, src
        track.metrics.injected += 1
        ue = self.nodes[src]
        assert isinstance(ue, UeNode)
        session = ue.session_to(dst)
        sid = session.sid if session else 0
        packet = Packet(sid, seq_no, size, self.now, src, dst)
        if not self._alive(src):
            self._drop_packet(label, packet, DropReason.NODE_DOWN, src)
            return
        if session is None:
            self._drop_packet(label, packet, DropReason.NO_SESSION, src)
            return
        key = self._direct(src, ue.serving)
        self._depart(_Transit((src, ue.serving), (key,), "data", packet, "up", label,
                              trail=(src, ue.serving)))

    def _dtf(self, node: GnbNode, packet: Packet) -> Forward | DropReason:
        if self.approach is Approach.A:
            return data_forwarding(node, packet, self.now)
        return dtf_forward(node.mapping, packet, self.now, node.active_keys())

    def _deliver_packet(self, tr: _Transit) -> None:
        packet: Packet = tr.payload
        here = tr.hops[-1]
        m = self._tracks[tr.label].metrics
        if tr.stage == "down":
            m.delivered += 1
            m.latencies_us.append(self.now - packet.created_at_us)
            m.sent_at_us.append(packet.created_at_us)
            self.trace.add(self.now, self.label(here), "-", "delivered", "DATA", tr.trail)
            return
        node = self.nodes[here]
        assert isinstance(node, GnbNode)
        decision = self._dtf(node, packet)
        if isinstance(decision, DropReason):
            self._drop_packet(tr.label, packet, decision, here)
            return
        m.dtf = m.dtf + decision.delta
        if decision.toward_peer:
            ctx = node.find(packet.session_id, packet.src_ue)
            if ctx is None or ctx.path is None or len(ctx.path) < 4:
                self._drop_packet(tr.label, packet, DropReason.NO_ROUTE, here)
                return
            hops, links = ctx.path[1:-1], ctx.links[1:-1]
            gnb_hops = sum(1 for a, b in zip(hops, hops[1:]) if self._is_gnb(a) and self._is_gnb(b))
            self.metrics.max_ran_hops = max(self.metrics.max_ran_hops, gnb_hops)
            self._depart(_Transit(hops, links, "data", packet, "mesh", tr.label,
                                  trail=tr.trail + hops[1:]))
        else:
            key = self._direct(here, packet.dst_ue)
            if key is None:
                self._drop_packet(tr.label, packet, DropReason.NO_ROUTE, here)
                return
            self._depart(_Transit((here, packet.dst_ue), (key,), "data", packet, "down", tr.label,
                                  trail=tr.trail + (packet.dst_ue,)))

    def _drop_packet(self, label: str, packet: Packet, reason: DropReason, where: int, *,
                     route: tuple[int, ...] | None = None, trace: bool = True) -> None:
        m = self._tracks[label].metrics
        m.dropped += 1
        m.drop_reasons[reason.value] += 1
        if trace:
            self.trace.add(self.now, self.label(where), "-", f"drop({reason.value})", "DATA",
                           route or (packet.src_ue, packet.dst_ue))


def run(topology: Topology, approach: Approach | str, workload: list[WorkloadEvent], seed: int = 0,
        horizon_us: int = 1_000_000, config: SimConfig | None = None) -> tuple[Metrics, TraceLog]:
    """Run one simulation to the horizon and return its metrics and trace."""
    return Simulation(topology, approach, workload, seed, horizon_us, config).run()

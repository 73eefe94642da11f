"""Helpers shared by the approach-specific gNB handlers.

A ``Step`` wraps one transition: it owns the cloned node state, collects
outgoing messages and effects, and records the before/after label of the
state machine instance the input concerned.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from ..messages import Message, Reason, SessionRelease
from ..topology import LinkKey, NodeKind, NoPathError, Plane, Topology, compute_path
from .mapping import MappingTableEntry, mapping_table_update
from .state import (
    GnbNode, LedgerChange, MappingDelete, MappingWrite, NodeEnv, ProtocolViolation, RouteChanged,
    SessionCtx, SessionDown, SessionKey, TimerArm, TimerCancel, Transition, Violation, show,
)


class Step:
    def __init__(self, node: GnbNode, now: int, env: NodeEnv):
        self.node = node.clone()
        self.now = now
        self.env = env
        self.tr = Transition(self.node)

    # -- topology ------------------------------------------------------------

    @property
    def me(self) -> int:
        return self.node.id

    def view(self) -> Topology:
        return self.env.topology.without(self.node.down_links, self.node.down_nodes)

    def attached(self, ue: int) -> bool:
        topo = self.env.topology
        return ue in topo.nodes and topo.kind(ue) is NodeKind.UE and topo.serving_gnb(ue) == self.me

    def serving_of(self, ue: int) -> int | None:
        topo = self.env.topology
        if ue not in topo.nodes or topo.kind(ue) is not NodeKind.UE:
            return None
        return topo.serving_gnb(ue)

    def data_path(self, local_ue: int, peer_ue: int) -> tuple[tuple[int, ...], tuple[LinkKey, ...]] | None:
        try:
            path = compute_path(self.view(), local_ue, peer_ue, Plane.DATA,
                                interface=self.env.approach.interface)
        except NoPathError:
            return None
        return path.hops, path.links

    def rto(self, peer: int) -> int:
        """Retransmission timeout toward ``peer``: the base timeout plus the
        round trip over the current signalling route."""
        topo = self.view()
        try:
            if topo.kind(peer) is NodeKind.UE:
                one_way = min(l.latency_us for l in topo.links_between(self.me, peer))
            else:
                path = compute_path(topo, self.me, peer, Plane.SIGNALLING,
                                    interface=self.env.approach.interface)
                one_way = path.total_latency_us + sum(
                    self.env.processing_us(h) for h in path.hops[1:])
        except (NoPathError, ValueError, KeyError):
            one_way = 0
        return self.env.timeout_us + 2 * one_way

    # -- output ----------------------------------------------------------------

    def emit(self, cls: type[Message], dst: int, **fields: Any) -> Message:
        msg = cls(src=self.me, dst=dst, sent_at_us=self.now, **fields)
        self.tr.out.append(msg)
        return msg

    def effect(self, eff: Any) -> None:
        self.tr.effects.append(eff)

    def label(self, before: str, after: str) -> None:
        self.tr.before, self.tr.after = before, after

    def done(self) -> Transition:
        self.tr.node = self.node
        return self.tr

    # -- session bookkeeping -----------------------------------------------------

    def put(self, ctx: SessionCtx) -> SessionCtx:
        self.node.sessions[ctx.key] = ctx
        return ctx

    def alloc_sid(self, ue: int) -> int:
        sid = self.node.next_sid
        while (self.me, sid) in self.node.sessions or self.node.key_taken(sid, ue):
            sid += 1
        self.node.next_sid = sid + 1
        return sid

    def arm(self, ctx: SessionCtx, peer: int) -> SessionCtx:
        ctx = self.cancel(ctx)
        timer_id = self.node.next_timer
        self.node.next_timer += 1
        self.effect(TimerArm(timer_id, self.now + self.rto(peer)))
        return self.put(replace(ctx, timer=timer_id))

    def cancel(self, ctx: SessionCtx) -> SessionCtx:
        if ctx.timer is not None:
            self.effect(TimerCancel(ctx.timer))
            ctx = self.put(replace(ctx, timer=None))
        return ctx

    def charge(self, ctx: SessionCtx, n: int) -> SessionCtx:
        if n:
            self.node.ledger = self.node.ledger.allocate(n)
            self.effect(LedgerChange(self.me, n, ctx.key))
        return self.put(replace(ctx, reserved=ctx.reserved + n))

    def refund(self, ctx: SessionCtx, n: int) -> SessionCtx:
        if n:
            self.node.ledger = self.node.ledger.release(n)
            self.effect(LedgerChange(self.me, -n, ctx.key))
        return self.put(replace(ctx, reserved=ctx.reserved - n))

    def entry_for(self, ctx: SessionCtx) -> MappingTableEntry:
        assert ctx.path is not None
        return MappingTableEntry(ctx.sid, ctx.local_ue, ctx.peer_gnb, ctx.peer_ue, ctx.bearer_id,
                                 ctx.path[2], ctx.request.qos)

    def install(self, ctx: SessionCtx) -> None:
        entry = self.entry_for(ctx)
        self.node.mapping = mapping_table_update(self.node.mapping, entry)
        self.effect(MappingWrite(entry))

    def uninstall(self, ctx: SessionCtx) -> None:
        key = ctx.mapping_key
        entry = self.node.mapping.get(key)
        if entry is not None and entry.peer_gnb == ctx.peer_gnb and entry.peer_ue == ctx.peer_ue:
            self.node.mapping = self.node.mapping.remove(key)
            self.effect(MappingDelete(key))

    def set_state(self, ctx: SessionCtx, state: Any, **changes: Any) -> SessionCtx:
        return self.put(replace(ctx, state=state, **changes))

    def fail(self, ctx: SessionCtx, reason: Reason, *, notify_ue: bool = True,
             notify_peer: bool = False) -> SessionCtx:
        """Tear a session down: release resources and forwarding state."""
        ctx = self.cancel(ctx)
        ctx = self.refund(ctx, ctx.reserved)
        self.uninstall(ctx)
        ctx = self.set_state(ctx, type(ctx.state).FAILED, reason=reason)
        self.effect(SessionDown(ctx.key, reason))
        if notify_ue:
            self.emit(SessionRelease, ctx.local_ue, sid=ctx.sid, origin=ctx.key[0], reason=reason)
        if notify_peer:
            self.emit(SessionRelease, ctx.peer_gnb, sid=ctx.sid, origin=ctx.key[0], reason=reason)
        return ctx

    def violate(self, msg: Message, ctx: SessionCtx | None, state: str, detail: str = "") -> None:
        """Reject an out-of-order input: the instance fails and emits nothing."""
        err = ProtocolViolation(state, msg.TAG, detail)
        self.tr.violation = err
        self.effect(Violation(err))
        after = state
        if ctx is not None and not ctx.failed:
            self.tr.out.clear()
            ctx = self.cancel(ctx)
            ctx = self.refund(ctx, ctx.reserved)
            self.uninstall(ctx)
            ctx = self.set_state(ctx, type(ctx.state).FAILED, reason=Reason.PROTOCOL_VIOLATION)
            self.effect(SessionDown(ctx.key, Reason.PROTOCOL_VIOLATION))
            after = ctx.label()
        self.label(state, after)

    def bearer(self, sid: int) -> int:
        return (sid - 1) % 0xFFFF + 1

    def units(self, ctx: SessionCtx) -> int:
        return self.env.resource_units[ctx.request.channel_quality]

    # -- admission checks shared by the approaches ------------------------------

    def vet_source(self, ue: int, req) -> tuple[int, tuple, tuple] | Reason:
        """Checks a source gNB runs on a UE request; returns the target gNB and
        the data path, or the reason the request cannot proceed."""
        peer_gnb = self.serving_of(req.destination_id)
        if peer_gnb is None or peer_gnb == self.me or req.destination_id == ue:
            return Reason.NO_ROUTE
        if peer_gnb in self.node.down_nodes:
            return Reason.NO_ROUTE
        found = self.data_path(ue, req.destination_id)
        if found is None:
            return Reason.NO_ROUTE
        return (peer_gnb, *found)

    def vet_target(self, src_gnb: int, sid: int, req) -> tuple[tuple, tuple] | Reason:
        dest = req.destination_id
        if not self.attached(dest) or self.serving_of(req.user_id) != src_gnb:
            return Reason.NO_ROUTE
        if self.node.key_taken(sid, dest):
            return Reason.DUPLICATE_SESSION
        found = self.data_path(dest, req.user_id)
        if found is None:
            return Reason.NO_ROUTE
        return found

    def config_fields(self, ctx: SessionCtx) -> dict[str, Any]:
        """Fields of the path configuration sent to the local UE. The path is
        always written initiator first so a UE can tell its role."""
        path = ctx.path if ctx.role == "source" else tuple(reversed(ctx.path))
        return dict(sid=ctx.sid, bearer_id=ctx.bearer_id, reserved_sessions=ctx.reserved,
                    resource_units=self.units(ctx), path=path)

    # -- failure handling shared by B and C --------------------------------------

    def touches(self, ctx: SessionCtx, link: LinkKey | None = None, node: int | None = None) -> bool:
        if ctx.path is None:
            return False
        if node is not None and (node in ctx.path or node == ctx.peer_gnb):
            return True
        return link is not None and link in (ctx.links or ())

    def reroute(self, ctx: SessionCtx) -> SessionCtx:
        found = self.data_path(ctx.local_ue, ctx.peer_ue)
        path, links = found if found else (None, ())
        if path == ctx.path and links == ctx.links:
            return ctx
        ctx = self.put(replace(ctx, path=path, links=links))
        if path is not None and ctx.mapping_key in self.node.mapping:
            self.install(ctx)
        self.effect(RouteChanged(ctx.key, path))
        return ctx


def session_label(ctx: SessionCtx | None) -> str:
    return ctx.label() if ctx is not None else "-"


def find_by_key(node: GnbNode, key: SessionKey) -> SessionCtx | None:
    return node.sessions.get(key)


__all__ = ["Step", "session_label", "find_by_key", "show"]

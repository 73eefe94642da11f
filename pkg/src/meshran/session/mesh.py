"""Approach A: a mesh layer hosting core functions inside the RAN nodes.

The layer is split into four components. ``AccessHandover`` authenticates
UE requests against the allow-list, ``ResourceQoS`` admits them against the
local ledger, ``DynamicMgmt`` tracks topology changes and re-routes
sessions, and ``DataForwarding`` runs the DTF for data packets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..messages import (
    LINK_KIND_CODES, MeshAuthRequest, MeshAuthResponse, MeshScheduleRequest, MeshScheduleResponse,
    MeshTopologyUpdate, Message, PathComplete, PathConfiguration, Reason,
)
from ..topology import LinkKey, LinkKind
from .common import Step
from .mapping import DropReason, Forward, Packet, dtf_forward
from .state import (
    Duplicate, GnbA, GnbNode, NodeEnv, SessionCtx, SessionUp, Transition, show,
)


class MeshComponent(str, enum.Enum):
    ACCESS_HANDOVER = "AccessHandover"
    RESOURCE_QOS = "ResourceQoS"
    DYNAMIC_MGMT = "DynamicMgmt"
    DATA_FORWARDING = "DataForwarding"


@dataclass(frozen=True)
class LinkStatus:
    """Local detection of a link going down or coming back."""
    link: LinkKey
    up: bool


@dataclass(frozen=True)
class NodeStatus:
    node: int
    up: bool


_KIND_BY_CODE = {code: LinkKind(name) for name, code in LINK_KIND_CODES.items()}


# -- AccessHandover / ResourceQoS ---------------------------------------------------

def _reject(s: Step, ue: int, reason: Reason) -> None:
    s.emit(MeshAuthResponse, ue, sid=0, reason=reason)
    s.label("Idle", show(GnbA.FAILED, reason))


def access_handover(s: Step, msg: MeshAuthRequest) -> None:
    ue, req = msg.src, msg.request
    if not s.attached(ue) or req.user_id != ue:
        s.violate(msg, None, "Idle", "request from a UE not served here")
        return
    allow = s.env.allow_list
    if allow is not None and ue not in allow:
        _reject(s, ue, Reason.AUTH_REJECTED)
        return
    resource_qos(s, msg)


def resource_qos(s: Step, msg: MeshAuthRequest) -> None:
    ue, req = msg.src, msg.request
    if s.node.ledger.available < 1:
        _reject(s, ue, Reason.NO_RESOURCES)
        return
    vetted = s.vet_source(ue, req)
    if isinstance(vetted, Reason):
        _reject(s, ue, vetted)
        return
    peer_gnb, path, links = vetted
    sid = s.alloc_sid(ue)
    ctx = s.put(SessionCtx((s.me, sid), "source", GnbA.AUTHENTICATED, ue, req.destination_id,
                           peer_gnb, req, path=path, links=links, bearer_id=s.bearer(sid)))
    ctx = s.charge(ctx, 1)
    s.emit(MeshAuthResponse, ue, sid=sid)
    s.emit(MeshScheduleRequest, peer_gnb, sid=sid, request=req)
    ctx = s.arm(ctx, peer_gnb)
    s.label("Idle", ctx.label())


def on_schedule_request(s: Step, msg: MeshScheduleRequest) -> None:
    key = (msg.src, msg.sid)
    ctx = s.node.sessions.get(key)
    if ctx is not None:
        s.emit(MeshScheduleResponse, msg.src, sid=msg.sid,
               reason=ctx.reason if ctx.failed and ctx.reason else Reason.OK)
        s.effect(Duplicate(msg.TAG))
        s.label(ctx.label(), ctx.label())
        return
    req = msg.request
    ctx = SessionCtx(key, "target", GnbA.IDLE, req.destination_id, req.user_id, msg.src, req,
                     bearer_id=s.bearer(msg.sid))
    vetted = s.vet_target(msg.src, msg.sid, req)
    if not isinstance(vetted, Reason) and s.node.ledger.available < 1:
        vetted = Reason.NO_RESOURCES
    if isinstance(vetted, Reason):
        ctx = s.set_state(ctx, GnbA.FAILED, reason=vetted)
        s.emit(MeshScheduleResponse, msg.src, sid=msg.sid, reason=vetted)
        s.label("Idle", ctx.label())
        return
    path, links = vetted
    ctx = s.charge(s.put(ctx), 1)
    ctx = s.set_state(ctx, GnbA.SCHEDULED, path=path, links=links)
    s.install(ctx)
    s.emit(MeshScheduleResponse, msg.src, sid=msg.sid)
    s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
    ctx = s.arm(ctx, ctx.local_ue)
    s.label("Idle", ctx.label())


def on_schedule_response(s: Step, msg: MeshScheduleResponse) -> None:
    ctx = s.node.sessions.get((s.me, msg.sid))
    if ctx is None or ctx.role != "source" or ctx.peer_gnb != msg.src:
        s.violate(msg, None, "Idle", "schedule response for an unknown session")
        return
    before = ctx.label()
    if ctx.state is GnbA.AUTHENTICATED:
        if msg.reason is not Reason.OK:
            ctx = s.fail(ctx, Reason.TARGET_REJECTED)
        elif ctx.path is None:
            ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
        else:
            ctx = s.set_state(ctx, GnbA.SCHEDULED, retries=0)
            s.install(ctx)
            s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
            ctx = s.arm(ctx, ctx.local_ue)
        s.label(before, ctx.label())
    elif ctx.state in (GnbA.SCHEDULED, GnbA.ACTIVE) and msg.reason is Reason.OK:
        s.effect(Duplicate(msg.TAG))
        s.label(before, before)
    else:
        s.violate(msg, ctx, before)


def on_complete(s: Step, msg: PathComplete) -> None:
    ctx = s.node.find(msg.sid, msg.src)
    if ctx is None:
        s.violate(msg, None, "Idle", "completion for an unknown session")
        return
    before = ctx.label()
    if ctx.state is GnbA.SCHEDULED:
        ctx = s.cancel(ctx)
        ctx = s.set_state(ctx, GnbA.ACTIVE, retries=0)
        s.effect(SessionUp(ctx.key))
        s.label(before, ctx.label())
    elif ctx.active:
        s.effect(Duplicate(msg.TAG))
        s.label(before, before)
    else:
        s.violate(msg, ctx, before)


def on_timeout(s: Step, ctx: SessionCtx) -> None:
    before = ctx.label()
    if ctx.retries >= 1:
        ctx = s.fail(ctx, Reason.TIMEOUT, notify_peer=True)
    elif ctx.state is GnbA.AUTHENTICATED:
        s.emit(MeshScheduleRequest, ctx.peer_gnb, sid=ctx.sid, request=ctx.request)
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.peer_gnb)
    elif ctx.path is None:
        ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
    else:
        s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.local_ue)
    s.label(before, ctx.label())


# -- DynamicMgmt ----------------------------------------------------------------------

def _flood(s: Step, update: dict, skip: int | None = None) -> None:
    topo = s.env.topology
    view = s.view()
    for nbr in sorted(view.neighbors(s.me)):
        if nbr == skip or not topo.kind(nbr).is_gnb:
            continue
        s.emit(MeshTopologyUpdate, nbr, **update)


def _apply(s: Step, element: int, a: int, b: int, kind: LinkKind | None, up: bool) -> bool:
    node = s.node
    if element == 2:
        new = node.down_nodes - {a} if up else node.down_nodes | {a}
        changed = new != node.down_nodes
        node.down_nodes = new
    else:
        key = (min(a, b), max(a, b), kind)
        new = node.down_links - {key} if up else node.down_links | {key}
        changed = new != node.down_links
        node.down_links = new
    return changed


def _reroute_all(s: Step) -> None:
    for key in sorted(s.node.sessions):
        ctx = s.node.sessions[key]
        if not ctx.failed:
            s.reroute(ctx)


def dynamic_mgmt(s: Step, event: LinkStatus | NodeStatus | MeshTopologyUpdate) -> None:
    """Apply a topology change, flood it to RAN neighbours and re-route."""
    # the label counts known updates, so it changes whenever the view does
    before = f"view={len(s.node.seen_updates)}"
    if isinstance(event, MeshTopologyUpdate):
        tag = (event.origin, event.seq)
        if tag in s.node.seen_updates or event.origin == s.me:
            s.effect(Duplicate(event.TAG))
            s.label(before, before)
            return
        s.node.seen_updates = s.node.seen_updates | {tag}
        kind = _KIND_BY_CODE.get(event.link_kind) if event.element == 1 else None
        _apply(s, event.element, event.a, event.b, kind, event.up)
        update = dict(origin=event.origin, seq=event.seq, element=event.element, a=event.a,
                      b=event.b, link_kind=event.link_kind, up=event.up)
        _flood(s, update, skip=event.src)
    else:
        if isinstance(event, LinkStatus):
            a, b, kind = event.link
            element, code = 1, LINK_KIND_CODES[kind.value]
        else:
            a, b, kind, element, code = event.node, 0, None, 2, 0
        if not _apply(s, element, a, b, kind, event.up):
            s.label(before, before)
            return
        s.node.topo_seq += 1
        s.node.seen_updates = s.node.seen_updates | {(s.me, s.node.topo_seq)}
        _flood(s, dict(origin=s.me, seq=s.node.topo_seq, element=element, a=a, b=b,
                       link_kind=code, up=event.up))
    _reroute_all(s)
    s.label(before, f"view={len(s.node.seen_updates)}")


# -- DataForwarding ---------------------------------------------------------------------

def data_forwarding(node: GnbNode, packet: Packet, now_us: int) -> Forward | DropReason:
    result = dtf_forward(node.mapping, packet, now_us, node.active_keys())
    if isinstance(result, Forward) and result.toward_peer:
        ctx = node.sessions.get((node.id, packet.session_id)) or node.find(
            packet.session_id, packet.src_ue)
        if ctx is not None and ctx.path is None:
            return DropReason.NO_ROUTE
    return result


def mesh_layer_step(component: MeshComponent, node: GnbNode, event: object, now_us: int,
                    env: NodeEnv) -> Transition | Forward | DropReason:
    """Run one mesh-layer component on ``event``.

    Control components return a ``Transition``; ``DataForwarding`` returns the
    DTF decision for a packet.
    """
    if component is MeshComponent.DATA_FORWARDING:
        assert isinstance(event, Packet)
        return data_forwarding(node, event, now_us)
    s = Step(node, now_us, env)
    if component is MeshComponent.ACCESS_HANDOVER:
        access_handover(s, event)
    elif component is MeshComponent.RESOURCE_QOS:
        resource_qos(s, event)
    else:
        dynamic_mgmt(s, event)
    return s.done()


HANDLERS: dict[type[Message], object] = {
    MeshAuthRequest: access_handover,
    MeshScheduleRequest: on_schedule_request,
    MeshScheduleResponse: on_schedule_response,
    PathComplete: on_complete,
    MeshTopologyUpdate: dynamic_mgmt,
}

__all__ = ["MeshComponent", "LinkStatus", "NodeStatus", "mesh_layer_step", "data_forwarding",
           "HANDLERS"]

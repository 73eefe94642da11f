"""Entry points of the per-node session state machines.

Every function here is pure: it takes a node state and one input and returns
a ``Transition`` holding the new node state, the messages to send and the
side effects for the simulator to apply.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..messages import (
    MeshAuthRequest, MeshAuthResponse, Message, PathComplete, PathConfiguration, PduSession, Reason,
    RrcComplete, RrcSessionConfig, RrcSessionRequest, RrcSessionResponse, SessionRelease,
    SessionRequest,
)
from . import mesh, rrc, xn
from .common import Step
from .mesh import LinkStatus, NodeStatus
from .state import (
    Approach, Duplicate, GnbC, GnbNode, NodeEnv, NodeState, Outstanding, ProtocolViolation,
    RequestFailed, SessionKey, TimerCancel, Transition, UeActive, UeBound, UeDetached, UeNode, UeSession,
    UeState, Violation,
)

_HANDLERS = {Approach.A: mesh.HANDLERS, Approach.B: rrc.HANDLERS, Approach.C: xn.HANDLERS}
_TIMEOUTS = {Approach.A: mesh.on_timeout, Approach.B: rrc.on_timeout, Approach.C: xn.on_timeout}


@dataclass(frozen=True)
class StartSession:
    """The application on a UE asks for a session; ``ref`` identifies it."""
    ref: int
    request: SessionRequest
    pdus: tuple[PduSession, ...] = ()


@dataclass(frozen=True)
class ReleaseCommand:
    key: SessionKey


LocalEvent = StartSession | ReleaseCommand | LinkStatus | NodeStatus


# -- gNB side ---------------------------------------------------------------------------

def _on_release(s: Step, msg: SessionRelease) -> None:
    ctx = s.node.sessions.get((msg.origin, msg.sid))
    if ctx is None or ctx.peer_gnb != msg.src:
        s.violate(msg, None, "-", "release for an unknown session")
        return
    before = ctx.label()
    if ctx.failed:
        s.effect(Duplicate(msg.TAG))
    else:
        reason = msg.reason if msg.reason is not Reason.OK else Reason.RELEASED
        s.fail(ctx, reason)
    s.label(before, s.node.sessions[ctx.key].label())


def handle_message(node: NodeState, msg: Message, now_us: int, env: NodeEnv) -> Transition:
    if isinstance(node, UeNode):
        return ue_handle_message(node, msg, now_us, env)
    s = Step(node, now_us, env)
    if isinstance(msg, SessionRelease):
        _on_release(s, msg)
        return s.done()
    handler = _HANDLERS[env.approach].get(type(msg))
    if handler is None:
        s.violate(msg, None, "-", f"{msg.name} is not part of approach {env.approach.value}")
    else:
        handler(s, msg)
    return s.done()


def handle_timer(node: NodeState, timer_id: int, now_us: int, env: NodeEnv) -> Transition:
    if isinstance(node, UeNode):
        return Transition(node)
    s = Step(node, now_us, env)
    for ctx in list(s.node.sessions.values()):
        if ctx.timer == timer_id and not ctx.failed:
            s.put(replace(ctx, timer=None))
            _TIMEOUTS[env.approach](s, s.node.sessions[ctx.key])
            return s.done()
    for assoc in list(s.node.xn.values()):
        if assoc.timer == timer_id:
            s.node.xn[assoc.peer] = replace(assoc, timer=None)
            xn.on_assoc_timeout(s, s.node.xn[assoc.peer])
            return s.done()
    return s.done()


def _failure_view(s: Step, event: LinkStatus | NodeStatus) -> None:
    """B and C: gNBs learn of failures directly and drop affected sessions."""
    before = f"down={len(s.node.down_links) + len(s.node.down_nodes)}"
    node = s.node
    if isinstance(event, LinkStatus):
        links = {event.link}
        node.down_links = node.down_links - links if event.up else node.down_links | links
    else:
        nodes = {event.node}
        node.down_nodes = node.down_nodes - nodes if event.up else node.down_nodes | nodes
        if not event.up and event.node in node.xn:
            assoc = node.xn.pop(event.node)
            if assoc.timer is not None:
                s.effect(TimerCancel(assoc.timer))
    if not event.up:
        for key in sorted(node.sessions):
            ctx = node.sessions[key]
            if ctx.failed:
                continue
            hit = (s.touches(ctx, link=event.link) if isinstance(event, LinkStatus)
                   else s.touches(ctx, node=event.node))
            if hit:
                s.fail(ctx, Reason.PATH_FAILURE)
    s.label(before, f"down={len(node.down_links) + len(node.down_nodes)}")


def handle_local(node: NodeState, event: LocalEvent, now_us: int, env: NodeEnv) -> Transition:
    if isinstance(node, UeNode):
        if not isinstance(event, StartSession):
            return Transition(node)
        return ue_request(node, event, now_us, env)
    s = Step(node, now_us, env)
    if isinstance(event, ReleaseCommand):
        ctx = s.node.sessions.get(event.key)
        if ctx is not None and not ctx.failed:
            before = ctx.label()
            ctx = s.fail(ctx, Reason.RELEASED, notify_peer=ctx.state is not GnbC.XN_SETUP)
            s.label(before, ctx.label())
    elif isinstance(event, (LinkStatus, NodeStatus)):
        if env.approach is Approach.A:
            mesh.dynamic_mgmt(s, event)
        else:
            _failure_view(s, event)
    return s.done()


# -- UE side ------------------------------------------------------------------------------

class _UeStep:
    def __init__(self, ue: UeNode, now: int, env: NodeEnv):
        self.ue = ue.clone()
        self.now = now
        self.env = env
        self.tr = Transition(self.ue)

    def emit(self, cls: type[Message], **fields) -> None:
        self.tr.out.append(cls(src=self.ue.id, dst=self.ue.serving, sent_at_us=self.now, **fields))

    def violate(self, msg: Message, state: str, detail: str) -> None:
        err = ProtocolViolation(state, msg.TAG, detail)
        self.tr.violation = err
        self.tr.effects.append(Violation(err))
        self.tr.before = self.tr.after = state

    def send_request(self, item: Outstanding) -> None:
        self.ue.outstanding = item
        if self.env.approach is Approach.A:
            self.emit(MeshAuthRequest, request=item.request)
        else:
            self.emit(RrcSessionRequest, request=item.request, pdus=item.pdus)

    def pump(self) -> None:
        self.ue.outstanding = None
        if self.ue.queue:
            head, self.ue.queue = self.ue.queue[0], self.ue.queue[1:]
            self.send_request(head)

    def complete(self, sid: int) -> None:
        cls = RrcComplete if self.env.approach is Approach.C else PathComplete
        self.emit(cls, sid=sid)


def ue_request(ue: UeNode, event: StartSession, now_us: int, env: NodeEnv) -> Transition:
    u = _UeStep(ue, now_us, env)
    item = Outstanding(event.ref, event.request, event.pdus)
    if u.ue.outstanding is None:
        u.send_request(item)
    else:
        u.ue.queue = u.ue.queue + (item,)
    u.tr.before, u.tr.after = UeState.DETACHED.value, UeState.REQUESTED.value
    return u.tr


def _ue_response(u: _UeStep, msg: RrcSessionResponse | MeshAuthResponse) -> None:
    ue = u.ue
    if msg.sid in ue.sessions:
        u.tr.effects.append(Duplicate(msg.TAG))
        state = ue.sessions[msg.sid].state.value
        u.tr.before = u.tr.after = state
        return
    if ue.outstanding is None:
        u.violate(msg, UeState.DETACHED.value, "response without a pending request")
        return
    item = ue.outstanding
    if msg.reason is not Reason.OK:
        u.tr.effects.append(RequestFailed(ue.id, item.ref, msg.reason))
        u.tr.before, u.tr.after = UeState.REQUESTED.value, UeState.DETACHED.value
    else:
        ue.sessions[msg.sid] = UeSession(msg.sid, UeState.CONFIGURED, item.request.destination_id)
        u.tr.effects.append(UeBound(ue.id, item.ref, msg.sid))
        u.tr.before, u.tr.after = UeState.REQUESTED.value, UeState.CONFIGURED.value
    u.pump()


def _ue_config(u: _UeStep, msg: PathConfiguration | RrcSessionConfig) -> None:
    ue, path = u.ue, msg.path
    topo = u.env.topology
    if any(h not in topo.nodes for h in path) or ue.id not in (path[0], path[-1]):
        u.violate(msg, UeState.DETACHED.value, "path does not describe a session of this UE")
        return
    current = ue.sessions.get(msg.sid)
    initiator = path[0] == ue.id
    peer = path[-1] if initiator else path[0]
    if current is not None:
        if current.peer_ue != peer:
            u.violate(msg, current.state.value, "configuration names a different peer")
            return
        before = current.state.value
        if current.state is UeState.ACTIVE:
            u.tr.effects.append(Duplicate(msg.TAG))
        else:
            u.tr.effects.append(UeActive(ue.id, msg.sid))
        ue.sessions[msg.sid] = UeSession(msg.sid, UeState.ACTIVE, peer, path, msg.bearer_id)
        u.complete(msg.sid)
        u.tr.before, u.tr.after = before, UeState.ACTIVE.value
        return
    if initiator:
        # only C configures the initiator without a prior session response
        item = ue.outstanding
        if u.env.approach is not Approach.C:
            u.violate(msg, UeState.REQUESTED.value if item else UeState.DETACHED.value,
                      "configuration before the session response")
            return
        if item is None or item.request.destination_id != peer:
            u.violate(msg, UeState.DETACHED.value, "configuration without a pending request")
            return
        u.tr.effects.append(UeBound(ue.id, item.ref, msg.sid))
        before = UeState.REQUESTED.value
    else:
        before = UeState.DETACHED.value
    ue.sessions[msg.sid] = UeSession(msg.sid, UeState.ACTIVE, peer, path, msg.bearer_id)
    u.tr.effects.append(UeActive(ue.id, msg.sid))
    u.complete(msg.sid)
    if initiator:
        u.pump()
    u.tr.before, u.tr.after = before, UeState.ACTIVE.value


def _ue_release(u: _UeStep, msg: SessionRelease) -> None:
    ue = u.ue
    current = ue.sessions.pop(msg.sid, None)
    if current is not None:
        u.tr.effects.append(UeDetached(ue.id, msg.sid, msg.reason))
        u.tr.before, u.tr.after = current.state.value, UeState.DETACHED.value
    elif ue.outstanding is not None and msg.origin == ue.serving:
        u.tr.effects.append(RequestFailed(ue.id, ue.outstanding.ref, msg.reason))
        u.tr.before, u.tr.after = UeState.REQUESTED.value, UeState.DETACHED.value
        u.pump()
    else:
        u.tr.effects.append(Duplicate(msg.TAG))
        u.tr.before = u.tr.after = UeState.DETACHED.value


def ue_handle_message(ue: UeNode, msg: Message, now_us: int, env: NodeEnv) -> Transition:
    u = _UeStep(ue, now_us, env)
    if msg.src != ue.serving:
        u.violate(msg, "-", "message from a gNB other than the serving one")
    elif isinstance(msg, (RrcSessionResponse, MeshAuthResponse)) and (
            isinstance(msg, MeshAuthResponse) == (env.approach is Approach.A)):
        _ue_response(u, msg)
    elif isinstance(msg, PathConfiguration) and env.approach is not Approach.C:
        _ue_config(u, msg)
    elif isinstance(msg, RrcSessionConfig) and env.approach is Approach.C:
        _ue_config(u, msg)
    elif isinstance(msg, SessionRelease):
        _ue_release(u, msg)
    else:
        u.violate(msg, "-", f"{msg.name} is not expected at a UE")
    return u.tr


def step(node: NodeState, event: object, now_us: int, env: NodeEnv) -> Transition:
    """Dispatch any input kind: a message, a timer id or a local event."""
    if isinstance(event, Message):
        return handle_message(node, event, now_us, env)
    if isinstance(event, int):
        return handle_timer(node, event, now_us, env)
    return handle_local(node, event, now_us, env)


__all__ = [
    "StartSession", "ReleaseCommand", "LinkStatus", "NodeStatus", "handle_message", "handle_timer",
    "handle_local", "ue_request", "ue_handle_message", "step",
]

"""Approach B: peer-to-peer RRC session setup between gNBs over Uu."""

from __future__ import annotations

from ..messages import (
    GnbNotification, GnbNotificationResponse, Message, PathComplete, PathConfiguration, Reason,
    RrcSessionRequest, RrcSessionResponse,
)
from .common import Step
from .state import Duplicate, SessionCtx, SessionUp, SourceB, TargetB, show


def on_request(s: Step, msg: RrcSessionRequest) -> None:
    ue, req = msg.src, msg.request
    if not s.attached(ue) or req.user_id != ue:
        s.violate(msg, None, "Idle", "request from a UE not served here")
        return
    vetted = s.vet_source(ue, req)
    if isinstance(vetted, Reason) or s.node.ledger.available < 1:
        reason = vetted if isinstance(vetted, Reason) else Reason.NO_RESOURCES
        s.emit(RrcSessionResponse, ue, sid=0, reason=reason)
        s.label("Idle", show(SourceB.FAILED, reason))
        return
    peer_gnb, path, links = vetted
    sid = s.alloc_sid(ue)
    ctx = SessionCtx((s.me, sid), "source", SourceB.RESOURCE_CHECKED, ue, req.destination_id,
                     peer_gnb, req, pdus=msg.pdus, path=path, links=links, bearer_id=s.bearer(sid))
    ctx = s.charge(s.put(ctx), 1)
    s.emit(RrcSessionResponse, ue, sid=sid)
    s.emit(GnbNotification, peer_gnb, sid=sid, request=req)
    ctx = s.arm(s.set_state(ctx, SourceB.AWAIT_TARGET_RESPONSE), peer_gnb)
    s.label("Idle", ctx.label())


def _answer(s: Step, ctx: SessionCtx) -> None:
    if ctx.failed:
        s.emit(GnbNotificationResponse, ctx.peer_gnb, sid=ctx.sid, accept=False,
               reason=ctx.reason or Reason.TARGET_REJECTED)
    else:
        s.emit(GnbNotificationResponse, ctx.peer_gnb, sid=ctx.sid, accept=True)


def on_notification(s: Step, msg: GnbNotification) -> None:
    key = (msg.src, msg.sid)
    ctx = s.node.sessions.get(key)
    if ctx is not None:
        _answer(s, ctx)
        s.effect(Duplicate(msg.TAG))
        s.label(ctx.label(), ctx.label())
        return
    req = msg.request
    ctx = SessionCtx(key, "target", TargetB.EVALUATING, req.destination_id, req.user_id, msg.src,
                     req, bearer_id=s.bearer(msg.sid))
    vetted = s.vet_target(msg.src, msg.sid, req)
    if not isinstance(vetted, Reason) and s.node.ledger.available < 1:
        vetted = Reason.NO_RESOURCES
    if isinstance(vetted, Reason):
        ctx = s.set_state(ctx, TargetB.FAILED, reason=vetted)
        _answer(s, ctx)
        s.label("Idle", ctx.label())
        return
    path, links = vetted
    ctx = s.charge(s.put(ctx), 1)
    ctx = s.set_state(ctx, TargetB.CONFIGURED, path=path, links=links)
    s.install(ctx)
    _answer(s, ctx)
    s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
    ctx = s.arm(ctx, ctx.local_ue)
    s.label("Idle", ctx.label())


def on_notification_response(s: Step, msg: GnbNotificationResponse) -> None:
    ctx = s.node.sessions.get((s.me, msg.sid))
    if ctx is None or ctx.role != "source" or ctx.peer_gnb != msg.src:
        s.violate(msg, None, "Idle", "response for an unknown session")
        return
    before = ctx.label()
    if ctx.state is SourceB.AWAIT_TARGET_RESPONSE:
        if not msg.accept:
            ctx = s.fail(ctx, Reason.TARGET_REJECTED)
        elif ctx.path is None:
            ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
        else:
            ctx = s.set_state(ctx, SourceB.PATH_SETUP, retries=0)
            s.install(ctx)
            ctx = s.set_state(ctx, SourceB.AWAIT_COMPLETE)
            s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
            ctx = s.arm(ctx, ctx.local_ue)
        s.label(before, ctx.label())
    elif ctx.state in (SourceB.AWAIT_COMPLETE, SourceB.ACTIVE) and msg.accept:
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
    if ctx.state in (SourceB.AWAIT_COMPLETE, TargetB.CONFIGURED):
        ctx = s.cancel(ctx)
        ctx = s.set_state(ctx, type(ctx.state).ACTIVE, retries=0)
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
    elif ctx.state is SourceB.AWAIT_TARGET_RESPONSE:
        s.emit(GnbNotification, ctx.peer_gnb, sid=ctx.sid, request=ctx.request)
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.peer_gnb)
    elif ctx.path is None:
        ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
    else:
        s.emit(PathConfiguration, ctx.local_ue, **s.config_fields(ctx))
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.local_ue)
    s.label(before, ctx.label())


HANDLERS: dict[type[Message], object] = {
    RrcSessionRequest: on_request,
    GnbNotification: on_notification,
    GnbNotificationResponse: on_notification_response,
    PathComplete: on_complete,
}

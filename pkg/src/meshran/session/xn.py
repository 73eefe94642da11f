"""Approach C: peer-to-peer session setup over the Xn interface (XnAP)."""

from __future__ import annotations

from dataclasses import replace

from ..messages import (
    Message, PduSession, Reason, RrcComplete, RrcSessionConfig, RrcSessionRequest, SessionRelease,
    XnConnectionAck, XnConnectionRequest, XnSetupRequest, XnSetupResponse,
)
from .ledger import admission_control
from .common import Step
from .state import (
    Duplicate, GnbC, LedgerChange, SessionCtx, SessionUp, TimerArm, TimerCancel, XnAssoc, show,
)


def _assoc(s: Step, peer: int) -> XnAssoc:
    return s.node.xn.get(peer) or XnAssoc(peer)


def _put_assoc(s: Step, assoc: XnAssoc) -> XnAssoc:
    s.node.xn[assoc.peer] = assoc
    return assoc


def _arm_assoc(s: Step, assoc: XnAssoc) -> XnAssoc:
    if assoc.timer is not None:
        s.effect(TimerCancel(assoc.timer))
    timer_id = s.node.next_timer
    s.node.next_timer += 1
    s.effect(TimerArm(timer_id, s.now + s.rto(assoc.peer)))
    return _put_assoc(s, replace(assoc, timer=timer_id))


def _connect(s: Step, ctx: SessionCtx) -> SessionCtx:
    s.emit(XnConnectionRequest, ctx.peer_gnb, sid=ctx.sid, request=ctx.request, pdus=ctx.pdus)
    return s.arm(s.set_state(ctx, GnbC.AWAIT_ACK), ctx.peer_gnb)


def on_request(s: Step, msg: RrcSessionRequest) -> None:
    ue, req = msg.src, msg.request
    if not s.attached(ue) or req.user_id != ue:
        s.violate(msg, None, "XnIdle", "request from a UE not served here")
        return
    pdus = msg.pdus or (PduSession(1, req.qos),)
    vetted = s.vet_source(ue, req)
    sid = s.alloc_sid(ue)
    if not isinstance(vetted, Reason) and s.node.ledger.available < 1:
        vetted = Reason.NO_RESOURCES
    if isinstance(vetted, Reason):
        s.emit(SessionRelease, ue, sid=sid, origin=s.me, reason=vetted)
        s.label("XnIdle", show(GnbC.FAILED, vetted))
        return
    peer_gnb, path, links = vetted
    plist, ledger = admission_control(s.node.ledger, pdus)
    s.node.ledger = ledger
    kept = tuple(p for p in pdus if p.pdu_id in plist.admitted)
    ctx = s.put(SessionCtx((s.me, sid), "source", GnbC.XN_IDLE, ue, req.destination_id, peer_gnb,
                           req, pdus=kept, not_admitted=plist.not_admitted, reserved=len(kept),
                           path=path, links=links, bearer_id=s.bearer(sid)))
    s.effect(LedgerChange(s.me, len(kept), ctx.key))
    assoc = _assoc(s, peer_gnb)
    if assoc.state is GnbC.ACTIVE:
        ctx = _connect(s, ctx)
    elif assoc.state is GnbC.XN_SETUP:
        _put_assoc(s, replace(assoc, waiting=assoc.waiting + (ctx.key,)))
        ctx = s.set_state(ctx, GnbC.XN_SETUP)
    elif assoc.state is GnbC.XN_IDLE:
        txn = s.node.next_txn
        s.node.next_txn = txn % 0xFFFF + 1
        s.emit(XnSetupRequest, peer_gnb, transaction_id=txn)
        assoc = _put_assoc(s, replace(assoc, state=GnbC.XN_SETUP, txn=txn, retries=0,
                                      waiting=(ctx.key,)))
        _arm_assoc(s, assoc)
        ctx = s.set_state(ctx, GnbC.XN_SETUP)
    else:
        ctx = s.fail(ctx, Reason.NO_ROUTE)
    s.label("XnIdle", ctx.label())


def on_setup_request(s: Step, msg: XnSetupRequest) -> None:
    assoc = _assoc(s, msg.src)
    before = assoc.state.value
    txn = msg.transaction_id
    if assoc.state is GnbC.XN_IDLE:
        assoc = _put_assoc(s, replace(assoc, state=GnbC.ACTIVE, answered=assoc.answered | {txn}))
        s.emit(XnSetupResponse, msg.src, transaction_id=txn)
    elif assoc.state is GnbC.XN_SETUP:
        # simultaneous open: answer, and wait for the answer to our own request
        assoc = _put_assoc(s, replace(assoc, answered=assoc.answered | {txn}))
        s.emit(XnSetupResponse, msg.src, transaction_id=txn)
    elif assoc.state is GnbC.ACTIVE and txn in assoc.answered:
        s.emit(XnSetupResponse, msg.src, transaction_id=txn)
        s.effect(Duplicate(msg.TAG))
    else:
        _assoc_violation(s, msg, assoc, "unexpected setup on an established association")
        return
    s.label(before, assoc.state.value)


def _assoc_violation(s: Step, msg: Message, assoc: XnAssoc, detail: str) -> None:
    before = assoc.state.value
    if assoc.timer is not None:
        s.effect(TimerCancel(assoc.timer))
    waiting = assoc.waiting
    _put_assoc(s, replace(assoc, state=GnbC.FAILED, timer=None, waiting=()))
    s.violate(msg, None, before, detail)
    for key in waiting:
        ctx = s.node.sessions.get(key)
        if ctx is not None and not ctx.failed:
            s.fail(ctx, Reason.PROTOCOL_VIOLATION, notify_ue=False)
    s.label(before, GnbC.FAILED.value)


def on_setup_response(s: Step, msg: XnSetupResponse) -> None:
    assoc = _assoc(s, msg.src)
    before = assoc.state.value
    if assoc.state is GnbC.XN_SETUP and msg.transaction_id == assoc.txn:
        if assoc.timer is not None:
            s.effect(TimerCancel(assoc.timer))
        waiting = assoc.waiting
        assoc = _put_assoc(s, replace(assoc, state=GnbC.ACTIVE, timer=None, retries=0, waiting=()))
        for key in waiting:
            ctx = s.node.sessions.get(key)
            if ctx is not None and ctx.state is GnbC.XN_SETUP:
                _connect(s, ctx)
        s.label(before, assoc.state.value)
    elif assoc.state is GnbC.ACTIVE and msg.transaction_id == assoc.txn:
        s.effect(Duplicate(msg.TAG))
        s.label(before, before)
    else:
        _assoc_violation(s, msg, assoc, "setup response without a matching request")


def _ack(s: Step, ctx: SessionCtx) -> None:
    admitted = () if ctx.failed else tuple(
        p.pdu_id for p in ctx.pdus if p.pdu_id not in ctx.not_admitted)
    rejected = tuple(p.pdu_id for p in ctx.pdus if p.pdu_id not in admitted)
    s.emit(XnConnectionAck, ctx.peer_gnb, sid=ctx.sid, requested=ctx.pdus, admitted=admitted,
           not_admitted=rejected)


def on_connection_request(s: Step, msg: XnConnectionRequest) -> None:
    key = (msg.src, msg.sid)
    ctx = s.node.sessions.get(key)
    if ctx is not None:
        _ack(s, ctx)
        s.effect(Duplicate(msg.TAG))
        s.label(ctx.label(), ctx.label())
        return
    assoc = _assoc(s, msg.src)
    if assoc.state not in (GnbC.ACTIVE, GnbC.XN_SETUP):
        s.violate(msg, None, assoc.state.value, "no Xn association with the sender")
        return
    req = msg.request
    ctx = SessionCtx(key, "target", GnbC.XN_IDLE, req.destination_id, req.user_id, msg.src, req,
                     pdus=msg.pdus, bearer_id=s.bearer(msg.sid))
    vetted = s.vet_target(msg.src, msg.sid, req)
    if isinstance(vetted, Reason):
        ctx = s.set_state(ctx, GnbC.FAILED, reason=vetted)
        _ack(s, ctx)
        s.label("XnIdle", ctx.label())
        return
    path, links = vetted
    plist, ledger = admission_control(s.node.ledger, msg.pdus)
    if not plist.admitted:
        ctx = s.set_state(ctx, GnbC.FAILED, reason=Reason.NO_RESOURCES)
        _ack(s, ctx)
        s.label("XnIdle", ctx.label())
        return
    s.node.ledger = ledger
    ctx = s.set_state(ctx, GnbC.CONFIGURED, not_admitted=plist.not_admitted,
                      reserved=len(plist.admitted), path=path, links=links)
    s.effect(LedgerChange(s.me, ctx.reserved, ctx.key))
    s.install(ctx)
    _ack(s, ctx)
    s.emit(RrcSessionConfig, ctx.local_ue, **s.config_fields(ctx))
    ctx = s.arm(ctx, ctx.local_ue)
    s.label("XnIdle", ctx.label())


def on_connection_ack(s: Step, msg: XnConnectionAck) -> None:
    ctx = s.node.sessions.get((s.me, msg.sid))
    if ctx is None or ctx.role != "source" or ctx.peer_gnb != msg.src:
        s.violate(msg, None, "XnIdle", "ack for an unknown session")
        return
    before = ctx.label()
    if ctx.state is GnbC.AWAIT_ACK and msg.requested == ctx.pdus:
        if not msg.admitted:
            ctx = s.fail(ctx, Reason.TARGET_REJECTED)
        elif ctx.path is None:
            ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
        else:
            kept = tuple(p for p in ctx.pdus if p.pdu_id in msg.admitted)
            ctx = s.refund(ctx, ctx.reserved - len(kept))
            ctx = s.set_state(ctx, GnbC.CONFIGURED, pdus=kept,
                              not_admitted=ctx.not_admitted + msg.not_admitted, retries=0)
            s.install(ctx)
            s.emit(RrcSessionConfig, ctx.local_ue, **s.config_fields(ctx))
            ctx = s.arm(ctx, ctx.local_ue)
        s.label(before, ctx.label())
    elif ctx.state in (GnbC.CONFIGURED, GnbC.ACTIVE) and msg.admitted:
        s.effect(Duplicate(msg.TAG))
        s.label(before, before)
    else:
        s.violate(msg, ctx, before)


def on_complete(s: Step, msg: RrcComplete) -> None:
    ctx = s.node.find(msg.sid, msg.src)
    if ctx is None:
        s.violate(msg, None, "XnIdle", "completion for an unknown session")
        return
    before = ctx.label()
    if ctx.state is GnbC.CONFIGURED:
        ctx = s.cancel(ctx)
        ctx = s.set_state(ctx, GnbC.ACTIVE, retries=0)
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
        ctx = s.fail(ctx, Reason.TIMEOUT, notify_peer=ctx.state is not GnbC.XN_SETUP)
    elif ctx.state is GnbC.AWAIT_ACK:
        s.emit(XnConnectionRequest, ctx.peer_gnb, sid=ctx.sid, request=ctx.request, pdus=ctx.pdus)
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.peer_gnb)
    elif ctx.path is None:
        ctx = s.fail(ctx, Reason.NO_ROUTE, notify_peer=True)
    else:
        s.emit(RrcSessionConfig, ctx.local_ue, **s.config_fields(ctx))
        ctx = s.arm(s.set_state(ctx, ctx.state, retries=1), ctx.local_ue)
    s.label(before, ctx.label())


def on_assoc_timeout(s: Step, assoc: XnAssoc) -> None:
    before = assoc.state.value
    if assoc.state is not GnbC.XN_SETUP:
        return
    if assoc.retries < 1:
        s.emit(XnSetupRequest, assoc.peer, transaction_id=assoc.txn)
        _arm_assoc(s, replace(assoc, retries=1))
        s.label(before, before)
        return
    _put_assoc(s, replace(assoc, state=GnbC.XN_IDLE, timer=None, retries=0, waiting=()))
    for key in assoc.waiting:
        ctx = s.node.sessions.get(key)
        if ctx is not None and not ctx.failed:
            s.fail(ctx, Reason.TIMEOUT)
    s.label(before, GnbC.XN_IDLE.value)


HANDLERS: dict[type[Message], object] = {
    RrcSessionRequest: on_request,
    XnSetupRequest: on_setup_request,
    XnSetupResponse: on_setup_response,
    XnConnectionRequest: on_connection_request,
    XnConnectionAck: on_connection_ack,
    RrcComplete: on_complete,
}

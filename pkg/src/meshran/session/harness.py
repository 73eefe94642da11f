"""Drive the session state machines without a network model.

Messages are delivered one at a time: a random generator picks which
node-to-node channel delivers next, and each channel stays FIFO like a real
link. Every interleaving of concurrent exchanges is reachable this way.
Timers only fire once no message is in flight.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..messages import Message, PduSession, QosProfile, SessionRequest, decode, encode
from ..topology import NodeKind, Topology
from .fsm import StartSession, handle_local, handle_message, handle_timer
from .state import (
    Approach, GnbNode, LedgerChange, NodeEnv, NodeState, ProtocolViolation, TimerArm, TimerCancel, Transition,
    UeNode, UeState, initial_state,
)


@dataclass
class HarnessRun:
    nodes: dict[int, NodeState]
    transitions: list[Transition] = field(default_factory=list)
    violations: list[ProtocolViolation] = field(default_factory=list)
    delivered: int = 0
    ledger_errors: list[str] = field(default_factory=list)
    admitted: int = 0
    released: int = 0

    def ue_active(self, ue: int, peer: int) -> bool:
        node = self.nodes[ue]
        assert isinstance(node, UeNode)
        return any(s.state is UeState.ACTIVE and s.peer_ue == peer for s in node.sessions.values())


def run_interleaved(topology: Topology, approach: Approach, pairs: list[tuple[int, int]],
                    rng: random.Random, *, env: NodeEnv | None = None,
                    pdus: tuple[PduSession, ...] = (), max_steps: int = 10_000) -> HarnessRun:
    """Start one session per (ue, peer) pair and deliver until quiescent."""
    env = env or NodeEnv(topology, approach)
    run = HarnessRun({n: initial_state(topology, n) for n in topology.nodes})
    channels: dict[tuple[int, int], list[Message]] = {}
    timers: dict[tuple[int, int], int] = {}

    def apply(tr: Transition, node_id: int) -> None:
        run.nodes[node_id] = tr.node
        run.transitions.append(tr)
        if tr.violation is not None:
            run.violations.append(tr.violation)
        for eff in tr.effects:
            if isinstance(eff, LedgerChange):
                if eff.delta > 0:
                    run.admitted += eff.delta
                else:
                    run.released -= eff.delta
            if isinstance(eff, TimerArm):
                timers[(node_id, eff.timer_id)] = eff.at_us
            elif isinstance(eff, TimerCancel):
                timers.pop((node_id, eff.timer_id), None)
        _check_ledgers(run)
        # round-trip every frame through the codec, as the simulator does
        for m in tr.out:
            channels.setdefault((m.src, m.dst), []).append(decode(encode(m)))

    for ref, (ue, peer) in enumerate(pairs, 1):
        req = SessionRequest(ue, peer, QosProfile(5_000, 5), 15)
        apply(handle_local(run.nodes[ue], StartSession(ref, req, pdus), 0, env), ue)

    now = 0
    for _ in range(max_steps):
        busy = sorted(k for k, q in channels.items() if q)
        if busy:
            msg = channels[busy[rng.randrange(len(busy))]].pop(0)
            now += 1
            run.delivered += 1
            apply(handle_message(run.nodes[msg.dst], msg, now, env), msg.dst)
        elif timers:
            (node_id, timer_id), at = min(timers.items(), key=lambda kv: (kv[1], kv[0]))
            del timers[(node_id, timer_id)]
            now = max(now, at)
            apply(handle_timer(run.nodes[node_id], timer_id, now, env), node_id)
        else:
            break
    return run


def ue_pairs(topology: Topology) -> list[tuple[int, int]]:
    """Every ordered UE pair served by different gNBs."""
    ues = sorted(topology.of_kind(NodeKind.UE))
    return [(a, b) for a in ues for b in ues
            if a != b and topology.serving_gnb(a) != topology.serving_gnb(b)]


def _check_ledgers(run: HarnessRun) -> None:
    total = 0
    for node in run.nodes.values():
        if not isinstance(node, GnbNode):
            continue
        held = sum(ctx.reserved for ctx in node.sessions.values())
        if held != node.ledger.allocated:
            run.ledger_errors.append(f"gNB {node.id}: ledger {node.ledger.allocated} != held {held}")
        total += node.ledger.allocated
    if total != run.admitted - run.released:
        run.ledger_errors.append(f"sum allocated {total} != admitted {run.admitted} - released "
                                 f"{run.released}")


def audit(run: HarnessRun) -> list[str]:
    """Cross-check the final state: every session Active at its source has an
    Active twin at the target, mapping rows point at each other and both UEs
    hold the session Active."""
    problems = list(run.ledger_errors)
    problems += [str(v) for v in run.violations]
    for node in run.nodes.values():
        if not isinstance(node, GnbNode):
            continue
        for key, ctx in node.sessions.items():
            if ctx.role != "source" or not ctx.active:
                continue
            peer = run.nodes[ctx.peer_gnb]
            assert isinstance(peer, GnbNode)
            twin = peer.sessions.get(key)
            if twin is None or not twin.active:
                problems.append(f"session {key}: target not Active")
                continue
            mine = node.mapping.get(ctx.mapping_key)
            theirs = peer.mapping.get(twin.mapping_key)
            if mine is None or theirs is None or mine.peer_gnb != peer.id or theirs.peer_gnb != node.id:
                problems.append(f"session {key}: mapping tables do not cross-reference")
            for ue, other in ((ctx.local_ue, ctx.peer_ue), (ctx.peer_ue, ctx.local_ue)):
                ue_state = run.nodes[ue]
                assert isinstance(ue_state, UeNode)
                got = ue_state.sessions.get(ctx.sid)
                if got is None or got.state is not UeState.ACTIVE or got.peer_ue != other:
                    problems.append(f"session {key}: UE {ue} not Active")
    return problems

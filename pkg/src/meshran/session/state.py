"""State values for the per-node session state machines.

Node states are plain dataclasses that the transition functions copy before
touching, so a transition never mutates its input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Union

from ..messages import Message, PduSession, Reason, SessionRequest
from ..topology import LinkKey, LinkKind, NodeKind, Topology
from .ledger import ResourceLedger
from .mapping import MappingKey, MappingTable, MappingTableEntry


class Approach(str, enum.Enum):
    A = "A"  # mesh layer with core functions inside RAN nodes
    B = "B"  # P2P RRC-based connection over Uu
    C = "C"  # P2P XnAP-based connection

    @property
    def interface(self) -> LinkKind:
        return LinkKind.UU if self is Approach.B else LinkKind.XN


class SourceB(str, enum.Enum):
    IDLE = "Idle"
    RESOURCE_CHECKED = "ResourceChecked"
    AWAIT_TARGET_RESPONSE = "AwaitTargetResponse"
    PATH_SETUP = "PathSetup"
    AWAIT_COMPLETE = "AwaitComplete"
    ACTIVE = "Active"
    FAILED = "Failed"


class TargetB(str, enum.Enum):
    IDLE = "Idle"
    EVALUATING = "Evaluating"
    CONFIGURED = "Configured"
    ACTIVE = "Active"
    FAILED = "Failed"


class GnbC(str, enum.Enum):
    XN_IDLE = "XnIdle"
    XN_SETUP = "XnSetup"
    AWAIT_ACK = "AwaitAck"
    CONFIGURED = "Configured"
    ACTIVE = "Active"
    FAILED = "Failed"


class GnbA(str, enum.Enum):
    IDLE = "Idle"
    AUTHENTICATED = "Authenticated"
    SCHEDULED = "Scheduled"
    ACTIVE = "Active"
    FAILED = "Failed"


class UeState(str, enum.Enum):
    DETACHED = "Detached"
    REQUESTED = "Requested"
    CONFIGURED = "Configured"
    ACTIVE = "Active"


FsmState = Union[SourceB, TargetB, GnbC, GnbA, UeState]
SessionKey = tuple[int, int]  # (allocating gNB, session id)


def show(state: FsmState | None, reason: Reason | None = None) -> str:
    if state is None:
        return "-"
    if state.value == "Failed" and reason is not None:
        return f"Failed({reason.name.title().replace('_', '')})"
    return state.value


class ProtocolViolation(Exception):
    def __init__(self, state: str, tag: int, detail: str = ""):
        super().__init__(f"message 0x{tag:02x} not allowed in state {state}" +
                         (f": {detail}" if detail else ""))
        self.state = state
        self.tag = tag


# -- effects ---------------------------------------------------------------------

@dataclass(frozen=True)
class TimerArm:
    timer_id: int
    at_us: int


@dataclass(frozen=True)
class TimerCancel:
    timer_id: int


@dataclass(frozen=True)
class LedgerChange:
    node: int
    delta: int
    key: SessionKey


@dataclass(frozen=True)
class MappingWrite:
    entry: MappingTableEntry


@dataclass(frozen=True)
class MappingDelete:
    key: MappingKey


@dataclass(frozen=True)
class SessionUp:
    key: SessionKey


@dataclass(frozen=True)
class SessionDown:
    key: SessionKey
    reason: Reason


@dataclass(frozen=True)
class RouteChanged:
    key: SessionKey
    path: tuple[int, ...] | None


@dataclass(frozen=True)
class UeBound:
    ue: int
    ref: int
    sid: int


@dataclass(frozen=True)
class UeActive:
    ue: int
    sid: int


@dataclass(frozen=True)
class UeDetached:
    ue: int
    sid: int
    reason: Reason


@dataclass(frozen=True)
class RequestFailed:
    ue: int
    ref: int
    reason: Reason


@dataclass(frozen=True)
class Duplicate:
    """A retransmitted message matched an already-completed step."""
    tag: int


@dataclass(frozen=True)
class Violation:
    error: ProtocolViolation


StateEffect = Union[TimerArm, TimerCancel, LedgerChange, MappingWrite, MappingDelete, SessionUp,
                    SessionDown, RouteChanged, UeBound, UeActive, UeDetached, RequestFailed,
                    Duplicate, Violation]


# -- per-session and per-node state ------------------------------------------------

@dataclass(frozen=True)
class SessionCtx:
    key: SessionKey
    role: str  # "source" or "target"
    state: FsmState
    local_ue: int
    peer_ue: int
    peer_gnb: int
    request: SessionRequest
    pdus: tuple[PduSession, ...] = ()
    not_admitted: tuple[int, ...] = ()
    reserved: int = 0
    path: tuple[int, ...] | None = None
    links: tuple[LinkKey, ...] = ()
    bearer_id: int = 0
    retries: int = 0
    timer: int | None = None
    reason: Reason | None = None

    @property
    def sid(self) -> int:
        return self.key[1]

    @property
    def mapping_key(self) -> MappingKey:
        return (self.sid, self.local_ue)

    @property
    def failed(self) -> bool:
        return self.state.value == "Failed"

    @property
    def active(self) -> bool:
        return self.state.value == "Active"

    def label(self) -> str:
        return show(self.state, self.reason)


@dataclass(frozen=True)
class XnAssoc:
    peer: int
    state: GnbC = GnbC.XN_IDLE
    txn: int = 0
    timer: int | None = None
    retries: int = 0
    answered: frozenset[int] = frozenset()
    waiting: tuple[SessionKey, ...] = ()


@dataclass
class GnbNode:
    id: int
    ledger: ResourceLedger
    mapping: MappingTable = field(default_factory=MappingTable)
    sessions: dict[SessionKey, SessionCtx] = field(default_factory=dict)
    xn: dict[int, XnAssoc] = field(default_factory=dict)
    next_sid: int = 1
    next_timer: int = 1
    next_txn: int = 1
    down_links: frozenset[LinkKey] = frozenset()
    down_nodes: frozenset[int] = frozenset()
    topo_seq: int = 0
    seen_updates: frozenset[tuple[int, int]] = frozenset()

    def clone(self) -> GnbNode:
        return replace(self, sessions=dict(self.sessions), xn=dict(self.xn))

    def active_keys(self) -> set[MappingKey]:
        return {ctx.mapping_key for ctx in self.sessions.values() if ctx.active}

    def find(self, sid: int, local_ue: int) -> SessionCtx | None:
        for ctx in self.sessions.values():
            if ctx.sid == sid and ctx.local_ue == local_ue and not ctx.failed:
                return ctx
        return None

    def key_taken(self, sid: int, ue: int) -> bool:
        return (sid, ue) in self.mapping or self.find(sid, ue) is not None


@dataclass(frozen=True)
class Outstanding:
    ref: int
    request: SessionRequest
    pdus: tuple[PduSession, ...] = ()


@dataclass(frozen=True)
class UeSession:
    sid: int
    state: UeState
    peer_ue: int = 0
    path: tuple[int, ...] = ()
    bearer_id: int = 0


@dataclass
class UeNode:
    id: int
    serving: int
    sessions: dict[int, UeSession] = field(default_factory=dict)
    outstanding: Outstanding | None = None
    queue: tuple[Outstanding, ...] = ()

    def clone(self) -> UeNode:
        return replace(self, sessions=dict(self.sessions))

    def session_to(self, peer: int) -> UeSession | None:
        """Most recent Active session toward ``peer``."""
        best = None
        for s in self.sessions.values():
            if s.state is UeState.ACTIVE and s.peer_ue == peer:
                best = s
        return best


NodeState = Union[GnbNode, UeNode]


@dataclass(frozen=True)
class NodeEnv:
    """Read-only context shared by every node of one run."""

    topology: Topology
    approach: Approach
    timeout_us: int = 10_000
    ran_processing_us: int = 50
    core_processing_us: int = 200
    allow_list: frozenset[int] | None = None
    resource_units: tuple[int, ...] = tuple(range(16))

    def processing_us(self, node: int) -> int:
        kind = self.topology.kind(node)
        if kind is NodeKind.UE:
            return 0
        return self.ran_processing_us if kind.is_ran else self.core_processing_us


@dataclass
class Transition:
    node: NodeState
    out: list[Message] = field(default_factory=list)
    effects: list[StateEffect] = field(default_factory=list)
    before: str = "-"
    after: str = "-"
    violation: ProtocolViolation | None = None


def initial_state(topology: Topology, node: int) -> NodeState:
    spec = topology.nodes[node]
    if spec.kind is NodeKind.UE:
        return UeNode(node, topology.serving_gnb(node))
    return GnbNode(node, ResourceLedger(spec.capacity_sessions))


Handler = Callable[[GnbNode, Message, int, NodeEnv, Transition], None]

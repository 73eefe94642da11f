"""Mapping table and the Data Transfer Function (DTF).

The mapping table is the per-gNB forwarding state installed during
peer-to-peer session setup. The DTF consults it for every data packet and
keeps per-session usage and QoS accounting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Container, Iterator, Mapping

from ..messages import QosProfile


class InconsistentEntry(ValueError):
    pass


class DropReason(str, enum.Enum):
    NO_MAPPING = "NoMapping"
    SESSION_NOT_ACTIVE = "SessionNotActive"
    NO_ROUTE = "NoRoute"
    NO_SESSION = "NoSession"
    LINK_LOSS = "LinkLoss"
    LINK_DOWN = "LinkDown"
    NODE_DOWN = "NodeDown"
    HORIZON = "InFlightAtHorizon"


MappingKey = tuple[int, int]  # (session_id, local_ue)


@dataclass(frozen=True)
class MappingTableEntry:
    session_id: int
    local_ue: int
    peer_gnb: int
    peer_ue: int
    bearer_id: int
    next_hop: int
    qos: QosProfile

    @property
    def key(self) -> MappingKey:
        return (self.session_id, self.local_ue)


class MappingTable(Mapping[MappingKey, MappingTableEntry]):
    """Read-only mapping; updates return a new table."""

    def __init__(self, entries: Mapping[MappingKey, MappingTableEntry] | None = None):
        self._entries = dict(entries or {})

    def __getitem__(self, key: MappingKey) -> MappingTableEntry:
        return self._entries[key]

    def __iter__(self) -> Iterator[MappingKey]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MappingTable):
            return self._entries == other._entries
        return NotImplemented

    def __repr__(self) -> str:
        return f"MappingTable({list(self._entries.values())!r})"

    def update(self, entry: MappingTableEntry) -> MappingTable:
        return mapping_table_update(self, entry)

    def remove(self, key: MappingKey) -> MappingTable:
        if key not in self._entries:
            return self
        entries = dict(self._entries)
        del entries[key]
        return MappingTable(entries)


def mapping_table_update(table: MappingTable, entry: MappingTableEntry) -> MappingTable:
    """Upsert keyed by (session_id, local_ue).

    Re-inserting an identical entry is a no-op; changing the next hop (a
    re-route) is allowed, changing who the session talks to is not.
    """
    current = table.get(entry.key)
    if current == entry:
        return table
    if current is not None and (current.peer_gnb, current.peer_ue) != (entry.peer_gnb, entry.peer_ue):
        raise InconsistentEntry(
            f"session {entry.session_id} at UE {entry.local_ue} already maps to "
            f"gNB {current.peer_gnb}/UE {current.peer_ue}")
    entries = dict(table._entries)
    entries[entry.key] = entry
    return MappingTable(entries)


@dataclass(frozen=True)
class Packet:
    session_id: int
    seq_no: int
    size_bytes: int
    created_at_us: int
    src_ue: int
    dst_ue: int

    def __post_init__(self) -> None:
        if self.size_bytes < 1:
            raise ValueError("size_bytes must be >= 1")


@dataclass(frozen=True)
class DtfAccounting:
    packets_forwarded: int = 0
    bytes_forwarded: int = 0
    qos_violations: int = 0

    def __add__(self, other: DtfAccounting) -> DtfAccounting:
        return DtfAccounting(self.packets_forwarded + other.packets_forwarded,
                             self.bytes_forwarded + other.bytes_forwarded,
                             self.qos_violations + other.qos_violations)


@dataclass(frozen=True)
class Forward:
    next_hop: int
    entry: MappingTableEntry
    delta: DtfAccounting
    toward_peer: bool


def dtf_forward(table: MappingTable, packet: Packet, now_us: int,
                active: Container[MappingKey] = ()) -> Forward | DropReason:
    """Forward one packet at a gNB.

    A packet whose source UE is local goes toward the peer gNB; one whose
    destination UE is local is handed to that UE. ``active`` holds the mapping
    keys of sessions that are Active at this gNB.
    """
    for local, toward_peer in ((packet.src_ue, True), (packet.dst_ue, False)):
        entry = table.get((packet.session_id, local))
        if entry is None:
            continue
        if entry.key not in active:
            return DropReason.SESSION_NOT_ACTIVE
        late = now_us - packet.created_at_us > entry.qos.max_latency_us
        delta = DtfAccounting(1, packet.size_bytes, int(late))
        return Forward(entry.next_hop if toward_peer else local, entry, delta, toward_peer)
    return DropReason.NO_MAPPING


def with_next_hop(entry: MappingTableEntry, next_hop: int) -> MappingTableEntry:
    return replace(entry, next_hop=next_hop)

"""Per-node resource ledger and greedy admission control."""

from __future__ import annotations

from dataclasses import dataclass

from ..messages import PduSession, PduSessionList


@dataclass(frozen=True)
class ResourceLedger:
    capacity_sessions: int
    allocated: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.allocated <= self.capacity_sessions:
            raise ValueError(f"ledger out of bounds: {self.allocated}/{self.capacity_sessions}")

    @property
    def available(self) -> int:
        return self.capacity_sessions - self.allocated

    def allocate(self, n: int = 1) -> ResourceLedger:
        return ResourceLedger(self.capacity_sessions, self.allocated + n)

    def release(self, n: int = 1) -> ResourceLedger:
        return ResourceLedger(self.capacity_sessions, self.allocated - n)


def admission_control(ledger: ResourceLedger,
                      requested: tuple[PduSession, ...] | list[PduSession]
                      ) -> tuple[PduSessionList, ResourceLedger]:
    """Admit requests in order while capacity remains.

    Returns the admitted/not-admitted partition and the ledger charged with
    one unit per admitted PDU session.
    """
    requested = tuple(requested)
    if not requested:
        raise ValueError("admission_control needs at least one request")
    room = ledger.available
    admitted = tuple(p.pdu_id for p in requested[:room])
    rejected = tuple(p.pdu_id for p in requested[room:])
    return PduSessionList(requested, admitted, rejected), ledger.allocate(len(admitted))

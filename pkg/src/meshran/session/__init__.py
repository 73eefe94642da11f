"""Per-node protocol state machines for the three session approaches."""

from __future__ import annotations

from .fsm import ReleaseCommand, StartSession, handle_local, handle_message, handle_timer, step
from .harness import HarnessRun, audit, run_interleaved, ue_pairs
from .ledger import ResourceLedger, admission_control
from .mapping import (
    DropReason, DtfAccounting, Forward, InconsistentEntry, MappingTable, MappingTableEntry, Packet,
    dtf_forward, mapping_table_update,
)
from .state import Approach, GnbNode, NodeEnv, ProtocolViolation, Transition, UeNode, initial_state

__all__ = [
    "ReleaseCommand", "StartSession", "handle_local", "handle_message", "handle_timer", "step",
    "HarnessRun", "audit", "run_interleaved", "ue_pairs", "ResourceLedger", "admission_control",
    "DropReason", "DtfAccounting", "Forward", "InconsistentEntry", "MappingTable",
    "MappingTableEntry", "Packet", "dtf_forward", "mapping_table_update", "Approach", "GnbNode",
    "NodeEnv", "ProtocolViolation", "Transition", "UeNode", "initial_state",
]

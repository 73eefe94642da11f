"""Deterministic simulator of coreless UE-to-UE session establishment in a mesh RAN."""

from __future__ import annotations

from .messages import CodecError, decode, encode, iter_frames
from .report import Cell, ComparisonReport, compare_matrix, run_scenario
from .scenario import Scenario, load_scenario, parse_scenario
from .session.state import Approach
from .sim import (
    FailLink, FailNode, InjectSession, InjectTraffic, Metrics, RecoverLink, ReleaseSession,
    SimConfig, Simulation, TraceLog, reliability_estimate, run,
)
from .topology import (
    LinkKind, NodeKind, Placement, Topology, ValidationError, Variant, build_topology, compute_path,
    k_disjoint_paths,
)

__version__ = "0.1.0"

__all__ = [
    "CodecError", "decode", "encode", "iter_frames", "Cell", "ComparisonReport", "compare_matrix",
    "run_scenario", "Scenario", "load_scenario", "parse_scenario", "Approach", "FailLink",
    "FailNode", "InjectSession", "InjectTraffic", "Metrics", "RecoverLink", "ReleaseSession",
    "SimConfig", "Simulation", "TraceLog", "reliability_estimate", "run", "LinkKind", "NodeKind",
    "Placement", "Topology", "ValidationError", "Variant", "build_topology", "compute_path",
    "k_disjoint_paths",
]

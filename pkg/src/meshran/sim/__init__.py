"""Discrete-event simulation of session setup and UE-to-UE data delivery."""

from __future__ import annotations

from .engine import (
    ConfigError, FailLink, FailNode, InjectSession, InjectTraffic, RecoverLink, ReleaseSession,
    SimConfig, Simulation, WorkloadEvent, run,
)
from .metrics import Metrics, SessionMetrics, TraceLog
from .reliability import ReliabilityEstimate, analytic_success, reliability_estimate

__all__ = [
    "ConfigError", "FailLink", "FailNode", "InjectSession", "InjectTraffic", "RecoverLink",
    "ReleaseSession", "SimConfig", "Simulation", "WorkloadEvent", "run", "Metrics",
    "SessionMetrics", "TraceLog", "ReliabilityEstimate", "analytic_success", "reliability_estimate",
]

"""Run metrics and the trace log."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..session.mapping import DtfAccounting


@dataclass
class SessionMetrics:
    label: str
    src_ue: int
    dst_ue: int
    injected_at_us: int | None = None
    establishment_us: int | None = None
    establishments: int = 0
    latencies_us: list[int] = field(default_factory=list)
    # send time of each delivered packet, parallel to latencies_us
    sent_at_us: list[int] = field(default_factory=list)
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    drop_reasons: Counter = field(default_factory=Counter)
    dtf: DtfAccounting = field(default_factory=DtfAccounting)
    failure: str | None = None

    def percentile(self, q: float) -> float | None:
        if not self.latencies_us:
            return None
        return float(np.percentile(np.asarray(self.latencies_us), q, method="linear"))

    @property
    def p50_us(self) -> float | None:
        return self.percentile(50)

    @property
    def p99_us(self) -> float | None:
        return self.percentile(99)


@dataclass
class Metrics:
    sessions: dict[str, SessionMetrics] = field(default_factory=dict)
    sig_segments: Counter = field(default_factory=Counter)  # ran / agg / core
    sig_by_type: Counter = field(default_factory=Counter)
    sig_sent: int = 0
    sig_dropped: int = 0
    sig_drop_reasons: Counter = field(default_factory=Counter)
    donor_hops: int = 0
    max_ran_hops: int = 0
    violations: int = 0
    reconvergence_us: list[int] = field(default_factory=list)
    events_processed: int = 0

    @property
    def injected(self) -> int:
        return sum(s.injected for s in self.sessions.values())

    @property
    def delivered(self) -> int:
        return sum(s.delivered for s in self.sessions.values())

    @property
    def dropped(self) -> int:
        return sum(s.dropped for s in self.sessions.values())

    @property
    def latencies_us(self) -> list[int]:
        out: list[int] = []
        for label in sorted(self.sessions):
            out.extend(self.sessions[label].latencies_us)
        return out


class TraceLog:
    """One line per processed event: ``time_us | node | before -> after | tag | path``.

    ``frames`` keeps every signalling frame as sent, in send order; written
    back to back they form a binary trace readable with ``iter_frames``.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.lines: list[str] = []
        self.frames: list[bytes] = []

    def add(self, time_us: int, node: str, before: str, after: str, tag: str,
            path: tuple[int, ...] | None) -> None:
        if self.enabled:
            route = ">".join(map(str, path)) if path else "-"
            self.lines.append(f"{time_us} | {node} | {before} -> {after} | {tag} | {route}")

    def add_frame(self, frame: bytes) -> None:
        if self.enabled:
            self.frames.append(frame)

    def frame_bytes(self) -> bytes:
        return b"".join(self.frames)

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

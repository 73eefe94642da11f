"""Experiment orchestration: run scenario cells and assemble comparison reports."""

from __future__ import annotations

import csv
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .scenario import Scenario, cell_problem
from .session.state import Approach
from .sim import ConfigError, Metrics, ReliabilityEstimate, Simulation, TraceLog, reliability_estimate
from .topology import Placement, Variant

CSV_COLUMNS = (
    "scenario", "variant", "approach", "session_id", "establishment_us", "pkt_latency_p50_us",
    "pkt_latency_p99_us", "delivered", "dropped", "sig_msgs_ran", "sig_msgs_agg", "sig_msgs_core",
)


@dataclass
class Cell:
    """One (variant, approach) run, or the reason it could not run."""

    scenario: str
    variant: Variant
    approach: Approach
    metrics: Metrics | None = None
    trace: TraceLog | None = None
    infeasible: str | None = None

    @property
    def feasible(self) -> bool:
        return self.metrics is not None

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.variant.value, self.approach.value, self.scenario)

    def percentile(self, q: float) -> float | None:
        if self.metrics is None or not self.metrics.latencies_us:
            return None
        return float(np.percentile(np.asarray(self.metrics.latencies_us), q, method="linear"))

    @property
    def p50_us(self) -> float | None:
        return self.percentile(50)

    @property
    def p99_us(self) -> float | None:
        return self.percentile(99)

    @property
    def establishment_us(self) -> float | None:
        """Median first-establishment latency over the sessions that came up."""
        if self.metrics is None:
            return None
        values = [s.establishment_us for s in self.metrics.sessions.values()
                  if s.establishment_us is not None]
        return float(statistics.median(values)) if values else None

    @property
    def delivery_ratio(self) -> float | None:
        if self.metrics is None or not self.metrics.injected:
            return None
        return self.metrics.delivered / self.metrics.injected

    @property
    def long_ran_path(self) -> bool:
        """Some data path crossed more than two RAN-to-RAN hops."""
        return self.metrics is not None and self.metrics.max_ran_hops > 2


@dataclass
class ReliabilityRow:
    scenario: str
    src: str
    dst: str
    k: int
    estimate: ReliabilityEstimate


@dataclass
class ComparisonReport:
    cells: list[Cell]
    reliability: list[ReliabilityRow] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.cells.sort(key=lambda c: c.sort_key)

    @property
    def feasible(self) -> list[Cell]:
        return [c for c in self.cells if c.feasible]

    def cell(self, variant: Variant | str, approach: Approach | str,
             scenario: str | None = None) -> Cell:
        variant, approach = Variant(variant), Approach(approach)
        for c in self.cells:
            if c.variant is variant and c.approach is approach and scenario in (None, c.scenario):
                return c
        raise KeyError((variant.value, approach.value))

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.cells:
            m = c.metrics
            if m is None:
                # infeasible cells stay visible with blank metric columns
                writer.writerow((c.scenario, c.variant.value, c.approach.value)
                                + ("",) * (len(CSV_COLUMNS) - 3))
                continue
            seg = m.sig_segments
            for label in sorted(m.sessions):
                s = m.sessions[label]
                writer.writerow((c.scenario, c.variant.value, c.approach.value, label,
                                 _num(s.establishment_us), _num(s.p50_us), _num(s.p99_us),
                                 s.delivered, s.dropped, seg["ran"], seg["agg"], seg["core"]))
        return buf.getvalue()

    def table(self) -> str:
        header = ("variant", "appr", "p50 data", "p99 data", "establishment", "sig ran/agg/core",
                  "donor hops", "delivery", "msgs", "note")
        rows = [header]
        for c in self.cells:
            if not c.feasible:
                rows.append((c.variant.value, c.approach.value, "-", "-", "-", "-", "-", "-", "-",
                             f"infeasible: {c.infeasible}"))
                continue
            m = c.metrics
            assert m is not None
            seg = m.sig_segments
            ratio = c.delivery_ratio
            notes = []
            if c.long_ran_path:
                notes.append(f">2 RAN hops ({m.max_ran_hops})")
            if m.violations:
                notes.append(f"{m.violations} protocol violations")
            if m.reconvergence_us:
                notes.append("reconvergence " + ",".join(_us(v) for v in m.reconvergence_us))
            rows.append((c.variant.value, c.approach.value, _us(c.p50_us), _us(c.p99_us),
                         _us(c.establishment_us), f"{seg['ran']}/{seg['agg']}/{seg['core']}",
                         str(m.donor_hops),
                         "-" if ratio is None else f"{m.delivered}/{m.injected} ({ratio:.3f})",
                         str(m.sig_sent), "; ".join(notes)))
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        out = "\n".join(lines) + "\n"
        if self.reliability:
            out += "\n" + self.reliability_table()
        return out

    def reliability_table(self) -> str:
        lines = ["reliability (k link-disjoint paths)",
                 "scenario | src | dst | k | paths | analytic | monte carlo | sigma | z"]
        for r in self.reliability:
            e = r.estimate
            lines.append(f"{r.scenario} | {r.src} | {r.dst} | {r.k} | {len(e.paths)} | "
                         f"{e.analytic:.6f} | {e.monte_carlo:.6f} | {e.sigma:.2e} | {e.z:.2f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | FsPath, *, traces: bool = False) -> list[FsPath]:
        """Write metrics.csv, report.txt and, when asked, per-cell traces."""
        out = FsPath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "metrics.csv", out / "report.txt"]
        written[0].write_text(self.csv_text())
        written[1].write_text(self.table())
        if traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for c in self.feasible:
                if c.trace is None or not c.trace.enabled:
                    continue
                stem = f"{c.scenario}_{c.variant.value}_{c.approach.value}"
                (tdir / f"{stem}.log").write_text(c.trace.text())
                (tdir / f"{stem}.frames").write_bytes(c.trace.frame_bytes())
                written += [tdir / f"{stem}.log", tdir / f"{stem}.frames"]
        return written


def _num(v: float | int | None) -> str:
    if v is None:
        return ""
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.3f}"


def _us(v: float | int | None) -> str:
    if v is None:
        return "-"
    return f"{_num(v)} us ({v / 1000:.3f} ms)"


# -- running ---------------------------------------------------------------------------

def run_cell(scenario: Scenario, variant: Variant, approach: Approach,
             trace: bool | None = None) -> Cell:
    cell = Cell(scenario.name, variant, approach)
    problem = cell_problem(scenario, variant, approach)
    if problem is not None:
        cell.infeasible = problem
        return cell
    topology = scenario.topology.with_placement(Placement.of(variant))
    try:
        sim = Simulation(topology, approach, scenario.workload, scenario.seed,
                         scenario.horizon_us, scenario.sim_config(trace))
    except ConfigError as exc:
        cell.infeasible = f"configuration: {exc}"
        return cell
    cell.metrics, cell.trace = sim.run()
    return cell


def _run_cell_args(args: tuple) -> Cell:
    return run_cell(*args)


def compare_matrix(scenarios: list[Scenario] | Scenario, *, jobs: int = 1,
                   trace: bool | None = None) -> ComparisonReport:
    """Run every (variant, approach) cell of every scenario with its common seed.

    Cells run in worker processes when ``jobs > 1``; results are collected in
    submission order, so the report does not depend on scheduling.
    """
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    work = [(s, v, a, trace) for s in scenarios for v, a in s.cells()]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_args, work))
    else:
        cells = [_run_cell_args(w) for w in work]
    rows = []
    for s in scenarios:
        for q in s.reliability:
            est = reliability_estimate(s.topology, q.src, q.dst, q.k, trials=q.trials, seed=s.seed)
            rows.append(ReliabilityRow(s.name, s.topology.nodes[q.src].label,
                                       s.topology.nodes[q.dst].label, q.k, est))
    return ComparisonReport(cells, rows)


def run_scenario(scenario: Scenario, *, out_dir: str | FsPath | None = None, jobs: int = 1,
                 trace: bool | None = None) -> ComparisonReport:
    """Run one scenario and, when an output directory is known, write its artifacts."""
    report = compare_matrix([scenario], jobs=jobs, trace=trace)
    target = out_dir if out_dir is not None else scenario.out_dir
    if target is not None:
        report.write(target, traces=scenario.trace if trace is None else trace)
    return report

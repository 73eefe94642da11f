"""Scenario files: parsing, defaults and feasibility checks.

A scenario is a YAML document with these top-level sections::

    scenario:     name, seed, horizon_us, approach | approaches, variants
    calibration:  uu_us, xn_us, gnb_agg_us, agg_core_us,
                  ran_processing_us, core_processing_us, timeout_us
    topology:     placement, nodes, links
    sessions:     [{label, src, dst, at_us, max_latency_us, reliability_exp,
                    service_type, channel_quality, pdus}]
    traffic:      [{session, start_us, rate_pps, count, size_bytes, reverse}]
    failures:     [{at_us, link: [a, b, kind]} | {at_us, node: n}
                   | {at_us, recover: [a, b, kind]}]
    releases:     [{at_us, session}]
    mesh:         {allow_list: [...]}
    reliability:  [{src, dst, k, trials}]
    output:       {dir, trace}

Nodes are referenced by name or numeric id. A link without ``latency_us``
takes the calibration default for its class.
"""

from __future__ import annotations

import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

import yaml

from .messages import InvariantError, PduSession, QosProfile, ServiceType
from .session.state import Approach
from .sim import (
    FailLink, FailNode, InjectSession, InjectTraffic, RecoverLink, ReleaseSession, SimConfig,
    WorkloadEvent,
)
from .topology import LinkKind, NodeKind, Placement, Topology, ValidationError, Variant, build_topology

BUNDLED_DIR = FsPath(__file__).with_name("scenarios")
SEED_ENV = "MESHRAN_SEED"


@dataclass(frozen=True)
class Calibration:
    uu_us: int = 300
    xn_us: int = 200
    gnb_agg_us: int = 1_500
    agg_core_us: int = 8_000
    ran_processing_us: int = 50
    core_processing_us: int = 200
    timeout_us: int = 10_000


@dataclass(frozen=True)
class ReliabilityQuery:
    src: int
    dst: int
    k: int
    trials: int = 100_000


@dataclass
class Scenario:
    name: str
    seed: int
    horizon_us: int
    approaches: tuple[Approach, ...]
    variants: tuple[Variant, ...]
    topology: Topology
    calibration: Calibration
    workload: list[WorkloadEvent] = field(default_factory=list)
    allow_list: frozenset[int] | None = None
    reliability: list[ReliabilityQuery] = field(default_factory=list)
    out_dir: str | None = None
    trace: bool = False
    source: str = ""

    def sim_config(self, trace: bool | None = None) -> SimConfig:
        cal = self.calibration
        return SimConfig(cal.timeout_us, cal.ran_processing_us, cal.core_processing_us,
                         self.allow_list, trace=self.trace if trace is None else trace)

    def cells(self) -> list[tuple[Variant, Approach]]:
        return sorted(((v, a) for v in self.variants for a in self.approaches),
                      key=lambda c: (c[0].value, c[1].value))


def resolve_path(ref: str | os.PathLike) -> FsPath:
    """A scenario path, or the name of a bundled scenario."""
    path = FsPath(ref)
    if path.exists():
        return path
    for candidate in (BUNDLED_DIR / f"{ref}.yaml", BUNDLED_DIR / str(ref)):
        if candidate.exists():
            return candidate
    raise ValidationError(f"scenario file not found: {ref}")


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def load_scenario(ref: str | os.PathLike, *, seed: int | None = None) -> Scenario:
    path = resolve_path(ref)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ValidationError(f"{path}: top level must be a mapping")
    return parse_scenario(doc, source=str(path), seed=seed)


def effective_seed(file_seed: int, override: int | None = None) -> int:
    """Command-line seed, then the environment variable, then the file."""
    if override is not None:
        return int(override)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return file_seed


def _section(doc: Mapping, key: str, kind: type, default: Any) -> Any:
    value = doc.get(key, default)
    if value is None:
        return default
    if not isinstance(value, kind):
        raise ValidationError(f"{key} must be a {kind.__name__}")
    return value


def _int(raw: Mapping, key: str, where: str, default: int | None = None, *, lo: int = 0) -> int:
    value = raw.get(key, default)
    if value is None:
        raise ValidationError(f"{where}.{key} is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValidationError(f"{where}.{key} must be an integer (got {value!r})")
    if int(value) < lo:
        raise ValidationError(f"{where}.{key} must be >= {lo}")
    return int(value)


def parse_scenario(doc: Mapping[str, Any], *, source: str = "<memory>",
                   seed: int | None = None) -> Scenario:
    meta = _section(doc, "scenario", Mapping, {})
    name = str(meta.get("name") or FsPath(source).stem)
    file_seed = _int(meta, "seed", "scenario", 0)
    horizon = _int(meta, "horizon_us", "scenario", 1_000_000, lo=1)

    raw_cal = _section(doc, "calibration", Mapping, {})
    known = Calibration.__dataclass_fields__
    for key in raw_cal:
        if key not in known:
            raise ValidationError(f"calibration.{key} is not a known setting")
    cal = Calibration(**{k: _int(raw_cal, k, "calibration", lo=1 if k.endswith("_us") and
                                 "processing" not in k else 0) for k in raw_cal})

    approaches_raw = meta.get("approaches", meta.get("approach", "C"))
    if isinstance(approaches_raw, str):
        approaches_raw = [approaches_raw]
    try:
        approaches = tuple(dict.fromkeys(Approach(str(a).upper()) for a in approaches_raw))
    except ValueError:
        raise ValidationError(f"scenario.approach must be A, B or C (got {approaches_raw!r})") \
            from None

    topo_raw = dict(_section(doc, "topology", Mapping, {}))
    if not topo_raw.get("nodes"):
        raise ValidationError("topology.nodes is required")
    topo_raw["links"] = [_with_default_latency(l, i, cal, topo_raw["nodes"])
                         for i, l in enumerate(topo_raw.get("links") or [])]
    variants_raw = meta.get("variants")
    if variants_raw is None:
        if "placement" not in topo_raw:
            raise ValidationError("topology.placement is required when scenario.variants is absent")
        variants_raw = [_variant_name(topo_raw["placement"])]
    elif isinstance(variants_raw, str):
        variants_raw = [variants_raw]
    try:
        variants = tuple(dict.fromkeys(Variant(str(v)) for v in variants_raw))
    except ValueError:
        raise ValidationError(f"scenario.variants contains an unknown variant: {variants_raw!r}") \
            from None
    if not variants:
        raise ValidationError("scenario.variants must not be empty")
    topology = _build_loose(topo_raw, variants)

    def node(ref: Any, where: str) -> int:
        if isinstance(ref, str):
            try:
                return topology.by_name(ref)
            except KeyError:
                pass
        if isinstance(ref, int) and not isinstance(ref, bool) and ref in topology.nodes:
            return ref
        raise ValidationError(f"{where} references unknown node {ref!r}")

    def link(ref: Any, where: str):
        if not isinstance(ref, (list, tuple)) or len(ref) != 3:
            raise ValidationError(f"{where} must be [a, b, kind]")
        a, b = node(ref[0], where), node(ref[1], where)
        try:
            kind = LinkKind(ref[2])
        except ValueError:
            raise ValidationError(f"{where} has unknown link kind {ref[2]!r}") from None
        key = (min(a, b), max(a, b), kind)
        if key not in topology.links:
            raise ValidationError(f"{where} names a link that does not exist: {list(ref)!r}")
        return key

    workload: list[WorkloadEvent] = []
    labels: set[str] = set()
    for i, raw in enumerate(_section(doc, "sessions", list, [])):
        where = f"sessions[{i}]"
        if not isinstance(raw, Mapping):
            raise ValidationError(f"{where} must be a mapping")
        label = str(raw.get("label", f"s{i + 1}"))
        if label in labels:
            raise ValidationError(f"{where}.label {label!r} is duplicated")
        labels.add(label)
        src, dst = node(raw.get("src"), f"{where}.src"), node(raw.get("dst"), f"{where}.dst")
        for end, field_name in ((src, "src"), (dst, "dst")):
            if topology.kind(end) is not NodeKind.UE:
                raise ValidationError(f"{where}.{field_name} must be a UE")
        if src == dst:
            raise ValidationError(f"{where}: src and dst must differ")
        if topology.serving_gnb(src) == topology.serving_gnb(dst):
            raise ValidationError(f"{where}: src and dst are served by the same gNB")
        try:
            service = raw.get("service_type", "XURLLC")
            qos = QosProfile(_int(raw, "max_latency_us", where, 10_000, lo=1),
                             _int(raw, "reliability_exp", where, 5),
                             ServiceType[str(service).upper()])
            n_pdus = _int(raw, "pdus", where, 1, lo=1)
            pdus = tuple(PduSession(j + 1, qos) for j in range(n_pdus))
            cq = _int(raw, "channel_quality", where, 15)
            if cq > 15:
                raise ValidationError(f"{where}.channel_quality must be in 0..15")
        except (InvariantError, KeyError) as exc:
            raise ValidationError(f"{where}: {exc}") from None
        workload.append(InjectSession(_int(raw, "at_us", where, 0), label, src, dst, qos, cq,
                                      pdus if n_pdus > 1 else ()))
    for i, raw in enumerate(_section(doc, "traffic", list, [])):
        where = f"traffic[{i}]"
        label = str(raw.get("session"))
        if label not in labels:
            raise ValidationError(f"{where}.session references unknown session {label!r}")
        rate = raw.get("rate_pps", 1000)
        if not isinstance(rate, (int, float)) or rate <= 0:
            raise ValidationError(f"{where}.rate_pps must be > 0")
        workload.append(InjectTraffic(_int(raw, "start_us", where, 0), label, float(rate),
                                      _int(raw, "count", where, 100),
                                      _int(raw, "size_bytes", where, 100, lo=1),
                                      bool(raw.get("reverse", False))))
    for i, raw in enumerate(_section(doc, "failures", list, [])):
        where = f"failures[{i}]"
        at = _int(raw, "at_us", where)
        if "link" in raw:
            workload.append(FailLink(at, link(raw["link"], f"{where}.link")))
        elif "node" in raw:
            workload.append(FailNode(at, node(raw["node"], f"{where}.node")))
        elif "recover" in raw:
            workload.append(RecoverLink(at, link(raw["recover"], f"{where}.recover")))
        else:
            raise ValidationError(f"{where} needs one of link, node, recover")
    for i, raw in enumerate(_section(doc, "releases", list, [])):
        where = f"releases[{i}]"
        label = str(raw.get("session"))
        if label not in labels:
            raise ValidationError(f"{where}.session references unknown session {label!r}")
        workload.append(ReleaseSession(_int(raw, "at_us", where), label))
    for ev in workload:
        if ev.at_us > horizon:
            raise ValidationError(f"event at {ev.at_us} us lies beyond scenario.horizon_us")

    mesh = _section(doc, "mesh", Mapping, {})
    allow = mesh.get("allow_list")
    allow_list = None
    if allow is not None:
        allow_list = frozenset(node(r, "mesh.allow_list") for r in allow)
        for n in sorted(allow_list):
            if topology.kind(n) is not NodeKind.UE:
                raise ValidationError(f"mesh.allow_list entry {topology.nodes[n].label} is not a UE")

    queries = []
    for i, raw in enumerate(_section(doc, "reliability", list, [])):
        where = f"reliability[{i}]"
        queries.append(ReliabilityQuery(node(raw.get("src"), f"{where}.src"),
                                        node(raw.get("dst"), f"{where}.dst"),
                                        _int(raw, "k", where, 1, lo=1),
                                        _int(raw, "trials", where, 100_000, lo=1)))

    output = _section(doc, "output", Mapping, {})
    return Scenario(name, effective_seed(file_seed, seed), horizon, approaches, variants, topology,
                    cal, workload, allow_list, queries, output.get("dir"),
                    bool(output.get("trace", False)), source)


def _variant_name(placement: Any) -> str:
    if isinstance(placement, Mapping):
        return str(placement.get("variant"))
    return str(placement)


def _with_default_latency(raw: Any, index: int, cal: Calibration, nodes: list) -> dict:
    if not isinstance(raw, Mapping):
        raise ValidationError(f"topology.links[{index}] must be a mapping")
    link = dict(raw)
    if "latency_us" in link:
        return link
    kinds = {}
    for i, n in enumerate(nodes, start=1):
        if isinstance(n, Mapping):
            kinds[n.get("name")] = n.get("kind")
            kinds[n.get("id", i)] = n.get("kind")
    ends = {kinds.get(link.get("a")), kinds.get(link.get("b"))}
    kind = link.get("kind")
    if kind == "Uu":
        link["latency_us"] = cal.uu_us
    elif kind == "Xn":
        link["latency_us"] = cal.xn_us
    elif kind == "N_core" and "CoreSite" in ends:
        link["latency_us"] = cal.agg_core_us
    else:
        link["latency_us"] = cal.gnb_agg_us
    return link


def _build_loose(raw: Mapping, variants: tuple[Variant, ...]) -> Topology:
    """Build the topology under its own placement, or else under the first
    listed variant it validates for. Per-variant failures surface later as
    infeasible cells."""
    if "placement" in raw:
        candidates = [raw["placement"]]
    else:
        candidates = [v.value for v in variants]
    first: ValidationError | None = None
    for placement in candidates:
        try:
            return build_topology({**raw, "placement": placement})
        except ValidationError as exc:
            first = first or exc
        except (TypeError, ValueError, KeyError) as exc:
            raise ValidationError(f"topology: {exc}") from None
    assert first is not None
    raise first


# -- feasibility ------------------------------------------------------------------------

INTERFACE_RULE = {
    Approach.A: LinkKind.XN,
    Approach.B: LinkKind.UU,
    Approach.C: LinkKind.XN,
}


def interface_problem(topology: Topology, approach: Approach) -> str | None:
    """The interface rule: approach B needs a direct gNB-gNB Uu link, A and C
    need a direct gNB-gNB Xn link."""
    kind = INTERFACE_RULE[approach]
    if topology.gnb_links(kind):
        return None
    return (f"interface rule: approach {approach.value} requires a direct gNB-gNB "
            f"{kind.value} link")


def cell_problem(scenario: Scenario, variant: Variant, approach: Approach) -> str | None:
    """Why a (variant, approach) cell cannot run, or None when it can."""
    try:
        topology = scenario.topology.with_placement(Placement.of(variant))
    except ValidationError as exc:
        return f"placement {variant.value}: {exc}"
    return interface_problem(topology, approach)

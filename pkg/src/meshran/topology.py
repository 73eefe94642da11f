"""Network graph, functional placement variants and plane-aware routing.

Nodes are typed (UE, access node, donor, aggregation site, core site) and
links carry one-way latency, loss probability and an interface kind. A
placement variant decides where the UPF and the control-plane core functions
live, which in turn constrains the data and signalling routes between UEs.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any


class ValidationError(ValueError):
    """Raised when a topology or scenario violates an invariant."""


class NoPathError(LookupError):
    """No placement-respecting path exists between two nodes."""


class NodeKind(str, enum.Enum):
    UE = "UE"
    ACCESS = "AccessNode"
    DONOR = "DonorNode"
    AGGREGATION = "AggregationSite"
    CORE = "CoreSite"

    @property
    def is_ran(self) -> bool:
        return self in (NodeKind.ACCESS, NodeKind.DONOR)

    @property
    def is_gnb(self) -> bool:
        return self.is_ran


class LinkKind(str, enum.Enum):
    UU = "Uu"
    XN = "Xn"
    F1 = "F1"
    N_CORE = "N_core"


class Plane(str, enum.Enum):
    DATA = "Data"
    SIGNALLING = "Signalling"


class Variant(str, enum.Enum):
    EMBB_CENTRAL = "EMBB_CENTRAL"
    CLOUD_CONVERGED = "CLOUD_CONVERGED"
    AGG_UPF = "AGG_UPF"
    MESH_URLLC = "MESH_URLLC"
    IAB_CENTRAL = "IAB_CENTRAL"
    IAB_CORE_IN_CU = "IAB_CORE_IN_CU"
    IAB_CORE_IN_DU = "IAB_CORE_IN_DU"
    IAB_P2P = "IAB_P2P"


ALL_KINDS = frozenset(NodeKind)
RAN_LEVEL = frozenset({NodeKind.UE, NodeKind.ACCESS, NodeKind.DONOR})
CORELESS = frozenset({Variant.IAB_CORE_IN_CU, Variant.IAB_CORE_IN_DU, Variant.IAB_P2P})

# variant -> (upf_at, cp_core_at, default split option)
_PLACEMENT_DEFAULTS: dict[Variant, tuple[NodeKind, NodeKind, int]] = {
    Variant.EMBB_CENTRAL: (NodeKind.CORE, NodeKind.CORE, 7),
    Variant.CLOUD_CONVERGED: (NodeKind.CORE, NodeKind.CORE, 7),
    Variant.AGG_UPF: (NodeKind.AGGREGATION, NodeKind.CORE, 2),
    Variant.MESH_URLLC: (NodeKind.ACCESS, NodeKind.AGGREGATION, 2),
    Variant.IAB_CENTRAL: (NodeKind.CORE, NodeKind.CORE, 7),
    Variant.IAB_CORE_IN_CU: (NodeKind.ACCESS, NodeKind.DONOR, 2),
    Variant.IAB_CORE_IN_DU: (NodeKind.ACCESS, NodeKind.ACCESS, 2),
    Variant.IAB_P2P: (NodeKind.ACCESS, NodeKind.ACCESS, 2),
}


@dataclass(frozen=True)
class PlaneRule:
    """Routing constraint for one plane: an optional anchor kind the route
    must visit, and the node kinds it may touch at all."""

    anchor: NodeKind | None
    allowed: frozenset[NodeKind]


@dataclass(frozen=True)
class Placement:
    variant: Variant
    upf_at: NodeKind
    cp_core_at: NodeKind
    split_option: int

    @classmethod
    def of(cls, variant: Variant | str, split_option: int | None = None) -> Placement:
        variant = Variant(variant)
        upf_at, cp_at, split = _PLACEMENT_DEFAULTS[variant]
        placement = cls(variant, upf_at, cp_at, split if split_option is None else split_option)
        placement.validate()
        return placement

    @property
    def coreless(self) -> bool:
        return self.variant in CORELESS

    def validate(self) -> None:
        v = self.variant
        if self.split_option not in (2, 3, 7):
            raise ValidationError(f"split_option must be one of 2, 3, 7 (got {self.split_option})")
        if v in (Variant.EMBB_CENTRAL, Variant.CLOUD_CONVERGED):
            if self.upf_at is not NodeKind.CORE or self.split_option != 7:
                raise ValidationError(f"{v.value} requires upf_at=CoreSite and split_option=7")
        if v is Variant.AGG_UPF:
            if self.upf_at is not NodeKind.AGGREGATION or self.split_option not in (2, 3):
                raise ValidationError("AGG_UPF requires upf_at=AggregationSite and split_option 2 or 3")
        if v in (Variant.MESH_URLLC, *CORELESS):
            if not self.upf_at.is_ran:
                raise ValidationError(f"{v.value} requires the UPF at an AccessNode or DonorNode")

    def rule(self, plane: Plane) -> PlaneRule:
        if plane is Plane.DATA:
            if self.upf_at.is_ran:
                anchor = self.upf_at if self.upf_at is NodeKind.DONOR else None
                return PlaneRule(anchor, RAN_LEVEL)
            return PlaneRule(self.upf_at, ALL_KINDS)
        if self.variant is Variant.IAB_CORE_IN_DU:
            # core functions live in the DUs: signalling never visits a donor
            return PlaneRule(None, frozenset({NodeKind.UE, NodeKind.ACCESS}))
        if self.coreless:
            anchor = NodeKind.DONOR if self.cp_core_at is NodeKind.DONOR else None
            return PlaneRule(anchor, RAN_LEVEL)
        return PlaneRule(self.cp_core_at, ALL_KINDS)


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    name: str = ""
    mt: bool = False
    capacity_sessions: int = 64

    @property
    def label(self) -> str:
        return self.name or f"{self.kind.value}{self.id}"


LinkKey = tuple[int, int, LinkKind]


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    kind: LinkKind
    latency_us: int
    loss_prob: float = 0.0
    capacity_sessions: int = 1024
    bandwidth_bps: int | None = None

    def __post_init__(self) -> None:
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def key(self) -> LinkKey:
        return (self.a, self.b, self.kind)

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class Path:
    hops: tuple[int, ...]
    total_latency_us: int
    plane: Plane = Plane.DATA
    links: tuple[LinkKey, ...] = ()

    @property
    def src(self) -> int:
        return self.hops[0]

    @property
    def dst(self) -> int:
        return self.hops[-1]

    def __len__(self) -> int:
        return len(self.hops)


def _link_kind_ok(kind: LinkKind, ka: NodeKind, kb: NodeKind) -> bool:
    pair = {ka, kb}
    if kind is LinkKind.UU:
        return pair in ({NodeKind.UE, NodeKind.ACCESS}, {NodeKind.ACCESS})
    if kind is LinkKind.XN:
        return ka.is_gnb and kb.is_gnb
    if kind is LinkKind.F1:
        others = pair - {NodeKind.ACCESS}
        return NodeKind.ACCESS in pair and len(others) == 1 and others <= {
            NodeKind.DONOR, NodeKind.AGGREGATION, NodeKind.CORE}
    if kind is LinkKind.N_CORE:
        return NodeKind.UE not in pair and bool(pair & {NodeKind.AGGREGATION, NodeKind.CORE})
    return False


class Topology:
    """Immutable network graph bound to one placement variant.

    Construction validates every structural invariant and raises
    :class:`ValidationError` naming the first one that fails.
    """

    def __init__(self, nodes: Iterable[Node], links: Iterable[Link], placement: Placement,
                 *, _validate: bool = True):
        self.nodes: dict[int, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValidationError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        self.links: dict[LinkKey, Link] = {}
        for link in links:
            if link.key in self.links:
                raise ValidationError(f"duplicate {link.kind.value} link {link.a}-{link.b}")
            self.links[link.key] = link
        self.placement = placement
        self._adj: dict[int, list[Link]] = {n: [] for n in self.nodes}
        for link in sorted(self.links.values(), key=lambda l: (l.a, l.b, l.kind.value)):
            if link.a in self._adj and link.b in self._adj:
                self._adj[link.a].append(link)
                self._adj[link.b].append(link)
        self._views: dict[tuple[frozenset, frozenset], Topology] = {}
        if _validate:
            self.validate()

    # -- queries -----------------------------------------------------------

    def kind(self, node: int) -> NodeKind:
        return self.nodes[node].kind

    def incident(self, node: int) -> list[Link]:
        return self._adj.get(node, [])

    def neighbors(self, node: int) -> list[int]:
        return sorted({l.other(node) for l in self.incident(node)})

    def links_between(self, a: int, b: int) -> list[Link]:
        lo, hi = min(a, b), max(a, b)
        return [l for l in self.incident(a) if (l.a, l.b) == (lo, hi)]

    def of_kind(self, kind: NodeKind) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind is kind)

    def serving_gnb(self, ue: int) -> int:
        for link in self.incident(ue):
            return link.other(ue)
        raise NoPathError(f"UE {ue} is not attached")

    def by_name(self, name: str) -> int:
        for node in self.nodes.values():
            if node.name == name:
                return node.id
        raise KeyError(name)

    def gnb_links(self, kind: LinkKind) -> list[Link]:
        return [l for l in self.links.values()
                if l.kind is kind and self.kind(l.a).is_gnb and self.kind(l.b).is_gnb]

    def without(self, links: Iterable[LinkKey] = (), nodes: Iterable[int] = ()) -> Topology:
        """Unvalidated copy with the given links and nodes removed (memoised)."""
        key = (frozenset(links), frozenset(nodes))
        if not key[0] and not key[1]:
            return self
        view = self._views.get(key)
        if view is None:
            dead_nodes = key[1]
            view = Topology(
                (n for n in self.nodes.values() if n.id not in dead_nodes),
                (l for l in self.links.values()
                 if l.key not in key[0] and l.a not in dead_nodes and l.b not in dead_nodes),
                self.placement, _validate=False)
            self._views[key] = view
        return view

    def with_placement(self, placement: Placement) -> Topology:
        return Topology(self.nodes.values(), self.links.values(), placement)

    def connected(self) -> bool:
        if not self.nodes:
            return True
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        self.placement.validate()
        for link in self.links.values():
            for end in link.endpoints:
                if end not in self.nodes:
                    raise ValidationError(f"link {link.a}-{link.b} references unknown node {end}")
            if link.a == link.b:
                raise ValidationError(f"self-loop link on node {link.a}")
            if link.latency_us <= 0:
                raise ValidationError(f"link {link.a}-{link.b} latency_us must be > 0")
            if not 0.0 <= link.loss_prob <= 1.0:
                raise ValidationError(f"link {link.a}-{link.b} loss_prob must be in [0, 1]")
            if link.capacity_sessions < 0:
                raise ValidationError(f"link {link.a}-{link.b} capacity_sessions must be >= 0")
            ka, kb = self.kind(link.a), self.kind(link.b)
            if not _link_kind_ok(link.kind, ka, kb):
                raise ValidationError(
                    f"{link.kind.value} link not allowed between {ka.value} and {kb.value}")
        for node in self.nodes.values():
            if node.capacity_sessions < 0:
                raise ValidationError(f"node {node.label} capacity_sessions must be >= 0")
            if node.kind is NodeKind.UE:
                attach = [l for l in self.incident(node.id)]
                if len(attach) != 1 or self.kind(attach[0].other(node.id)) is not NodeKind.ACCESS:
                    raise ValidationError(f"UE {node.label} must attach to exactly one AccessNode")
            if node.kind is NodeKind.DONOR and self.placement.variant not in (
                    Variant.IAB_CORE_IN_CU, Variant.IAB_CORE_IN_DU):
                if not any(self.kind(l.other(node.id)) in (NodeKind.CORE, NodeKind.AGGREGATION)
                           for l in self.incident(node.id)):
                    raise ValidationError(
                        f"DonorNode {node.label} needs a link toward CoreSite or AggregationSite")
        if not self.connected():
            raise ValidationError("topology graph is not connected")
        self._validate_placement()

    def _validate_placement(self) -> None:
        p = self.placement
        v = p.variant.value
        required = [NodeKind.DONOR] if v.startswith("IAB_") else []
        for kind in required + [p.upf_at, p.cp_core_at]:
            if not self.of_kind(kind):
                article = "an" if kind.value[0] in "AEIOU" else "a"
                raise ValidationError(f"{v} requires {article} {kind.value} node")
        if p.upf_at.is_ran:
            direct = self.gnb_links(LinkKind.XN) + [
                l for l in self.gnb_links(LinkKind.UU)]
            if not direct:
                raise ValidationError(f"{v} requires a direct Xn or Uu link between RAN nodes")

    def __repr__(self) -> str:
        return (f"Topology({len(self.nodes)} nodes, {len(self.links)} links, "
                f"{self.placement.variant.value})")


# -- construction from a parsed spec ----------------------------------------

def build_topology(spec: Mapping[str, Any]) -> Topology:
    """Build a validated topology from a parsed scenario section.

    ``spec`` holds ``placement`` (variant name or mapping with ``variant`` and
    optional ``split_option``), ``nodes`` and ``links``. Links may name their
    endpoints by node name or numeric id.
    """
    placement_spec = spec.get("placement", spec.get("variant"))
    if placement_spec is None:
        raise ValidationError("topology.placement is required")
    if isinstance(placement_spec, Mapping):
        variant = placement_spec.get("variant")
        split = placement_spec.get("split_option")
    else:
        variant, split = placement_spec, None
    try:
        placement = Placement.of(variant, split)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"unknown placement variant {variant!r}") from None

    nodes: list[Node] = []
    names: dict[str, int] = {}
    for index, raw in enumerate(spec.get("nodes") or [], start=1):
        try:
            kind = NodeKind(raw["kind"])
        except (KeyError, ValueError):
            raise ValidationError(f"nodes[{index - 1}].kind invalid: {raw.get('kind')!r}") from None
        node_id = int(raw.get("id", index))
        name = str(raw.get("name", ""))
        if name:
            if name in names:
                raise ValidationError(f"duplicate node name {name!r}")
            names[name] = node_id
        nodes.append(Node(node_id, kind, name, bool(raw.get("mt", False)),
                          int(raw.get("capacity_sessions", 64))))

    ids = {n.id for n in nodes}

    def resolve(ref: Any, where: str) -> int:
        if isinstance(ref, str) and ref in names:
            return names[ref]
        if isinstance(ref, int) and ref in ids:
            return ref
        raise ValidationError(f"{where} references unknown node {ref!r}")

    links: list[Link] = []
    for index, raw in enumerate(spec.get("links") or []):
        where = f"links[{index}]"
        try:
            kind = LinkKind(raw["kind"])
        except (KeyError, ValueError):
            raise ValidationError(f"{where}.kind invalid: {raw.get('kind')!r}") from None
        if "latency_us" not in raw:
            raise ValidationError(f"{where}.latency_us is required")
        links.append(Link(
            resolve(raw.get("a"), where), resolve(raw.get("b"), where), kind,
            int(raw["latency_us"]), float(raw.get("loss_prob", 0.0)),
            int(raw.get("capacity_sessions", 1024)),
            int(raw["bandwidth_bps"]) if raw.get("bandwidth_bps") else None))
    return Topology(nodes, links, placement)


# -- routing -------------------------------------------------------------------

def _link_usable(topo: Topology, link: Link, allowed: frozenset[NodeKind],
                 interface: LinkKind | None) -> bool:
    if topo.kind(link.a) not in allowed or topo.kind(link.b) not in allowed:
        return False
    if interface is not None and link.kind in (LinkKind.UU, LinkKind.XN):
        if topo.kind(link.a).is_gnb and topo.kind(link.b).is_gnb:
            return link.kind is interface
    return True


def _dijkstra(topo: Topology, src: int, allowed: frozenset[NodeKind],
              interface: LinkKind | None) -> dict[int, tuple[int, int, tuple[int, ...], tuple[LinkKey, ...]]]:
    """Best route from ``src`` to every reachable node.

    Routes are ranked by (latency, hop count, hop sequence); this order is
    prefix-consistent so plain label-setting finds the optimum.
    """
    best: dict[int, tuple[int, int, tuple[int, ...], tuple[LinkKey, ...]]] = {}
    heap: list[tuple[int, int, tuple[int, ...], tuple[LinkKey, ...]]] = [(0, 0, (src,), ())]
    while heap:
        lat, nh, hops, lks = heapq.heappop(heap)
        u = hops[-1]
        if u in best:
            continue
        best[u] = (lat, nh, hops, lks)
        # UEs never relay traffic
        if u != src and topo.kind(u) is NodeKind.UE:
            continue
        for link in topo.incident(u):
            v = link.other(u)
            if v in best or not _link_usable(topo, link, allowed, interface):
                continue
            heapq.heappush(heap, (lat + link.latency_us, nh + 1, hops + (v,), lks + (link.key,)))
    return best


def route(topology: Topology, src: int, dst: int, rule: PlaneRule, plane: Plane = Plane.DATA,
          interface: LinkKind | None = None) -> Path:
    """Minimum-latency route honouring ``rule``; anchored routes may turn
    around at the anchor (e.g. UE -> gNB -> core -> gNB -> UE)."""
    for end in (src, dst):
        if end not in topology.nodes:
            raise NoPathError(f"node {end} is not in the topology")
        if topology.kind(end) not in rule.allowed:
            raise NoPathError(f"node {end} ({topology.kind(end).value}) not allowed on {plane.value} plane")
    if src == dst:
        return Path((src,), 0, plane)
    from_src = _dijkstra(topology, src, rule.allowed, interface)
    if rule.anchor is None:
        if dst not in from_src:
            raise NoPathError(f"no {plane.value} path {src} -> {dst}")
        lat, _, hops, lks = from_src[dst]
        return Path(hops, lat, plane, lks)
    candidates = []
    for anchor in topology.of_kind(rule.anchor):
        if anchor not in from_src:
            continue
        if anchor == dst:
            leg2 = (0, 0, (dst,), ())
        else:
            leg2 = _dijkstra(topology, anchor, rule.allowed, interface).get(dst)
            if leg2 is None:
                continue
        leg1 = from_src[anchor]
        candidates.append((leg1[0] + leg2[0], leg1[1] + leg2[1], leg1[2] + leg2[2][1:], leg1[3] + leg2[3]))
    if not candidates:
        raise NoPathError(f"no {plane.value} path {src} -> {dst} via a {rule.anchor.value}")
    lat, _, hops, lks = min(candidates)
    return Path(hops, lat, plane, lks)


def compute_path(topology: Topology, src: int, dst: int, plane: Plane | str = Plane.DATA,
                 *, interface: LinkKind | None = None) -> Path:
    """Minimum-latency path that respects the topology's placement variant.

    Ties are broken by hop count, then by the lexicographically smallest hop
    sequence. ``interface`` optionally restricts gNB-to-gNB hops to one
    interface kind (Uu or Xn); F1 and core links are never restricted.
    """
    plane = Plane(plane)
    return route(topology, src, dst, topology.placement.rule(plane), plane, interface)


FAMILY_RULES = {
    "core": PlaneRule(NodeKind.CORE, ALL_KINDS),
    "aggregation": PlaneRule(NodeKind.AGGREGATION, ALL_KINDS - {NodeKind.CORE}),
    "direct": PlaneRule(None, RAN_LEVEL),
}


def route_family(topology: Topology, path: Path) -> str:
    kinds = {topology.kind(h) for h in path.hops}
    if NodeKind.CORE in kinds:
        return "core"
    if NodeKind.AGGREGATION in kinds:
        return "aggregation"
    return "direct"


def route_families(topology: Topology, src: int, dst: int) -> dict[str, Path]:
    """Best data route in each family (via core, via aggregation, direct)."""
    found = {}
    for family, rule in FAMILY_RULES.items():
        try:
            found[family] = route(topology, src, dst, rule)
        except NoPathError:
            continue
    return found


def path_latency(topology: Topology, path: Path) -> int:
    return sum(topology.links[k].latency_us for k in path.links)


def ran_hop_count(topology: Topology, path: Path) -> int:
    """Number of gNB-to-gNB hops on a path."""
    return sum(1 for u, v in itertools.pairwise(path.hops)
               if topology.kind(u).is_gnb and topology.kind(v).is_gnb)


# -- link-disjoint paths ---------------------------------------------------------

@dataclass
class _Arc:
    u: int
    v: int
    link: LinkKey
    cost: int
    flow: int = 0
    twin: int = -1  # index of the opposite-direction arc on the same link


def k_disjoint_paths(topology: Topology, src: int, dst: int, k: int,
                     *, interface: LinkKind | None = None) -> list[Path]:
    """Up to ``k`` pairwise link-disjoint data-plane paths, fastest first.

    Uses successive shortest augmenting paths (min-cost flow with unit link
    capacities), so the returned set has minimum total latency among all sets
    of the same size. Only the data plane's node-kind restriction applies; an
    anchor requirement is not imposed on redundant paths.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rule = topology.placement.rule(Plane.DATA)
    if src not in topology.nodes or dst not in topology.nodes or src == dst:
        return [Path((src,), 0)] if src == dst and src in topology.nodes else []
    if k == 1:
        try:
            return [route(topology, src, dst, PlaneRule(None, rule.allowed), Plane.DATA, interface)]
        except NoPathError:
            return []

    arcs: list[_Arc] = []
    out: dict[int, list[int]] = {n: [] for n in topology.nodes}
    for link in sorted(topology.links.values(), key=lambda l: l.key[:2] + (l.kind.value,)):
        if not _link_usable(topology, link, rule.allowed, interface):
            continue
        for u, v in ((link.a, link.b), (link.b, link.a)):
            # UEs only as endpoints
            if topology.kind(u) is NodeKind.UE and u != src:
                continue
            if topology.kind(v) is NodeKind.UE and v != dst:
                continue
            out[u].append(len(arcs))
            arcs.append(_Arc(u, v, link.key, link.latency_us))
    by_link: dict[LinkKey, list[int]] = {}
    for i, arc in enumerate(arcs):
        by_link.setdefault(arc.link, []).append(i)
    for pair in by_link.values():
        if len(pair) == 2:
            arcs[pair[0]].twin, arcs[pair[1]].twin = pair[1], pair[0]

    def residual(i: int, forward: bool) -> tuple[int, int]:
        arc = arcs[i]
        return (arc.u, arc.v) if forward else (arc.v, arc.u)

    found = 0
    for _ in range(k):
        # Bellman-Ford over the residual graph; residual moves are either
        # pushing on a free arc (+cost) or cancelling flow (-cost). A link can
        # carry flow in only one direction, so pushing onto an arc whose twin
        # carries flow is expressed as cancelling the twin.
        dist: dict[int, float] = {n: float("inf") for n in topology.nodes}
        pred: dict[int, tuple[int, bool]] = {}
        dist[src] = 0
        for _round in range(len(topology.nodes)):
            changed = False
            for i, arc in enumerate(arcs):
                link_used = arc.flow or (arc.twin >= 0 and arcs[arc.twin].flow)
                if not link_used:
                    u, v = residual(i, True)
                    if dist[u] + arc.cost < dist[v]:
                        dist[v] = dist[u] + arc.cost
                        pred[v] = (i, True)
                        changed = True
                if arc.flow:
                    u, v = residual(i, False)
                    if dist[u] - arc.cost < dist[v]:
                        dist[v] = dist[u] - arc.cost
                        pred[v] = (i, False)
                        changed = True
            if not changed:
                break
        if dist[dst] == float("inf"):
            break
        node = dst
        guard = 0
        while node != src:
            i, forward = pred[node]
            arcs[i].flow += 1 if forward else -1
            node = arcs[i].u if forward else arcs[i].v
            guard += 1
            if guard > len(arcs) + 1:
                raise RuntimeError("cycle in augmenting path")
        found += 1

    paths = []
    for _ in range(found):
        hops, lks, lat = [src], [], 0
        node = src
        while node != dst:
            i = next(i for i in out[node] if arcs[i].flow > 0)
            arcs[i].flow -= 1
            node = arcs[i].v
            hops.append(node)
            lks.append(arcs[i].link)
            lat += arcs[i].cost
        paths.append(Path(tuple(hops), lat, Plane.DATA, tuple(lks)))
    paths.sort(key=lambda p: (p.total_latency_us, len(p.hops), p.hops))
    return paths

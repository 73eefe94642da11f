from __future__ import annotations

import random

import pytest
from oracles import (
    RAN_KINDS, disjoint_pairs, fig1, fig1_spec, random_ran, shortest_latency, simple_paths,
)

from meshran.topology import (
    LinkKind, NodeKind, NoPathError, Placement, Plane, ValidationError, Variant, build_topology,
    compute_path, k_disjoint_paths, ran_hop_count, route_families,
)


def ring4(loss: float = 0.0):
    nodes = [{"name": f"g{i}", "kind": "AccessNode"} for i in range(1, 5)]
    nodes += [{"name": "Agg", "kind": "AggregationSite"}]
    links = [{"a": f"g{i}", "b": f"g{i % 4 + 1}", "kind": "Xn", "latency_us": 100 * i,
              "loss_prob": loss} for i in range(1, 5)]
    links.append({"a": "g1", "b": "Agg", "kind": "F1", "latency_us": 1500})
    return build_topology({"placement": "MESH_URLLC", "nodes": nodes, "links": links})


# -- build ------------------------------------------------------------------------------

def test_minimal_agg_upf_instance():
    topo = fig1("AGG_UPF")
    assert len(topo.nodes) == 6
    assert topo.placement.upf_at is NodeKind.AGGREGATION


def test_mesh_urllc_without_direct_link_rejected():
    spec = fig1_spec("MESH_URLLC")
    spec["links"] = [l for l in spec["links"] if l["kind"] != "Xn"]
    with pytest.raises(ValidationError, match="direct Xn or Uu"):
        build_topology(spec)


@pytest.mark.parametrize("mutate, match", [
    (lambda s: s["links"].append({"a": "UE1", "b": "Agg", "kind": "Uu", "latency_us": 1}), "Uu"),
    (lambda s: s["links"][0].update(latency_us=0), "latency_us"),
    (lambda s: s["links"][0].update(loss_prob=1.5), "loss_prob"),
    (lambda s: s["links"].append({"a": "UE1", "b": "gNB2", "kind": "Uu", "latency_us": 1}),
     "exactly one AccessNode"),
    (lambda s: s["nodes"].append({"name": "Lonely", "kind": "AccessNode"}), "not connected"),
    (lambda s: s["links"].append({"a": "gNB1", "b": "Nope", "kind": "Xn", "latency_us": 1}),
     "unknown node"),
    (lambda s: s.update(placement="NOPE"), "unknown placement"),
    (lambda s: s.update(placement={"variant": "AGG_UPF", "split_option": 7}), "AGG_UPF"),
    (lambda s: s["links"][0].pop("latency_us"), r"links\[0\].latency_us"),
])
def test_build_rejects_invalid_specs(mutate, match):
    spec = fig1_spec("AGG_UPF")
    mutate(spec)
    with pytest.raises(ValidationError, match=match):
        build_topology(spec)


def test_iab_variant_requires_donor():
    with pytest.raises(ValidationError, match="DonorNode"):
        fig1("IAB_P2P")


def test_placement_defaults():
    assert Placement.of("EMBB_CENTRAL").split_option == 7
    assert Placement.of("MESH_URLLC").upf_at is NodeKind.ACCESS
    assert Placement.of(Variant.IAB_CORE_IN_CU).cp_core_at is NodeKind.DONOR
    assert Placement.of("IAB_P2P").coreless


def test_nodes_resolve_by_name_or_id():
    topo = fig1()
    assert topo.by_name("gNB2") == 5
    assert topo.serving_gnb(6) == 5
    assert topo.nodes[3].label == "Agg"


# -- routing ----------------------------------------------------------------------------

def test_fig1_has_exactly_three_route_families():
    topo = fig1("EMBB_CENTRAL")
    fams = route_families(topo, 1, 6)
    assert set(fams) == {"core", "aggregation", "direct"}
    # the simple paths between the UEs are the aggregation and direct ones; the
    # core family is the aggregation route with the core as a hairpin
    simple = {p for p in simple_paths(topo, 1, 6)}
    assert simple == {(1, 2, 3, 5, 6), (1, 2, 5, 6)}
    assert fams["aggregation"].hops in simple and fams["direct"].hops in simple
    assert fams["core"].hops == (1, 2, 3, 4, 3, 5, 6)


def test_embb_data_path_visits_core():
    path = compute_path(fig1("EMBB_CENTRAL"), 1, 6, Plane.DATA)
    assert path.hops == (1, 2, 3, 4, 3, 5, 6)
    # oracle: hairpin = shortest UE1->Core plus Core->UE2
    topo = fig1("EMBB_CENTRAL")
    assert path.total_latency_us == shortest_latency(topo, 1, 4) + shortest_latency(topo, 4, 6)


def test_mesh_data_path_is_direct():
    path = compute_path(fig1("MESH_URLLC"), 1, 6)
    assert path.hops == (1, 2, 5, 6)
    assert path.total_latency_us == 800


def test_agg_upf_data_path():
    path = compute_path(fig1("AGG_UPF"), 1, 6)
    assert path.hops == (1, 2, 3, 5, 6)


def test_same_node_path():
    path = compute_path(fig1(), 2, 2)
    assert path.hops == (2,) and path.total_latency_us == 0


def test_mesh_signalling_anchored_at_aggregation():
    topo = fig1("MESH_URLLC")
    assert 3 in compute_path(topo, 2, 5, Plane.SIGNALLING).hops


def test_interface_restriction():
    topo = fig1("MESH_URLLC")
    with pytest.raises(NoPathError):
        compute_path(topo, 1, 6, interface=LinkKind.UU)
    both = fig1("MESH_URLLC", gnb_uu=True)
    path = compute_path(both, 1, 6, interface=LinkKind.UU)
    assert path.links[1][2] is LinkKind.UU


def test_no_path_raises():
    topo = fig1("MESH_URLLC").without(links=[(2, 5, LinkKind.XN)])
    with pytest.raises(NoPathError):
        compute_path(topo, 1, 6)


@pytest.mark.parametrize("seed", range(40))
def test_shortest_path_matches_dijkstra_oracle(seed):
    rng = random.Random(seed)
    topo = random_ran(rng, "MESH_URLLC")
    ues = sorted(topo.of_kind(NodeKind.UE))
    want = shortest_latency(topo, ues[0], ues[1], RAN_KINDS)
    got = compute_path(topo, ues[0], ues[1])
    assert got.total_latency_us == want
    assert len(set(got.hops)) == len(got.hops)
    assert sum(topo.links[k].latency_us for k in got.links) == got.total_latency_us


def test_ran_hop_count():
    topo = fig1("MESH_URLLC")
    assert ran_hop_count(topo, compute_path(topo, 1, 6)) == 1


# -- disjoint paths -----------------------------------------------------------------------

def test_ring_two_disjoint_paths():
    topo = ring4()
    paths = k_disjoint_paths(topo, 1, 3, 2)
    assert sorted(p.hops for p in paths) == [(1, 2, 3), (1, 4, 3)]
    assert len(disjoint_pairs(topo, 1, 3, RAN_KINDS)) == 1


def test_tree_has_one_disjoint_path():
    topo = fig1("MESH_URLLC")
    assert len(k_disjoint_paths(topo, 1, 6, 2)) == 1
    assert disjoint_pairs(topo, 1, 6, RAN_KINDS) == []


@pytest.mark.parametrize("seed", range(30))
def test_k1_equals_shortest_path(seed):
    topo = random_ran(random.Random(seed), "MESH_URLLC")
    ues = sorted(topo.of_kind(NodeKind.UE))
    (only,) = k_disjoint_paths(topo, ues[0], ues[1], 1)
    assert only.hops == compute_path(topo, ues[0], ues[1]).hops


@pytest.mark.parametrize("seed", range(30))
def test_two_disjoint_paths_exist_iff_brute_force_finds_a_pair(seed):
    topo = random_ran(random.Random(100 + seed), "MESH_URLLC")
    gnbs = sorted(topo.of_kind(NodeKind.ACCESS))
    a, b = gnbs[0], gnbs[-1]
    pairs = disjoint_pairs(topo, a, b, RAN_KINDS)
    paths = k_disjoint_paths(topo, a, b, 2)
    assert (len(paths) == 2) == bool(pairs)
    if pairs:
        best = min(sum(topo.links[k].latency_us for k in p[1] | q[1]) for p, q in pairs)
        assert sum(p.total_latency_us for p in paths) == best
        assert not set(paths[0].links) & set(paths[1].links)


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        k_disjoint_paths(ring4(), 1, 3, 0)

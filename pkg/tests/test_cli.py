from __future__ import annotations

import csv
import io

import pytest
import yaml

from meshran.cli import main
from meshran.report import CSV_COLUMNS, compare_matrix
from meshran.scenario import (
    SEED_ENV, bundled_scenarios, effective_seed, load_scenario, parse_scenario, resolve_path,
)
from meshran.topology import ValidationError


def fig1_doc() -> dict:
    return yaml.safe_load(resolve_path("fig1_compare").read_text())


def write(tmp_path, doc, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return str(path)


def read_csv(path) -> list[dict]:
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_bundled_scenarios_present():
    assert set(bundled_scenarios()) >= {
        "fig1_compare", "iab_variants", "failure_selfheal", "reliability_kpaths"}


@pytest.mark.parametrize("name", ["fig1_compare", "iab_variants", "failure_selfheal",
                                  "reliability_kpaths"])
def test_validate_bundled(name, capsys):
    assert main(["validate", name]) == 0
    assert capsys.readouterr().out.startswith(f"{name}: ok")


def test_run_fig1_three_rows_in_bands(tmp_path, capsys):
    assert main(["run", "fig1_compare", "--out", str(tmp_path)]) == 0
    rows = {r["variant"]: r for r in read_csv(tmp_path / "metrics.csv")}
    assert list(read_csv(tmp_path / "metrics.csv")[0]) == list(CSV_COLUMNS)
    assert set(rows) == {"EMBB_CENTRAL", "AGG_UPF", "MESH_URLLC"}
    core = float(rows["EMBB_CENTRAL"]["pkt_latency_p50_us"])
    agg = float(rows["AGG_UPF"]["pkt_latency_p50_us"])
    mesh = float(rows["MESH_URLLC"]["pkt_latency_p50_us"])
    assert core >= 10_000 and 1_000 <= agg < 10_000 and mesh < 1_000
    table = capsys.readouterr().out
    assert "20300 us (20.300 ms)" in table and (tmp_path / "report.txt").exists()


def test_b_without_uu_link_exits_2(tmp_path, capsys):
    doc = fig1_doc()
    doc["scenario"]["approach"] = "B"
    assert main(["run", write(tmp_path, doc)]) == 2
    err = capsys.readouterr().err
    assert "interface rule" in err and "Uu" in err


def test_bad_field_exits_2_naming_it(tmp_path, capsys):
    doc = fig1_doc()
    doc["sessions"][0]["src"] = "UE9"
    assert main(["validate", write(tmp_path, doc)]) == 2
    assert "sessions[0].src" in capsys.readouterr().err


def test_missing_file_exits_2(capsys):
    assert main(["run", "/nonexistent/scenario.yaml"]) == 2


def test_runtime_error_exits_3(tmp_path, monkeypatch):
    import meshran.cli as cli

    def boom(*_a, **_k):
        raise RuntimeError("engine exploded")

    monkeypatch.setattr(cli, "compare_matrix", boom)
    assert main(["run", "fig1_compare", "--out", str(tmp_path)]) == 3


def test_same_run_twice_identical_csv(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "failure_selfheal", "--out", str(a), "--trace"]) == 0
    assert main(["run", "failure_selfheal", "--out", str(b), "--trace"]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert (a / "report.txt").read_bytes() == (b / "report.txt").read_bytes()
    for trace in (a / "traces").iterdir():
        assert trace.read_bytes() == (b / "traces" / trace.name).read_bytes()


def test_parallel_cells_match_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "iab_variants", "--out", str(a)]) == 0
    assert main(["run", "iab_variants", "--out", str(b), "--jobs", "3"]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert effective_seed(5) == 5
    monkeypatch.setenv(SEED_ENV, "11")
    assert effective_seed(5) == 11
    assert effective_seed(5, 3) == 3
    assert load_scenario("fig1_compare").seed == 11
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(ValidationError, match=SEED_ENV):
        effective_seed(5)


def test_env_seed_changes_lossy_results(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "1")
    assert main(["run", "failure_selfheal", "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv(SEED_ENV, "2")
    assert main(["run", "failure_selfheal", "--out", str(tmp_path / "b")]) == 0
    assert main(["run", "failure_selfheal", "--seed", "1", "--out", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "c" / "metrics.csv").read_bytes()


def test_four_variants_under_c():
    doc = fig1_doc()
    doc["scenario"]["variants"] = ["EMBB_CENTRAL", "CLOUD_CONVERGED", "AGG_UPF", "MESH_URLLC"]
    report = compare_matrix(parse_scenario(doc))
    assert [c.variant.value for c in report.cells] == sorted(doc["scenario"]["variants"])
    assert all(c.feasible for c in report.cells)
    assert report.cell("MESH_URLLC", "C").metrics.sig_segments["core"] == 0
    assert report.cell("EMBB_CENTRAL", "C").metrics.sig_segments["core"] > 0


def test_core_in_du_under_a_has_no_donor_hops():
    report = compare_matrix(load_scenario("iab_variants"))
    assert report.cell("IAB_CORE_IN_DU", "A").metrics.donor_hops == 0
    assert report.cell("IAB_CORE_IN_CU", "A").metrics.donor_hops > 0


def test_infeasible_cells_are_annotated_not_skipped(tmp_path, capsys):
    doc = fig1_doc()
    doc["scenario"].pop("approach")
    doc["scenario"]["approaches"] = ["A", "B", "C"]
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 0
    table = capsys.readouterr().out
    assert table.count("infeasible") == 3  # B on each variant: no gNB-gNB Uu link
    rows = read_csv(tmp_path / "o" / "metrics.csv")
    b_rows = [r for r in rows if r["approach"] == "B"]
    assert len(b_rows) == 3 and all(r["delivered"] == "" for r in b_rows)


def test_no_feasible_cell_exits_2(tmp_path, capsys):
    doc = fig1_doc()
    doc["scenario"]["approach"] = "B"
    doc["scenario"]["variants"] = ["MESH_URLLC"]
    assert main(["run", write(tmp_path, doc)]) == 2
    assert "no feasible" in capsys.readouterr().err


def test_compare_merges_scenarios(tmp_path, capsys):
    assert main(["compare", "fig1_compare", "failure_selfheal", "--out", str(tmp_path)]) == 0
    scenarios = {r["scenario"] for r in read_csv(tmp_path / "metrics.csv")}
    assert scenarios == {"fig1_compare", "failure_selfheal"}


def test_reliability_rows_reported(tmp_path, capsys):
    assert main(["run", "reliability_kpaths", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "reliability_kpaths | gNB1 | gNB6 | 2 | 2 |" in out

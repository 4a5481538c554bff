import csv
import json

import pytest

from instances import three_scenario_system
from ldes_contracts import report as report_mod
from ldes_contracts.config import write_config
from ldes_contracts.report import (StudyError, StudyReport, StudySpec, config_hash, cs_index, load_report,
                                   regenerate, run_study, write_report)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    spec = StudySpec(mechanisms=("rcfd", "cf", "avc", "scfd"), deltas=(1.0, 0.6), target_mw=33.0, capacity_tol=0.05)
    return run_study(three_scenario_system(), spec, out_dir=out), out


@pytest.fixture(scope="module")
def desk_rcfd(desk, desk_model):
    return run_study(desk, StudySpec(mechanisms=("rcfd",), deltas=(1.0,), mechanism_sweep=False), model=desk_model)


# --- consumer surplus index -------------------------------------------------

def test_cs_index_anchors():
    assert cs_index(10.0, 10.0, 30.0) == 0.0
    assert cs_index(30.0, 10.0, 30.0) == 100.0


def test_cs_index_halfway():
    assert cs_index(20.0, 10.0, 30.0) == 50.0
    assert cs_index(-5.0, -10.0, 0.0) == 50.0


def test_cs_index_degenerate_baselines():
    with pytest.raises(ValueError):
        cs_index(1.0, 5.0, 5.0)


def test_study_anchor_rows_exact(small_study):
    rep, _ = small_study
    rows = {r["mechanism"]: r for r in rep.cs_index}
    assert rows["Incomplete"]["mean_index"] == 0.0 and rows["Incomplete"]["cvar_index"] == 0.0
    assert rows["Risk-neutral"]["mean_index"] == 100.0 and rows["Risk-neutral"]["cvar_index"] == 100.0


def test_cost_incidence_switch(desk, desk_model, desk_rcfd):
    other = run_study(desk, StudySpec(mechanisms=("rcfd",), deltas=(1.0,), mechanism_sweep=False,
                                      cost_incidence="none"), model=desk_model)
    # a fully hedged contract still moves money in every scenario, so the tail changes
    a = {r["mechanism"]: r for r in desk_rcfd.cs_index}["R-CfD"]
    b = {r["mechanism"]: r for r in other.cs_index}["R-CfD"]
    assert a["cvar_cs"] != b["cvar_cs"]


# --- tables -------------------------------------------------------------------

def test_revenue_cfd_row_is_risk_free(desk, desk_rcfd):
    rows = {r["mechanism"]: r for r in desk_rcfd.table2}
    rf = 100 * desk.investor().risk_free_rate
    r = rows["R-CfD"]
    assert abs(r["cv"]) <= 1e-9
    for key in ("min_irr_pct", "cvar_irr_pct", "implied_wacc_pct"):
        assert r[key] == pytest.approx(rf, abs=1e-4)
    (t3,) = desk_rcfd.table3
    assert t3["value"] == pytest.approx(100.0, abs=1e-4)
    assert abs(t3["cost_installed_pct"]) <= 1e-7


def test_empty_mechanism_list_gives_baselines_only(tmp_path):
    rep = run_study(three_scenario_system(), StudySpec(mechanisms=(), deltas=(1.0,)), out_dir=tmp_path)
    assert [r["mechanism"] for r in rep.table2] == ["None"]
    assert rep.table3 == []
    assert [r["mechanism"] for r in rep.cs_index] == ["Incomplete", "Risk-neutral"]
    assert rep.payouts == {} and rep.sweeps == {}
    assert (tmp_path / "table3.csv").read_text() == ""


def test_files_written(small_study):
    rep, out = small_study
    names = {p.name for p in out.iterdir()}
    expected = {"table1.csv", "table2.csv", "table3.csv", "cs_index.csv", "result.json", "irr_cdf_none.csv"}
    for k in ("rcfd", "cf", "avc", "scfd"):
        expected |= {f"irr_cdf_{k}.csv", f"payouts_{k}.csv", f"sweep_{k}.csv"}
    assert expected <= names
    assert "INCOMPLETE" not in names
    t1 = _read(out / "table1.csv")
    assert [float(r["delta"]) for r in t1] == [1.0, 0.6]
    assert len(_read(out / "sweep_cf.csv")) == 2


def test_irr_cdf_is_a_distribution(small_study):
    rep, _ = small_study
    for rows in rep.irr_cdf.values():
        cdf = [r["cumulative_probability"] for r in rows]
        assert cdf == sorted(cdf)
        assert cdf[-1] == pytest.approx(1.0)


def test_provenance_fields(small_study):
    rep, _ = small_study
    p = rep.provenance
    for key in ("config_hash", "seed", "versions", "tolerances", "target_mw", "risk_neutral_mw", "incomplete_mw"):
        assert key in p
    assert p["target_mw"] == 33.0
    assert set(p["contracts"]) == {"rcfd", "cf", "avc", "scfd"}


def test_config_hash_tracks_content(desk):
    from dataclasses import replace
    assert config_hash(desk) == config_hash(desk)
    assert config_hash(desk) != config_hash(replace(desk, name="other"))


# --- determinism and regeneration ---------------------------------------------------

def test_rerun_is_byte_identical(tmp_path):
    spec = StudySpec(mechanisms=("cf", "avc"), deltas=(1.0, 0.6), target_mw=33.0, capacity_tol=0.05)
    a, b = tmp_path / "a", tmp_path / "b"
    run_study(three_scenario_system(), spec, out_dir=a)
    run_study(three_scenario_system(), spec, out_dir=b)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_regenerate_from_result_json(small_study, tmp_path):
    _, out = small_study
    regenerate(out / "result.json", tmp_path)
    for p in out.iterdir():
        assert (tmp_path / p.name).read_bytes() == p.read_bytes(), p.name


def test_report_roundtrip(small_study):
    rep, out = small_study
    assert load_report(out / "result.json").to_dict() == json.loads(json.dumps(rep.to_dict()))
    assert StudyReport.from_dict(rep.to_dict()) == rep


def test_json_format_writes_only_result(small_study, tmp_path):
    rep, _ = small_study
    paths = write_report(rep, tmp_path, fmt="json")
    assert [p.name for p in paths] == ["result.json"]


def test_run_from_config_path(tmp_path):
    path = write_config(three_scenario_system(), tmp_path / "three.toml")
    rep = run_study(path, StudySpec(mechanisms=(), deltas=(1.0,)))
    assert rep.provenance["config_name"] == "three-scenario"


# --- failures -----------------------------------------------------------------

def test_failed_stage_writes_incomplete_marker(monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise RuntimeError("solver gave up")

    monkeypatch.setattr(report_mod, "calibrate", boom)
    with pytest.raises(StudyError) as info:
        run_study(three_scenario_system(), StudySpec(mechanisms=("avc",), deltas=(1.0,)), out_dir=tmp_path)
    assert info.value.stage == "calibrate:avc"
    marker = (tmp_path / "INCOMPLETE").read_text()
    assert "calibrate:avc" in marker and "solver gave up" in marker
    saved = load_report(tmp_path / "result.json")
    assert saved.incomplete["stage"] == "calibrate:avc"
    assert len(saved.table1) == 1


def test_marker_removed_after_successful_rerun(tmp_path):
    (tmp_path / "INCOMPLETE").write_text("stale\n")
    run_study(three_scenario_system(), StudySpec(mechanisms=(), deltas=(1.0,)), out_dir=tmp_path)
    assert not (tmp_path / "INCOMPLETE").exists()


@pytest.mark.parametrize("kwargs", [{"cost_incidence": "producers"}, {"deltas": (1.5,)}, {"delta": -0.1}])
def test_study_spec_validation(kwargs):
    with pytest.raises(ValueError):
        StudySpec(**kwargs)


def test_mechanism_aliases_normalised():
    assert StudySpec(mechanisms=("R-CfD", "cap_floor")).mechanisms == ("rcfd", "cf")

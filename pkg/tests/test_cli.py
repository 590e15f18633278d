import json
import os
import subprocess
import sys

import pytest

from tlsbath import cli, io, units
from tlsbath.swap import SwapMap


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def sim_dir(tmp_path, run_doc):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", write(tmp_path / "run.json", run_doc), "--out", str(out), "--quiet"]) == 0
    return out


def test_simulate_outputs(sim_dir):
    names = set(os.listdir(sim_dir))
    assert {"config.json", "map_000.csv", "map_000.json", "bath_000.json", "manifest.json", "timings.json"} <= names
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert set(manifest["outputs"]) == names - {"manifest.json", "timings.json"}
    assert manifest["seeds"] == {"bath": 11, "dynamics": 12, "shot_noise": 13}
    assert manifest["diagnostics"]["shape"] == [12, 501]
    m = SwapMap.load(sim_dir / "map_000.csv")
    assert m.values.shape == (12, 501)


def test_resolved_config_reproduces_run(sim_dir, tmp_path):
    resolved = json.loads((sim_dir / "config.json").read_text())
    out = tmp_path / "again"
    assert cli.main(["simulate", "--config", write(tmp_path / "r.json", resolved), "--out", str(out), "--quiet"]) == 0
    assert (out / "manifest.json").read_bytes() == (sim_dir / "manifest.json").read_bytes()


def test_empty_bath_gives_flat_map(tmp_path, run_doc):
    run_doc["bath"] = {"sigma": 0.0, "tf_count": 0}
    run_doc["background_per_us"] = 0.01
    out = tmp_path / "flat"
    assert cli.main(["simulate", "--config", write(tmp_path / "e.json", run_doc), "--out", str(out), "--quiet"]) == 0
    m = SwapMap.load(out / "map_000.csv")
    assert (m.values == 0.01).all()
    ana = tmp_path / "flat_ana"
    assert cli.main(["analyze", str(out), "--out", str(ana), "--quiet"]) == 0
    d = json.loads((ana / "manifest.json").read_text())["diagnostics"]
    assert d["n_accepted"] == 0 and d["n_width_limited"] == 0


def test_analyze_rows_match_accepted_fits(sim_dir, tmp_path):
    out = tmp_path / "ana"
    assert cli.main(["analyze", str(sim_dir), "--out", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    d = manifest["diagnostics"]
    rows = io.read_table(out / "defects.csv")
    assert len(rows) == d["n_accepted"] > 0
    assert json.loads((out / "defects.json").read_text())["n_rows"] == len(rows)
    assert "n_rejected" in d and d["n_windows"] == d["n_accepted"] + d["n_rejected"]
    assert sum(d["rejection_reasons"].values()) == d["n_rejected"]
    assert sum(int(r["flagged"]) for r in rows) == d["n_flagged"]
    hist = io.read_table(out / "xi_histogram.csv")
    assert len(hist) == len(rows)
    stats = json.loads((out / "t1_stats.json").read_text())
    assert stats["n"] == 12 * 501
    assert len(io.read_table(out / "diffusivity.csv")) == d["n_tracks"]


def test_analyze_uses_config_options(sim_dir, tmp_path, run_doc):
    run_doc["analysis"] = {"n_sd": 3.0}
    strict = tmp_path / "strict"
    cfg = write(tmp_path / "a.json", run_doc)
    assert cli.main(["analyze", str(sim_dir), "--config", cfg, "--out", str(strict), "--quiet"]) == 0
    loose = tmp_path / "loose"
    assert cli.main(["analyze", str(sim_dir), "--out", str(loose), "--quiet"]) == 0
    n = [json.loads((p / "manifest.json").read_text())["diagnostics"]["n_windows"] for p in (strict, loose)]
    assert n[0] < n[1]


def test_analyze_schema_mismatch_names_field(sim_dir, tmp_path, capsys):
    side = sim_dir / "map_000.json"
    doc = json.loads(side.read_text())
    doc["schema_version"] = 99
    side.write_text(json.dumps(doc))
    assert cli.main(["analyze", str(sim_dir), "--out", str(tmp_path / "x"), "--quiet"]) == cli.EXIT_INPUT
    assert "schema_version" in capsys.readouterr().err
    del doc["freq_grid"]
    doc["schema_version"] = 1
    side.write_text(json.dumps(doc))
    assert cli.main(["analyze", str(sim_dir), "--out", str(tmp_path / "x"), "--quiet"]) == cli.EXIT_INPUT
    assert "freq_grid" in capsys.readouterr().err


def test_analyze_missing_inputs(tmp_path, capsys):
    assert cli.main(["analyze", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "x")]) == cli.EXIT_INPUT
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["analyze", str(empty), "--out", str(tmp_path / "x")]) == cli.EXIT_INPUT
    assert "map_*.csv" in capsys.readouterr().err


def test_analyze_rejects_mixed_bands(tmp_path):
    a = SwapMap([4.0, 4.001, 4.002], [0.0], [[1.0, 1.0, 1.0]])
    b = SwapMap([4.0, 4.002, 4.004], [0.0], [[1.0, 1.0, 1.0]])
    a.save(tmp_path / "map_a.csv")
    b.save(tmp_path / "map_b.csv")
    assert cli.main(["analyze", str(tmp_path), "--out", str(tmp_path / "x"), "--quiet"]) == cli.EXIT_INPUT


def test_invalid_config_exit_code_and_fields(tmp_path, run_doc, capsys):
    run_doc["bath"]["p_max"] = "five"
    del run_doc["seeds"]["dynamics"]
    code = cli.main(["simulate", "--config", write(tmp_path / "bad.json", run_doc), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "bath.p_max" in err and "seeds.dynamics" in err
    assert not (tmp_path / "o").exists()


def test_bad_realizations_override(tmp_path, run_doc):
    cfg = write(tmp_path / "run.json", run_doc)
    assert cli.main(["simulate", "--config", cfg, "--realizations", "0", "--out", str(tmp_path / "o")]) == 2


def test_seed_and_realization_overrides(tmp_path, run_doc):
    cfg = write(tmp_path / "run.json", run_doc)
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", cfg, "--seed", "5", "--realizations", "2", "--out", str(out),
                     "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"bath": 5, "dynamics": 5, "shot_noise": 5}
    per = manifest["diagnostics"]["realizations"]
    assert len(per) == 2 and per[0]["seeds"]["bath"] != per[1]["seeds"]["bath"]
    assert (out / "map_001.csv").exists()


def test_shot_noise_maps(tmp_path, run_doc):
    run_doc["shot_noise"] = {"enabled": True, "shots": 50, "n_delays": 12}
    run_doc["grids"] = {"n_scans": 1, "f_lo_GHz": 4.2, "f_hi_GHz": 4.25}
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", write(tmp_path / "run.json", run_doc), "--out", str(out),
                     "--quiet"]) == 0
    t1 = SwapMap.load(out / "t1map_000.csv")
    assert t1.quantity == "t1" and t1.values.shape == (1, 51)


def test_compare_report(tmp_path, run_doc):
    run_doc["realizations"] = 3
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", write(tmp_path / "run.json", run_doc), "--out", str(out),
                     "--quiet"]) == 0
    report = json.loads((out / "compare_report.json").read_text())
    res = report["results"]
    assert set(res) == {"slope_rate_identity_residual", "xi_slope_residual", "continuum_baseline_residual",
                        "lead_closed_form_max_z", "lead_1d_2d_ks"}
    assert res["slope_rate_identity_residual"]["value"] < 1e-10
    assert res["lead_closed_form_max_z"]["passed"] and res["lead_1d_2d_ks"]["value"] < 0.05


def test_selfcheck_passes(tmp_path):
    assert cli.main(["selfcheck", "--quiet", "--out", str(tmp_path)]) == 0
    results = json.loads((tmp_path / "selfcheck.json").read_text())
    assert all(r["passed"] for r in results) and len(results) >= 15


def test_selfcheck_names_corrupted_constant(monkeypatch, capsys):
    monkeypatch.setattr(units, "H", units.H * 1.001)
    assert cli.main(["selfcheck", "--quiet"]) == cli.EXIT_FAILED
    assert "constants-table" in capsys.readouterr().err


def test_selfcheck_crash_is_named_failure():
    def boom():
        raise RuntimeError("kaput")

    results = cli.run_selfcheck([("ok", lambda: (True, "fine")), ("boom", boom)])
    assert results[0][1] and not results[1][1]
    assert "kaput" in results[1][2]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tlsbath", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "selfcheck" in proc.stdout


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("name", io.scenario_names())
def test_every_preset_closes(tmp_path, name):
    # analyze(simulate(preset)) on a reduced grid: one realization, two scans, a 60 MHz slice
    doc = io.scenario_config(name).to_dict()
    doc["realizations"] = 1
    doc["grids"] = dict(doc.get("grids", {}), n_scans=2, f_lo_GHz=4.22, f_hi_GHz=4.28)
    doc["bath"] = dict(doc["bath"], f_lo=4.2, f_hi=4.3)
    sim, ana = tmp_path / "sim", tmp_path / "ana"
    assert cli.main(["simulate", "--config", write(tmp_path / "c.json", doc), "--out", str(sim), "--quiet"]) == 0
    assert cli.main(["analyze", str(sim), "--out", str(ana), "--quiet"]) == 0
    assert json.loads((ana / "manifest.json").read_text())["diagnostics"]["n_maps"] == 1

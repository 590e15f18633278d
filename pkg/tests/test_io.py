import json

import numpy as np
import pytest

from tlsbath import io
from tlsbath.bath import realization_seeds


def problems_of(doc):
    with pytest.raises(io.ConfigError) as exc:
        io.parse_config(doc)
    return exc.value.problems


def test_minimal_config_defaults(run_doc):
    cfg = io.parse_config(run_doc)
    assert cfg.geometry_preset == "gap5-long"
    assert cfg.bath.sigma == 0.5 and cfg.bath.tf_count == 4
    assert cfg.grids.n_scans == 12 and cfg.grids.freq_grid().size == 501
    assert cfg.realizations == 1


def test_round_trip_is_identity(run_doc):
    cfg = io.parse_config(run_doc)
    again = io.parse_config(cfg.to_dict())
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


def test_inline_geometry_round_trip(run_doc):
    run_doc["geometry"] = {"r_i_um": 90.0, "r_o_um": 110.0, "lead_style": "long_liftoff", "lead_length_um": 20.0}
    cfg = io.parse_config(run_doc)
    assert cfg.geometry_preset is None and cfg.geometry.gap == 20.0
    assert io.parse_config(cfg.to_dict()) == cfg


@pytest.mark.parametrize("name", io.scenario_names())
def test_shipped_scenarios_parse_and_round_trip(name):
    cfg = io.scenario_config(name)
    assert cfg.name == name
    assert io.parse_config(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_shipped_scenario_names():
    names = set(io.scenario_names())
    assert {"fig3f", "figC4-pmax2", "figC4-pmax5", "figC4-pmax10", "figC2-leadcheck"} <= names
    assert {f"gap{g}-{s}" for g in (5, 20, 100) for s in ("long", "short")} <= names


def test_fig3f_grid():
    cfg = io.scenario_config("fig3f")
    assert (cfg.grids.time_grid().size, cfg.grids.freq_grid().size) == (72, 501)
    assert cfg.geometry_preset == "gap100-short"


def test_pmax_scenarios_hold_sigma_pmax_squared():
    vals = [io.scenario_config(f"figC4-pmax{p}").bath for p in (2, 5, 10)]
    assert {round(b.sigma * b.p_max**2, 9) for b in vals} == {50.0}
    assert all(c.realizations >= 30 for c in map(io.scenario_config, ("figC4-pmax2", "figC4-pmax10")))


def test_seeds_are_mandatory(run_doc):
    del run_doc["seeds"]
    assert any(p.startswith("seeds:") for p in problems_of(run_doc))


def test_each_missing_seed_is_named(run_doc):
    run_doc["seeds"] = {"bath": 1}
    probs = problems_of(run_doc)
    assert any("seeds.dynamics" in p for p in probs) and any("seeds.shot_noise" in p for p in probs)


def test_seed_range_and_type(run_doc):
    run_doc["seeds"]["bath"] = -1
    run_doc["seeds"]["dynamics"] = 1.5
    probs = problems_of(run_doc)
    assert any(p.startswith("seeds.bath") for p in probs) and any(p.startswith("seeds.dynamics") for p in probs)


def test_all_problems_reported_together(run_doc):
    run_doc["schema_version"] = 2
    run_doc["colour"] = "red"
    run_doc["bath"]["sigma"] = "lots"
    run_doc["bath"]["p_max"] = -1.0
    run_doc["grids"]["n_scans"] = 0
    run_doc["analysis"] = {"gate_MHz": True}
    probs = problems_of(run_doc)
    for prefix in ("schema_version", "colour", "bath.sigma", "bath:", "grids.", "analysis.gate_MHz"):
        assert any(p.startswith(prefix) for p in probs), prefix
    assert "colour: unknown field" in probs


def test_unknown_nested_fields(run_doc):
    run_doc["grids"]["step"] = 1
    run_doc["bath"]["density"] = 1
    probs = problems_of(run_doc)
    assert "grids.step: unknown field" in probs and "bath.density: unknown field" in probs


def test_bath_seed_belongs_in_seeds(run_doc):
    run_doc["bath"]["seed"] = 4
    assert any(p.startswith("bath.seed") for p in problems_of(run_doc))


def test_unknown_preset_named(run_doc):
    run_doc["geometry"] = "gap50-long"
    assert any("gap50-long" in p for p in problems_of(run_doc))


def test_grid_must_lie_in_bath_band(run_doc):
    run_doc["grids"] = {"f_lo_GHz": 3.5}
    assert any(p.startswith("grids") and "bath band" in p for p in problems_of(run_doc))


def test_non_object_config():
    with pytest.raises(io.ConfigError):
        io.parse_config([1, 2])


def test_load_config_file_and_errors(tmp_path, run_doc):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(run_doc))
    assert io.load_config(path).name == "unit"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(io.ConfigError, match="JSON"):
        io.load_config(bad)
    assert io.load_config("fig3f").name == "fig3f"
    with pytest.raises(io.ConfigError):
        io.scenario_config("nope")


def test_content_hash_ignores_output_dir(run_doc):
    a = io.parse_config(run_doc)
    run_doc["output_dir"] = "elsewhere"
    b = io.parse_config(run_doc)
    assert a.content_hash() == b.content_hash()
    run_doc["bath"]["sigma"] = 0.6
    assert io.parse_config(run_doc).content_hash() != a.content_hash()


def test_seed_override_and_realizations(run_doc):
    cfg = io.parse_config(run_doc).with_seed(77)
    assert (cfg.seeds.bath, cfg.seeds.dynamics, cfg.seeds.shot_noise) == (77, 77, 77)
    many = cfg.with_realizations(3)
    derived = [many.seeds.for_realization(r, 3) for r in range(3)]
    assert [s.bath for s in derived] == realization_seeds(77, 3)
    assert cfg.seeds.for_realization(0, 1) == cfg.seeds


def test_bath_config_carries_seed(run_doc):
    cfg = io.parse_config(run_doc)
    assert cfg.bath_config(5).seed == 5 and cfg.bath_config(5).sigma == 0.5


def test_analysis_options_validation(run_doc):
    run_doc["analysis"] = {"max_misses": 0, "min_track_length": 3}
    probs = problems_of(run_doc)
    assert any("analysis.max_misses" in p for p in probs)


def test_write_json_deterministic_and_nan_safe(tmp_path):
    obj = {"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": np.bool_(True), "d": np.arange(2)}
    io.write_json(tmp_path / "x.json", obj)
    text = (tmp_path / "x.json").read_text()
    assert json.loads(text) == {"a": [2, None], "b": 1.5, "c": True, "d": [0, 1]}
    assert text.index('"a"') < text.index('"b"')


def test_table_round_trip(tmp_path):
    rows = [[1, 0.1, "x", True], [2, 1 / 3, "y", False]]
    io.write_table(tmp_path / "t.csv", ["i", "v", "s", "b"], rows, metadata={"m": 1}, units={"v": "us"})
    back = io.read_table(tmp_path / "t.csv")
    assert float(back[1]["v"]) == 1 / 3 and back[0]["b"] == "1"
    side = json.loads((tmp_path / "t.json").read_text())
    assert side["n_rows"] == 2 and side["columns"] == ["i", "v", "s", "b"] and side["units"] == {"v": "us"}


def test_manifest_checksums(tmp_path):
    (tmp_path / "a.txt").write_text("hello")
    m = io.build_manifest("simulate", "abc", {"bath": 1}, tmp_path, ["a.txt"], {"n": 1})
    assert m["outputs"]["a.txt"] == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
    assert m["schema_version"] == io.MANIFEST_SCHEMA_VERSION and m["artifact"] == "tlsbath"
    assert m["config_hash"] == "abc" and m["diagnostics"] == {"n": 1}

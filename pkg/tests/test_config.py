from pathlib import Path

import pytest

from thermsynth.config import load_config, parse_config
from thermsynth.errors import ConfigError
from thermsynth.scene import SceneParamRanges

MINIMAL = """
background_images_dir: bg
metadata_path: meta.csv
mesh_path: builtin:drone
output_root: out
"""


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(MINIMAL + "ranges: {d_min: 1, d_max: 10, roll_min: -10, roll_max: 10, yaw_min: 0, yaw_max: 360,"
                                 " x_min: -3, x_max: 3, y_min: -3, y_max: 3, n_config: 2}\n", base_dir=tmp_path)
    assert cfg.ranges == SceneParamRanges()
    assert cfg.ranges.n_config == 2 and (cfg.ranges.d_min, cfg.ranges.d_max) == (1, 10)
    assert cfg.background_images_dir == tmp_path / "bg" and cfg.output_root == tmp_path / "out"
    assert cfg.occlusion_threshold == 0.99 and cfg.new_class_id == "auto" and cfg.noise_sigma == 0.0
    assert cfg.pitch_mode.kind == "metadata" and cfg.supersample == 1


def test_defaults_match_explicit_ranges():
    assert parse_config(MINIMAL).ranges == SceneParamRanges()


def test_d_min_zero_rejected():
    with pytest.raises(ConfigError, match="d_min"):
        parse_config(MINIMAL + "ranges: {d_min: 0}\n")


def test_unknown_key_suggestion():
    with pytest.raises(ConfigError, match="did you mean 'd_max'"):
        parse_config(MINIMAL + "ranges: {dmax: 12}\n")
    with pytest.raises(ConfigError, match="'d_max' \\(under 'ranges'\\)"):
        parse_config(MINIMAL + "dmax: 12\n")
    with pytest.raises(ConfigError, match="did you mean 'master_seed'"):
        parse_config(MINIMAL + "master_sed: 3\n")


def test_missing_required():
    with pytest.raises(ConfigError, match="output_root"):
        parse_config("background_images_dir: bg\nmetadata_path: m.csv\nmesh_path: x.obj\n")


@pytest.mark.parametrize("text, kind, fields", [
    ("pitch_mode: metadata", "metadata", {}),
    ("pitch_mode: {fixed: 0}", "fixed", {"value": 0.0}),
    ("pitch_mode: {random: [0, 90]}", "random", {"low": 0.0, "high": 90.0}),
])
def test_pitch_modes(text, kind, fields):
    mode = parse_config(MINIMAL + text + "\n").pitch_mode
    assert mode.kind == kind
    for k, v in fields.items():
        assert getattr(mode, k) == v


@pytest.mark.parametrize("extra", [
    "pitch_mode: sideways", "pitch_mode: {random: [90, 0]}", "occlusion_threshold: 1.5", "supersample: 2",
    "noise_sigma: -1", "hfov_deg: 180", "new_class_id: -2", "workers: 0", "drop_class_ids: 4",
    "ranges: [1, 2]", "master_seed: abc", "ranges: {roll_min: 5, roll_max: -5}",
])
def test_invalid_values(extra):
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + extra + "\n")


def test_not_a_mapping_or_yaml():
    with pytest.raises(ConfigError):
        parse_config("- a\n- b\n")
    with pytest.raises(ConfigError):
        parse_config("a: [1, 2\n")


def test_builtin_mesh_resolution():
    cfg = parse_config(MINIMAL)
    mesh, mats = cfg.mesh_files()
    assert mesh.name == "drone.obj" and mats.exists()
    custom = parse_config(MINIMAL.replace("builtin:drone", "m/part.obj"), base_dir="/data")
    assert custom.mesh_path == str(Path("/data/m/part.obj"))
    with pytest.raises(ConfigError, match="material_sidecar_path"):
        custom.mesh_files()


def test_resolved_echo_round_trips(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(MINIMAL + "pitch_mode: {random: [10, 20]}\nmaster_seed: 9\n")
    cfg = load_config(p)
    echo = cfg.resolved()
    assert echo["pitch_mode"] == {"random": [10.0, 20.0]} and echo["master_seed"] == 9
    assert echo["ranges"]["n_config"] == 2 and echo["mesh_path"] == "builtin:drone"


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")

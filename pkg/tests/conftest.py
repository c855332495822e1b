from pathlib import Path

import numpy as np
import pytest
import yaml

from thermsynth.assets import builtin_paths
from thermsynth.dataset_io import ThermalImage, save_image
from thermsynth.mesh import load_mesh_files


@pytest.fixture(scope="session")
def drone():
    return load_mesh_files(*builtin_paths("drone"))


@pytest.fixture(scope="session")
def deer():
    return load_mesh_files(*builtin_paths("deer"))


def make_dataset(root: Path, pitches, *, size=(640, 512), labels=None, splits=None, seed=0, **config):
    """Write dummy backgrounds, metadata and a config file; return the config path.

    ``pitches`` is a list of pitch values (None for a missing cell). ``labels``
    maps background index to label-file text.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    (root / "bg").mkdir(parents=True, exist_ok=True)
    rows = ["image_id,camera_pitch_deg,altitude_m,split"]
    W, H = size
    for i, p in enumerate(pitches):
        bg_id = f"bg_{i:03d}"
        img = rng.integers(0, 160, size=(H, W), dtype=np.uint8)
        save_image(ThermalImage.from_array(img), root / "bg" / f"{bg_id}.png")
        split = splits[i] if splits else "train"
        rows.append(f"{bg_id},{'' if p is None else p},80,{split}")
    (root / "meta.csv").write_text("\n".join(rows) + "\n")
    cfg = {
        "background_images_dir": "bg",
        "metadata_path": "meta.csv",
        "mesh_path": "builtin:drone",
        "output_root": "out",
    }
    if labels:
        (root / "lbl").mkdir(exist_ok=True)
        for i, text in labels.items():
            (root / "lbl" / f"bg_{i:03d}.txt").write_text(text)
        cfg["background_labels_dir"] = "lbl"
    cfg.update(config)
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=True))
    return path


@pytest.fixture
def dataset_factory(tmp_path):
    def factory(pitches, **kw):
        return make_dataset(tmp_path, pitches, **kw)

    return factory


# -- acceptance reporting ---------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported as PASS/FAIL")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        number, title = marker.args
        entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})
        entry["ok"] &= report.passed
        if report.when == "call":
            entry["notes"] += [v for k, v in item.user_properties if k == "detail"]
    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number} {'PASS' if e['ok'] else 'FAIL'}: {e['title']}")
        for note in e["notes"]:
            terminalreporter.write_line(f"    {note}")

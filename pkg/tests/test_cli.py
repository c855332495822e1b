import json
import subprocess
import sys

import pytest

from thermsynth.cli import main

SMALL = (160, 128)


def test_generate_json_summary(dataset_factory, capsys):
    cfg = dataset_factory([30.0, None, 60.0], size=SMALL)
    assert main(["generate", "--config", str(cfg), "--json", "--seed", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["images_written"] == 4 and out["backgrounds_filtered"] == 1
    echo = json.loads((cfg.parent / "out" / "config.resolved.json").read_text())
    assert echo["master_seed"] == 4


def test_generate_flags(dataset_factory, tmp_path):
    cfg = dataset_factory([45.0], size=SMALL)
    dump = tmp_path / "scenes.jsonl"
    assert main(["generate", "--config", str(cfg), "--mask-png", "--debug-dumps", "--dump-configs", str(dump)]) == 0
    out = cfg.parent / "out"
    assert len(list((out / "masks").rglob("*.png"))) == 2
    assert len(list((out / "debug").rglob("*_alpha.png"))) == 2
    assert len(dump.read_text().splitlines()) == 2
    assert main(["generate", "--config", str(cfg), "--resume", "--json"]) == 0


def test_exit_codes(dataset_factory, tmp_path, caplog):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["--help"]) == 0
    assert main(["generate", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("flavour: 1\n")
    assert main(["generate", "--config", str(bad)]) == 1
    # data error: a background image that is not an image
    cfg = dataset_factory([45.0, 50.0], size=SMALL)
    (cfg.parent / "bg" / "bg_000.png").write_bytes(b"x")
    assert main(["generate", "--config", str(cfg)]) == 2
    assert "bg_000" in caplog.text
    assert main(["generate", "--config", str(cfg), "--keep-going"]) == 2


def test_unwritable_output_root_is_io_error(dataset_factory):
    cfg = dataset_factory([45.0], size=SMALL, output_root="blocker/out")
    blocker = cfg.parent / "blocker"
    blocker.write_text("a file, not a directory")
    assert main(["generate", "--config", str(cfg)]) == 3


def test_missing_background_dir_is_io_error(dataset_factory):
    cfg = dataset_factory([45.0], size=SMALL, background_images_dir="nowhere")
    assert main(["generate", "--config", str(cfg)]) == 3


def test_validate_and_eval(dataset_factory, capsys):
    cfg = dataset_factory([30.0, 60.0], size=SMALL, labels={0: "0 0.1 0.1 0.05 0.05\n", 1: "1 0.9 0.9 0.05 0.05\n"})
    assert main(["generate", "--config", str(cfg)]) == 0
    out = cfg.parent / "out"
    capsys.readouterr()
    assert main(["validate", str(out / "images"), str(out / "labels"), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["invalid_lines"] == [] and rep["images"] == 4
    assert main(["validate", str(out / "images"), str(out / "labels")]) == 0
    assert "invalid lines: 0" in capsys.readouterr().out

    pred = cfg.parent / "pred"
    for p in (out / "labels").rglob("*.txt"):
        dst = pred / p.relative_to(out / "labels")
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_text("".join(line + " 0.900000\n" for line in p.read_text().splitlines()))
    assert main(["eval", str(out / "labels"), str(pred), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["overall"]["ap50"] == 1.0 and rep["overall"]["ap50_95"] == 1.0
    assert main(["eval", str(out / "labels"), str(pred), "--iou", "0.7"]) == 0
    assert capsys.readouterr().out.split()[:7] == ["Class", "Images", "Instances", "P", "R", "mAP50", "mAP50-95"]
    # ground-truth lines lack confidence: data error
    assert main(["eval", str(out / "labels"), str(out / "labels")]) == 2
    (out / "labels" / "broken.txt").write_text("0 0.5\n")
    assert main(["validate", str(out / "images"), str(out / "labels")]) == 2


def test_preview_command(dataset_factory, tmp_path, capsys):
    cfg = dataset_factory([45.0], size=SMALL)
    assert main(["preview", "--config", str(cfg), "--background", "bg_000", "--out", str(tmp_path / "pv")]) == 0
    lines = dict(l.split(": ", 1) for l in capsys.readouterr().out.splitlines())
    assert set(lines) == {"root", "image", "label"}
    assert main(["preview", "--config", str(cfg), "--background", "nope"]) == 2


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "thermsynth.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "generate" in res.stdout

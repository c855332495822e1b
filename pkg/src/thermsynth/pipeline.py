"""End-to-end generation: scenes, renders, composites, labels and manifest."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .annotator import annotate_mask, extract_mask, merge_annotations
from .compositor import alpha_over, label_path, output_path
from .config import PipelineConfig
from .dataset_io import (
    Annotation, AnnotationSet, ImageMetadata, ThermalImage, drop_class, filter_missing_metadata,
    load_image, load_metadata_file, parse_label_file, read_label_file, save_image, serialize_annotations,
)
from .errors import DataError, GenerationError, ParseError
from .mesh import load_mesh_files
from .render import ObjectPose, render, write_debug_channels
from .scene import build_camera, derive_rng_stream, sample_scene_config

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")
MANIFEST_NAME = "manifest.jsonl"
CONFIG_ECHO_NAME = "config.resolved.json"
DEFAULT_SPLIT = "train"


@dataclass
class Background:
    image_id: str
    path: Path
    metadata: ImageMetadata
    label_path: Path | None = None

    @property
    def split(self) -> str:
        return self.metadata.split or DEFAULT_SPLIT


@dataclass
class GenerationSummary:
    images_written: int = 0
    labels_written: int = 0
    originals_dropped: int = 0
    empty_synthetic: int = 0
    backgrounds_total: int = 0
    backgrounds_filtered: int = 0
    backgrounds_resumed: int = 0
    new_class_id: int = 0
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def discover_images(directory: Path) -> dict[str, Path]:
    """Map image id (file stem) to path for every PNG/PGM under ``directory``."""
    out: dict[str, Path] = {}
    for p in sorted(Path(directory).rglob("*")):
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
            if p.stem in out:
                raise DataError(f"duplicate background id {p.stem!r}: {out[p.stem]} and {p}")
            out[p.stem] = p
    return out


def discover_labels(directory: Path | None) -> dict[str, Path]:
    if directory is None or not Path(directory).is_dir():
        return {}
    return {p.stem: p for p in sorted(Path(directory).rglob("*.txt"))}


def plan_backgrounds(config: PipelineConfig) -> tuple[list[Background], int]:
    """Backgrounds to process (sorted by id) and how many were filtered out.

    In metadata pitch mode, backgrounds without a camera pitch (or absent
    from the metadata table) are excluded.
    """
    if not config.background_images_dir.is_dir():
        raise FileNotFoundError(f"background directory {config.background_images_dir} not found")
    images = discover_images(config.background_images_dir)
    metadata = load_metadata_file(config.metadata_path)
    labels = discover_labels(config.background_labels_dir)
    records = [metadata.get(i, ImageMetadata(i)) for i in sorted(images)]
    if config.pitch_mode.kind == "metadata":
        kept, frac = filter_missing_metadata(records)
        filtered = len(records) - len(kept)
        if filtered:
            log.warning("excluded %d of %d backgrounds without camera pitch (%.2f%%)",
                        filtered, len(records), 100 * frac)
    else:
        kept, filtered = records, 0
    return [Background(r.image_id, images[r.image_id], r, labels.get(r.image_id)) for r in kept], filtered


def load_originals(bg: Background, drop_ids) -> AnnotationSet:
    if bg.label_path is None:
        return AnnotationSet(bg.image_id, ())
    aset = read_label_file(bg.label_path, "mixed")
    for cid in drop_ids:
        aset = drop_class(aset, cid)
    return replace(aset, image_id=bg.image_id)


def resolve_new_class_id(config: PipelineConfig, backgrounds: list[Background]) -> int:
    if config.new_class_id != "auto":
        return int(config.new_class_id)
    top = -1
    for bg in backgrounds:
        for a in load_originals(bg, config.drop_class_ids):
            top = max(top, a.class_id)
    return top + 1


def _as_aabb(a: Annotation) -> Annotation:
    return a if a.aabb is not None else replace(a, aabb=a.bounding_aabb())


def _as_obb(a: Annotation) -> Annotation:
    if a.obb is not None:
        return a
    cx, cy, w, h = a.bounding_aabb()
    return replace(a, obb=((cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2),
                           (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)))


def scene_for(config: PipelineConfig, bg: Background, index: int):
    """Sampled scene plus its stream, positioned after the five scene draws."""
    stream = derive_rng_stream(config.master_seed, bg.image_id, index)
    scene = sample_scene_config(config.ranges, bg.metadata.camera_pitch_deg, stream, bg.image_id, index)
    return scene, stream


class SceneGenerator:
    """Holds the loaded assets and renders one background's scenes."""

    def __init__(self, config: PipelineConfig, new_class_id: int):
        self.config = config
        self.new_class_id = new_class_id
        self.mesh, self.materials = load_mesh_files(*config.mesh_files())

    def process(self, bg: Background, write: bool = True, root: Path | None = None) -> list[dict]:
        cfg = self.config
        root = Path(root or cfg.output_root)
        background = load_image(bg.path)
        originals = load_originals(bg, cfg.drop_class_ids)
        rows = []
        for index in range(cfg.ranges.n_config):
            scene, stream = scene_for(cfg, bg, index)
            camera = build_camera(scene, background.width, background.height, cfg.hfov_deg, cfg.pitch_mode, stream)
            pose = ObjectPose(scene.object_yaw_deg, scene.object_x_m, scene.object_y_m)
            out = render(self.mesh, self.materials, camera, pose, supersample=cfg.supersample)
            composite = alpha_over(out.intensity, out.alpha, background, noise_sigma=cfg.noise_sigma, rng=stream)
            mask = extract_mask(out, 1)
            synth_ann = annotate_mask(mask, self.new_class_id, cfg.simplify_eps)
            synthetic = AnnotationSet(bg.image_id, (synth_ann,) if synth_ann else ())
            merged = merge_annotations(originals, synthetic, out.alpha, cfg.occlusion_threshold)
            dropped = len(originals) - (len(merged) - len(synthetic))

            pitch = camera.pitch_deg
            rel_img = output_path(scene, pitch, bg.split)
            rel_lbl = label_path(scene, pitch, bg.split)
            rel_obb = label_path(scene, pitch, bg.split, tree="labels_obb")
            rel_seg = label_path(scene, pitch, bg.split, tree="labels_seg")
            row = {
                "background_id": bg.image_id,
                "config_index": index,
                "split": bg.split,
                "metadata_pitch_deg": bg.metadata.camera_pitch_deg,
                "camera_pitch_deg": pitch,
                "distance_m": scene.distance_m,
                "camera_roll_deg": scene.camera_roll_deg,
                "object_yaw_deg": scene.object_yaw_deg,
                "object_x_m": scene.object_x_m,
                "object_y_m": scene.object_y_m,
                "pitch_mode": cfg.pitch_mode.kind,
                "in_frustum": synth_ann is not None,
                "synthetic_class_id": self.new_class_id,
                "synthetic_pixels": mask.count(),
                "originals": len(originals),
                "originals_dropped": dropped,
                "image_path": rel_img.as_posix(),
                "label_path": rel_lbl.as_posix(),
                "obb_label_path": rel_obb.as_posix(),
                "seg_label_path": rel_seg.as_posix(),
            }
            if write:
                save_image(composite, root / rel_img)
                _write_text(root / rel_lbl, serialize_annotations([_as_aabb(a) for a in merged], "aabb"))
                _write_text(root / rel_obb, serialize_annotations([_as_obb(a) for a in merged], "obb"))
                _write_text(root / rel_seg, serialize_annotations(synthetic, "polygon"))
                if cfg.debug_dumps:
                    stem = root / output_path(scene, pitch, bg.split, tree="debug", suffix="")
                    write_debug_channels(out, stem)
                if cfg.mask_png:
                    m = ThermalImage.from_array(mask.bits.astype(np.uint8) * 255)
                    save_image(m, root / output_path(scene, pitch, bg.split, tree="masks"))
                row["image_sha256"] = sha256_file(root / rel_img)
                row["label_sha256"] = sha256_file(root / rel_lbl)
            rows.append(row)
        return rows


_worker: SceneGenerator | None = None


def _init_worker(config: PipelineConfig, new_class_id: int) -> None:
    global _worker
    _worker = SceneGenerator(config, new_class_id)


def _run_one(bg: Background):
    try:
        return bg.image_id, _worker.process(bg), None
    except Exception as exc:  # reported by the parent with the background id
        return bg.image_id, None, exc


def _verified_rows(root: Path, n_config: int) -> dict[str, list[dict]]:
    """Existing manifest rows grouped by background, kept only if files still match."""
    path = root / MANIFEST_NAME
    if not path.exists():
        return {}
    groups: dict[str, list[dict]] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            row = json.loads(line)
            groups.setdefault(row["background_id"], []).append(row)
    ok = {}
    for bg_id, rows in groups.items():
        if len(rows) != n_config:
            continue
        good = all(
            (root / r["image_path"]).exists() and (root / r["label_path"]).exists()
            and sha256_file(root / r["image_path"]) == r.get("image_sha256")
            and sha256_file(root / r["label_path"]) == r.get("label_sha256")
            for r in rows
        )
        if good:
            ok[bg_id] = sorted(rows, key=lambda r: r["config_index"])
    return ok


def run_generation(
    config: PipelineConfig,
    *,
    resume: bool = False,
    keep_going: bool = False,
    dump_configs=None,
    workers: int | None = None,
    progress: bool = True,
) -> GenerationSummary:
    """Generate ``n_config`` composites per retained background.

    Every output byte is determined by the config and master seed: each
    scene draws from its own stream keyed by (seed, background id, config
    index), and manifest rows are written in (background id, config index)
    order regardless of worker scheduling.

    Raises:
        GenerationError: on the first failing background unless ``keep_going``.
    """
    root = config.output_root
    root.mkdir(parents=True, exist_ok=True)
    backgrounds, filtered = plan_backgrounds(config)
    new_class_id = resolve_new_class_id(config, backgrounds)
    summary = GenerationSummary(backgrounds_total=len(backgrounds) + filtered, backgrounds_filtered=filtered,
                                new_class_id=new_class_id)

    echo = dict(config.resolved(), new_class_id_resolved=new_class_id)
    echo_text = json.dumps(echo, indent=2, sort_keys=True) + "\n"
    _write_text(root / CONFIG_ECHO_NAME, echo_text)
    config_hash = hashlib.sha256(echo_text.encode()).hexdigest()

    reuse = _verified_rows(root, config.ranges.n_config) if resume else {}
    todo = [bg for bg in backgrounds if bg.image_id not in reuse]
    summary.backgrounds_resumed = len(backgrounds) - len(todo)

    workers = workers or config.workers
    if workers > 1 and len(todo) > 1:
        pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config, new_class_id))
        results = pool.map(_run_one, todo, chunksize=max(1, len(todo) // (4 * workers)))
    else:
        pool = None
        gen = SceneGenerator(config, new_class_id)

        def _serial():
            for bg in todo:
                try:
                    yield bg.image_id, gen.process(bg), None
                except Exception as exc:  # noqa: BLE001
                    yield bg.image_id, None, exc

        results = _serial()

    fresh: dict[str, list[dict]] = {}
    manifest_tmp = root / (MANIFEST_NAME + ".tmp")
    try:
        done = 0
        for bg_id, rows, exc in results:
            if exc is not None:
                if not keep_going:
                    raise GenerationError(bg_id, exc) from exc
                log.error("background %s failed: %s", bg_id, exc)
                summary.failures.append(bg_id)
                continue
            fresh[bg_id] = rows
            done += 1
            if progress and (done % 25 == 0 or done == len(todo)):
                log.info("generated %d/%d backgrounds", done, len(todo))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)

    with open(manifest_tmp, "w", encoding="utf-8", newline="\n") as f:
        for bg in backgrounds:
            rows = reuse.get(bg.image_id) or fresh.get(bg.image_id)
            if rows is None:
                continue
            for row in rows:
                row = dict(row, config_sha256=config_hash)
                f.write(json.dumps(row, sort_keys=True) + "\n")
                summary.images_written += 1
                summary.labels_written += 1
                summary.originals_dropped += row["originals_dropped"]
                summary.empty_synthetic += 0 if row["in_frustum"] else 1
    os.replace(manifest_tmp, root / MANIFEST_NAME)

    if dump_configs:
        with open(dump_configs, "w", encoding="utf-8", newline="\n") as f:
            for bg in backgrounds:
                for i in range(config.ranges.n_config):
                    scene, stream = scene_for(config, bg, i)
                    camera = build_camera(scene, 1, 1, config.hfov_deg, config.pitch_mode, stream)
                    rec = dict(scene.to_dict(), effective_pitch_deg=camera.pitch_deg)
                    f.write(json.dumps(rec, sort_keys=True) + "\n")
    return summary


def preview(config: PipelineConfig, background_id: str, out_dir=None) -> dict[str, Path]:
    """Render config index 0 of one background with debug channel dumps."""
    backgrounds, _ = plan_backgrounds(config)
    match = [bg for bg in backgrounds if bg.image_id == background_id]
    if not match:
        raise DataError(f"background {background_id!r} not found (or filtered for missing metadata)")
    bg = match[0]
    out_dir = Path(out_dir or config.output_root / "preview")
    single = replace(config, debug_dumps=True, ranges=replace(config.ranges, n_config=1))
    gen = SceneGenerator(single, resolve_new_class_id(config, backgrounds))
    rows = gen.process(bg, write=True, root=out_dir)
    return {"root": out_dir, "image": out_dir / rows[0]["image_path"], "label": out_dir / rows[0]["label_path"]}


# ---------------------------------------------------------------------------
# validation


def validate_dataset(images_dir, labels_dir) -> dict:
    """Non-mutating scan pairing images and label files by relative path.

    Every label line is checked individually with the label-file parser, so
    all invalid lines are reported, not only the first per file.
    """
    images_dir, labels_dir = Path(images_dir), Path(labels_dir)
    imgs = {p.relative_to(images_dir).with_suffix("").as_posix(): p
            for p in sorted(images_dir.rglob("*")) if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES}
    lbls = {p.relative_to(labels_dir).with_suffix("").as_posix(): p for p in sorted(labels_dir.rglob("*.txt"))}
    invalid = []
    hist: dict[int, int] = {}
    areas = []
    for key, path in lbls.items():
        text = path.read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.split():
                continue
            try:
                ann = parse_label_file(line, "mixed").annotations[0]
            except ParseError as exc:
                invalid.append(f"{path}:{lineno}: {exc.detail}")
                continue
            hist[ann.class_id] = hist.get(ann.class_id, 0) + 1
            _, _, w, h = ann.bounding_aabb()
            areas.append(w * h)
    stats = {"count": len(areas)}
    if areas:
        a = np.asarray(areas)
        stats.update(min=float(a.min()), mean=float(a.mean()), max=float(a.max()))
    return {
        "images": len(imgs),
        "labels": len(lbls),
        "orphan_labels": sorted(k for k in lbls if k not in imgs),
        "orphan_images": sorted(k for k in imgs if k not in lbls),
        "invalid_lines": invalid,
        "class_histogram": {str(k): v for k, v in sorted(hist.items())},
        "bbox_area_stats": stats,
    }


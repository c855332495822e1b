"""Pipeline configuration (YAML) with strict key checking."""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .scene import DEFAULT_HFOV_DEG, PitchMode, SceneParamRanges

BUILTIN_PREFIX = "builtin:"

_RANGE_KEYS = [f.name for f in fields(SceneParamRanges)]
_REQUIRED = ("background_images_dir", "metadata_path", "mesh_path", "output_root")


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved generation settings.

    Defaults: pitch_mode ``metadata``, occlusion_threshold 0.99,
    new_class_id ``auto`` (max original id + 1), no dropped classes,
    master_seed 0, hfov 58 deg, supersample 1, noise_sigma 0,
    simplify_eps 0.5 px.
    """

    background_images_dir: Path
    metadata_path: Path
    mesh_path: str
    output_root: Path
    background_labels_dir: Path | None = None
    material_sidecar_path: str | None = None
    ranges: SceneParamRanges = field(default_factory=SceneParamRanges)
    pitch_mode: PitchMode = field(default_factory=PitchMode)
    occlusion_threshold: float = 0.99
    new_class_id: int | str = "auto"
    drop_class_ids: tuple[int, ...] = ()
    master_seed: int = 0
    hfov_deg: float = DEFAULT_HFOV_DEG
    supersample: int = 1
    noise_sigma: float = 0.0
    simplify_eps: float = 0.5
    debug_dumps: bool = False
    mask_png: bool = False
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    def mesh_files(self) -> tuple[Path, Path]:
        """Mesh and material sidecar paths, resolving ``builtin:<name>``."""
        from .assets import builtin_paths

        if self.mesh_path.startswith(BUILTIN_PREFIX):
            mesh, mats = builtin_paths(self.mesh_path[len(BUILTIN_PREFIX):])
        else:
            mesh, mats = Path(self.mesh_path), None
        if self.material_sidecar_path:
            mats = Path(self.material_sidecar_path)
        if mats is None:
            raise ConfigError("material_sidecar_path is required for a non-builtin mesh")
        return mesh, mats

    def resolved(self) -> dict:
        """Config echo for the output tree (raw values plus filled defaults)."""
        out = {
            "background_images_dir": self.raw.get("background_images_dir"),
            "background_labels_dir": self.raw.get("background_labels_dir"),
            "metadata_path": self.raw.get("metadata_path"),
            "mesh_path": self.mesh_path if self.mesh_path.startswith(BUILTIN_PREFIX) else self.raw.get("mesh_path"),
            "material_sidecar_path": self.raw.get("material_sidecar_path"),
            "output_root": self.raw.get("output_root"),
            "ranges": {k: getattr(self.ranges, k) for k in _RANGE_KEYS},
            "pitch_mode": self.pitch_mode.describe(),
        }
        for k in ("occlusion_threshold", "new_class_id", "master_seed", "hfov_deg", "supersample",
                  "noise_sigma", "simplify_eps"):
            out[k] = getattr(self, k)
        out["drop_class_ids"] = list(self.drop_class_ids)
        return out


_KNOWN = [f.name for f in fields(PipelineConfig) if f.name != "raw"]


def _suggest(key: str) -> str:
    top = difflib.get_close_matches(key, _KNOWN, n=1, cutoff=0.6)
    if top:
        return f"; did you mean {top[0]!r}?"
    nested = difflib.get_close_matches(key, _RANGE_KEYS, n=1, cutoff=0.6)
    if nested:
        return f"; did you mean {nested[0]!r} (under 'ranges')?"
    return ""


def _parse_pitch_mode(value) -> PitchMode:
    if value is None or value == "metadata":
        return PitchMode()
    if isinstance(value, dict) and len(value) == 1:
        (kind, arg), = value.items()
        if kind == "fixed":
            return PitchMode.fixed(float(arg))
        if kind == "random":
            lo, hi = arg
            return PitchMode.random(float(lo), float(hi))
    raise ConfigError(f"pitch_mode must be 'metadata', {{fixed: deg}} or {{random: [lo, hi]}}, got {value!r}")


def parse_config(text: str, base_dir=None) -> PipelineConfig:
    """Parse YAML config text. Relative paths resolve against ``base_dir``.

    Raises:
        ConfigError: on unknown keys (with a spelling suggestion), missing
            required keys or invalid values.
    """
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    for key in data:
        if key not in _KNOWN:
            raise ConfigError(f"unknown config key {key!r}{_suggest(str(key))}")
    missing = [k for k in _REQUIRED if not data.get(k)]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")

    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def path(key):
        v = data.get(key)
        if v in (None, ""):
            return None
        p = Path(str(v)).expanduser()
        return p if p.is_absolute() else base / p

    ranges_in = data.get("ranges") or {}
    if not isinstance(ranges_in, dict):
        raise ConfigError("ranges must be a mapping")
    for key in ranges_in:
        if key not in _RANGE_KEYS:
            close = difflib.get_close_matches(str(key), _RANGE_KEYS, n=1, cutoff=0.6)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown ranges key {key!r}{hint}")
    try:
        ranges = SceneParamRanges(**{k: (int(v) if k == "n_config" else float(v)) for k, v in ranges_in.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid ranges: {exc}") from None

    mesh_path = str(data["mesh_path"])
    if not mesh_path.startswith(BUILTIN_PREFIX):
        mesh_path = str(path("mesh_path"))
    sidecar = path("material_sidecar_path")

    def num(key, default, typ=float):
        v = data.get(key, default)
        try:
            return typ(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected {typ.__name__}, got {v!r}") from None

    threshold = num("occlusion_threshold", 0.99)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"occlusion_threshold must be in [0, 1], got {threshold}")
    new_class = data.get("new_class_id", "auto")
    if new_class != "auto":
        new_class = num("new_class_id", None, int)
        if new_class < 0:
            raise ConfigError("new_class_id must be non-negative")
    hfov = num("hfov_deg", DEFAULT_HFOV_DEG)
    if not 0.0 < hfov < 180.0:
        raise ConfigError(f"hfov_deg must be in (0, 180), got {hfov}")
    supersample = num("supersample", 1, int)
    if supersample not in (1, 4):
        raise ConfigError("supersample must be 1 or 4")
    sigma = num("noise_sigma", 0.0)
    if sigma < 0:
        raise ConfigError("noise_sigma must be >= 0")
    eps = num("simplify_eps", 0.5)
    if eps < 0:
        raise ConfigError("simplify_eps must be >= 0")
    workers = num("workers", 1, int)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    drop = data.get("drop_class_ids") or []
    if not isinstance(drop, list):
        raise ConfigError("drop_class_ids must be a list")

    return PipelineConfig(
        background_images_dir=path("background_images_dir"),
        metadata_path=path("metadata_path"),
        mesh_path=mesh_path,
        output_root=path("output_root"),
        background_labels_dir=path("background_labels_dir"),
        material_sidecar_path=str(sidecar) if sidecar else None,
        ranges=ranges,
        pitch_mode=_parse_pitch_mode(data.get("pitch_mode")),
        occlusion_threshold=threshold,
        new_class_id=new_class,
        drop_class_ids=tuple(int(c) for c in drop),
        master_seed=num("master_seed", 0, int),
        hfov_deg=hfov,
        supersample=supersample,
        noise_sigma=sigma,
        simplify_eps=eps,
        debug_dumps=bool(data.get("debug_dumps", False)),
        mask_png=bool(data.get("mask_png", False)),
        workers=workers,
        raw=dict(data),
    )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)

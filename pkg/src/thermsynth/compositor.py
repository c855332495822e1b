"""Grayscale conversion, alpha-over blending and output layout."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import PurePosixPath

import numpy as np

from .dataset_io import ThermalImage
from .errors import DataError
from .scene import SceneConfig

REC709 = np.array([0.2126, 0.7152, 0.0722])
ANGLE_BUCKET_DEG = 5


@dataclass(frozen=True)
class CompositeResult:
    image: ThermalImage
    source_background: str
    scene: SceneConfig


def rgb_to_grayscale(rgb) -> ThermalImage:
    """Rec.709 luma of an (H, W, 3) 8-bit image, rounded half-to-even."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected a 3-channel image, got shape {arr.shape}")
    y = arr.astype(np.float64) @ REC709
    return ThermalImage.from_array(np.clip(np.round(y), 0, 255).astype(np.uint8))


def alpha_over(fg_intensity, alpha, bg: ThermalImage, *, noise_sigma: float = 0.0, rng=None) -> ThermalImage:
    """Blend a [0, 1] foreground over an 8-bit background.

    ``out = a * 255 * fg + (1 - a) * bg``, blended in float64 and quantized
    once with half-to-even rounding. Pixels with ``a == 0`` are copied from
    ``bg`` bit-exactly. Optional Gaussian noise is added to covered pixels
    only, so the background stays untouched.
    """
    fg = np.asarray(fg_intensity, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if fg.shape != bg.data.shape or a.shape != bg.data.shape:
        raise DataError(f"buffer shapes {fg.shape}/{a.shape} do not match background {bg.data.shape}")
    base = bg.data.astype(np.float64)
    blended = a * (255.0 * fg) + (1.0 - a) * base
    covered = a > 0
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise needs a random generator")
        blended = blended + covered * rng.normal(0.0, noise_sigma, size=blended.shape)
    out = np.clip(np.round(blended), 0, 255).astype(np.uint8)
    out = np.where(covered, out, bg.data)
    return ThermalImage.from_array(out)


def angle_bucket(pitch_deg: float) -> str:
    """Directory name for a pitch, rounded to the nearest 5 degrees (halves up)."""
    b = int(math.floor(pitch_deg / ANGLE_BUCKET_DEG + 0.5)) * ANGLE_BUCKET_DEG
    return f"angle_{b:03d}" if b >= 0 else f"angle_-{-b:03d}"


def output_path(scene: SceneConfig, pitch_deg: float, split: str, tree: str = "images", suffix: str = ".png") -> PurePosixPath:
    """Relative output path, e.g. ``images/train/angle_030/bg_001_cfg0.png``."""
    name = f"{scene.background_id}_cfg{scene.config_index}{suffix}"
    return PurePosixPath(tree, split, angle_bucket(pitch_deg), name)


def label_path(scene: SceneConfig, pitch_deg: float, split: str, tree: str = "labels") -> PurePosixPath:
    return output_path(scene, pitch_deg, split, tree=tree, suffix=".txt")

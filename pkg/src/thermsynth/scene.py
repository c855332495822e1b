"""Randomized virtual-scene configurations and background-aligned cameras."""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass

import numpy as np

from .camera import CameraModel
from .errors import ConfigError, DataError

DEFAULT_HFOV_DEG = 58.0
_STREAM_KEY = b"thermsynth/scene-stream/v1"


@dataclass(frozen=True)
class SceneParamRanges:
    """Bounds for the per-scene random parameters.

    Defaults: d in [1, 10] m, roll in [-10, 10] deg,
    yaw in [0, 360) deg, object position in [-3, 3] m, two scenes per background.
    """

    n_config: int = 2
    d_min: float = 1.0
    d_max: float = 10.0
    roll_min: float = -10.0
    roll_max: float = 10.0
    yaw_min: float = 0.0
    yaw_max: float = 360.0
    x_min: float = -3.0
    x_max: float = 3.0
    y_min: float = -3.0
    y_max: float = 3.0

    def __post_init__(self):
        if int(self.n_config) != self.n_config or self.n_config < 1:
            raise ConfigError(f"n_config must be a positive integer, got {self.n_config}")
        if not self.d_min > 0:
            raise ConfigError(f"d_min must be > 0 (camera cannot sit at the scene origin), got {self.d_min}")
        for name in ("d", "roll", "yaw", "x", "y"):
            lo, hi = getattr(self, f"{name}_min"), getattr(self, f"{name}_max")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigError(f"{name} range must be finite")
            if lo > hi:
                raise ConfigError(f"{name}_min ({lo}) > {name}_max ({hi})")


@dataclass(frozen=True)
class SceneConfig:
    background_id: str
    config_index: int
    distance_m: float
    camera_pitch_deg: float | None
    camera_roll_deg: float
    object_yaw_deg: float
    object_x_m: float
    object_y_m: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PitchMode:
    """How the camera pitch is chosen: ``metadata``, ``fixed`` or ``random``."""

    kind: str = "metadata"
    value: float = 0.0
    low: float = 0.0
    high: float = 90.0

    def __post_init__(self):
        if self.kind not in ("metadata", "fixed", "random"):
            raise ConfigError(f"unknown pitch mode {self.kind!r}")
        if self.kind == "random" and self.low > self.high:
            raise ConfigError("random pitch range has min > max")

    @classmethod
    def fixed(cls, value: float) -> "PitchMode":
        return cls("fixed", value=float(value))

    @classmethod
    def random(cls, low: float, high: float) -> "PitchMode":
        return cls("random", low=float(low), high=float(high))

    def describe(self):
        if self.kind == "metadata":
            return "metadata"
        if self.kind == "fixed":
            return {"fixed": self.value}
        return {"random": [self.low, self.high]}


def derive_rng_stream(master_seed: int, background_id: str, config_index: int) -> np.random.Generator:
    """Independent, reproducible random stream for one (background, config) pair.

    The tuple is hashed with keyed BLAKE2b into a 128-bit PCG64 seed, so the
    stream does not depend on process, platform or call order.
    """
    msg = f"{int(master_seed)}\x1f{background_id}\x1f{int(config_index)}".encode("utf-8")
    digest = hashlib.blake2b(msg, key=_STREAM_KEY, digest_size=16).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))


def _uniform(stream: np.random.Generator, lo: float, hi: float) -> float:
    return float(stream.uniform(lo, hi)) if hi > lo else float(lo)


def sample_scene_config(
    ranges: SceneParamRanges,
    pitch_deg: float | None,
    stream: np.random.Generator,
    background_id: str = "",
    config_index: int = 0,
) -> SceneConfig:
    """Draw one scene. Draw order is fixed: d, roll, yaw, x, y."""
    d = _uniform(stream, ranges.d_min, ranges.d_max)
    roll = _uniform(stream, ranges.roll_min, ranges.roll_max)
    yaw = _uniform(stream, ranges.yaw_min, ranges.yaw_max)
    if yaw >= ranges.yaw_max and ranges.yaw_max > ranges.yaw_min:
        # keep the yaw interval half-open under float rounding
        yaw = float(np.nextafter(ranges.yaw_max, -np.inf))
    x = _uniform(stream, ranges.x_min, ranges.x_max)
    y = _uniform(stream, ranges.y_min, ranges.y_max)
    return SceneConfig(
        background_id=background_id,
        config_index=config_index,
        distance_m=d,
        camera_pitch_deg=pitch_deg,
        camera_roll_deg=roll,
        object_yaw_deg=yaw,
        object_x_m=x,
        object_y_m=y,
    )


def sample_background_configs(
    ranges: SceneParamRanges, pitch_deg: float | None, master_seed: int, background_id: str
) -> list[SceneConfig]:
    return [
        sample_scene_config(ranges, pitch_deg, derive_rng_stream(master_seed, background_id, i), background_id, i)
        for i in range(ranges.n_config)
    ]


def resolve_pitch(config: SceneConfig, mode: PitchMode, stream: np.random.Generator | None = None) -> float:
    if mode.kind == "metadata":
        if config.camera_pitch_deg is None:
            raise DataError(
                f"background {config.background_id!r} has no camera pitch; filter it before metadata-aligned generation"
            )
        return config.camera_pitch_deg
    if mode.kind == "fixed":
        return mode.value
    if stream is None:
        raise ValueError("random pitch mode needs a random stream")
    return _uniform(stream, mode.low, mode.high)


def build_camera(
    config: SceneConfig,
    width: int = 640,
    height: int = 512,
    hfov_deg: float = DEFAULT_HFOV_DEG,
    mode: PitchMode = PitchMode(),
    stream: np.random.Generator | None = None,
) -> CameraModel:
    """Place the camera at ``distance_m`` from the origin, looking at it.

    In ``random`` mode the pitch is drawn from ``stream`` (after the scene
    draws, when the pipeline's per-scene stream is passed in).
    """
    pitch = resolve_pitch(config, mode, stream)
    p = math.radians(pitch)
    d = config.distance_m
    # origin = position + d * forward, forward = (0, cos p, -sin p) at yaw 0
    position = (0.0, -d * math.cos(p), d * math.sin(p))
    return CameraModel(position=position, pitch_deg=pitch, roll_deg=config.camera_roll_deg, yaw_deg=0.0,
                       hfov_deg=hfov_deg, width=width, height=height)

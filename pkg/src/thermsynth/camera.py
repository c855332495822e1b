"""Pinhole camera model.

World frame: z up, ground plane z = 0, scene origin at (0, 0, 0). With yaw 0
the camera looks along +y; pitch tilts the view down (0 = horizontal,
90 = nadir) and roll spins the image about the optical axis.

Image frame: +x right, +y down, origin at the top-left pixel corner, so
pixel (i, j) has its center at (i + 0.5, j + 0.5).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    position: tuple[float, float, float]
    pitch_deg: float
    roll_deg: float
    yaw_deg: float
    hfov_deg: float
    width: int
    height: int

    def __post_init__(self):
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValueError(f"hfov_deg must be in (0, 180), got {self.hfov_deg}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera resolution must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def principal_point(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    def basis(self) -> np.ndarray:
        """Rows are the camera right, down and forward axes in world coordinates."""
        return camera_basis(self.pitch_deg, self.roll_deg, self.yaw_deg)

    def scaled(self, factor: int) -> "CameraModel":
        """Same view at ``factor`` times the resolution (for supersampling)."""
        return CameraModel(self.position, self.pitch_deg, self.roll_deg, self.yaw_deg,
                           self.hfov_deg, self.width * factor, self.height * factor)

    def world_to_camera(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - np.asarray(self.position)) @ self.basis().T

    def pixel_ray(self, x: float, y: float) -> np.ndarray:
        """Unit world-space direction through continuous pixel coordinate (x, y)."""
        cx, cy = self.principal_point
        f = self.focal_px
        d_cam = np.array([(x - cx) / f, (y - cy) / f, 1.0])
        d = d_cam @ self.basis()
        return d / np.linalg.norm(d)


def camera_basis(pitch_deg: float, roll_deg: float, yaw_deg: float = 0.0) -> np.ndarray:
    p = math.radians(pitch_deg)
    y = math.radians(yaw_deg)
    r = math.radians(roll_deg)
    forward = np.array([math.sin(y) * math.cos(p), math.cos(y) * math.cos(p), -math.sin(p)])
    right = np.array([math.cos(y), -math.sin(y), 0.0])
    down = np.cross(forward, right)
    # roll rotates right/down about the optical axis
    right_r = math.cos(r) * right + math.sin(r) * down
    down_r = -math.sin(r) * right + math.cos(r) * down
    return np.stack([right_r, down_r, forward])


def project_point(camera: CameraModel, p) -> tuple[float, float, float, bool]:
    """Project a world point to continuous pixel coordinates.

    Returns ``(x, y, depth, in_front)``; depth is the distance along the
    optical axis. Points on or behind the camera plane come back with
    ``in_front=False`` and NaN pixel coordinates.
    """
    xc, yc, zc = camera.world_to_camera(np.asarray(p, dtype=np.float64).reshape(1, 3))[0]
    if zc <= 0.0:
        return math.nan, math.nan, float(zc), False
    cx, cy = camera.principal_point
    f = camera.focal_px
    return cx + f * xc / zc, cy + f * yc / zc, float(zc), True


def project_points(camera: CameraModel, pts) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection. Returns (N, 2) pixel coordinates and (N,) depths."""
    cam = camera.world_to_camera(pts)
    z = cam[:, 2]
    cx, cy = camera.principal_point
    f = camera.focal_px
    with np.errstate(divide="ignore", invalid="ignore"):
        xy = np.stack([cx + f * cam[:, 0] / z, cy + f * cam[:, 1] / z], axis=1)
    xy[z <= 0] = np.nan
    return xy, z

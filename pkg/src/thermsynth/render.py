"""Deterministic z-buffered triangle rasterizer with thermal shading."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import CameraModel
from .dataset_io import ThermalImage, save_image
from .mesh import ThermalMaterial, TriangleMesh
from .shading import shade_thermal

NEAR_PLANE = 1e-3


@dataclass(frozen=True)
class ObjectPose:
    yaw_deg: float = 0.0
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True, eq=False)
class RenderOutput:
    intensity: np.ndarray  # float64 [0, 1]
    alpha: np.ndarray  # float64 [0, 1]
    object_id: np.ndarray  # int32, 0 = empty
    depth: np.ndarray  # float64 meters, inf = empty

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @classmethod
    def empty(cls, width: int, height: int) -> "RenderOutput":
        return cls(
            intensity=np.zeros((height, width)),
            alpha=np.zeros((height, width)),
            object_id=np.zeros((height, width), dtype=np.int32),
            depth=np.full((height, width), np.inf),
        )

    def is_empty(self) -> bool:
        return not bool(np.any(self.object_id))


def place_mesh(mesh: TriangleMesh, pose: ObjectPose) -> tuple[np.ndarray, np.ndarray]:
    """World-space vertices and face normals: yaw about +z, then translate."""
    # reduce first so whole turns give bit-identical transforms
    yaw = math.radians(pose.yaw_deg % 360.0)
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    verts = mesh.vertices @ rot.T + np.array([pose.x, pose.y, 0.0])
    normals = mesh.face_normals() @ rot.T
    return verts, normals


def _clip_near(poly: np.ndarray) -> np.ndarray:
    """Clip a camera-space polygon against z >= NEAR_PLANE."""
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        a_in, b_in = a[2] >= NEAR_PLANE, b[2] >= NEAR_PLANE
        if a_in:
            out.append(a)
        if a_in != b_in:
            t = (NEAR_PLANE - a[2]) / (b[2] - a[2])
            p = a + t * (b - a)
            p[2] = NEAR_PLANE
            out.append(p)
    return np.array(out)


def _edge(ax, ay, bx, by, px, py):
    # evaluate with endpoints in canonical order so a shared edge yields
    # exactly negated values for its two triangles
    if (ax, ay) > (bx, by):
        return -((ax - bx) * (py - by) - (ay - by) * (px - bx))
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _is_top_left(ax, ay, bx, by) -> bool:
    dy = by - ay
    return dy < 0 or (dy == 0 and bx > ax)


def _raster_triangle(v, value, object_id, buffers, focal, cx, cy):
    intensity, oid, depth = buffers
    height, width = depth.shape
    inv_z = 1.0 / v[:, 2]
    xs = cx + focal * v[:, 0] * inv_z
    ys = cy + focal * v[:, 1] * inv_z
    (x0, x1, x2), (y0, y1, y2) = xs.tolist(), ys.tolist()
    w0, w1, w2 = inv_z.tolist()
    area = _edge(x0, y0, x1, y1, x2, y2)
    if area == 0 or not math.isfinite(area):
        return
    if area < 0:
        x1, x2, y1, y2, w1, w2 = x2, x1, y2, y1, w2, w1
        area = -area
    i_lo = max(0, math.ceil(min(x0, x1, x2) - 0.5))
    i_hi = min(width - 1, math.floor(max(x0, x1, x2) - 0.5))
    j_lo = max(0, math.ceil(min(y0, y1, y2) - 0.5))
    j_hi = min(height - 1, math.floor(max(y0, y1, y2) - 0.5))
    if i_lo > i_hi or j_lo > j_hi:
        return
    px = np.arange(i_lo, i_hi + 1, dtype=np.float64)[None, :] + 0.5
    py = np.arange(j_lo, j_hi + 1, dtype=np.float64)[:, None] + 0.5

    e0 = _edge(x1, y1, x2, y2, px, py)
    e1 = _edge(x2, y2, x0, y0, px, py)
    e2 = _edge(x0, y0, x1, y1, px, py)
    inside = (
        ((e0 > 0) | ((e0 == 0) & _is_top_left(x1, y1, x2, y2)))
        & ((e1 > 0) | ((e1 == 0) & _is_top_left(x2, y2, x0, y0)))
        & ((e2 > 0) | ((e2 == 0) & _is_top_left(x0, y0, x1, y1)))
    )
    if not inside.any():
        return
    z = 1.0 / ((e0 * w0 + e1 * w1 + e2 * w2) / area)
    sub = np.s_[j_lo:j_hi + 1, i_lo:i_hi + 1]
    win = inside & (z < depth[sub])
    depth[sub] = np.where(win, z, depth[sub])
    intensity[sub] = np.where(win, value, intensity[sub])
    oid[sub] = np.where(win, object_id, oid[sub])


def face_shading(materials: list[ThermalMaterial], material_of_triangle: np.ndarray, cos_theta: np.ndarray) -> np.ndarray:
    out = np.zeros(len(cos_theta))
    for m, mat in enumerate(materials):
        sel = material_of_triangle == m
        if sel.any():
            out[sel] = shade_thermal(mat, cos_theta[sel])
    return out


def _render_single(mesh, materials, camera: CameraModel, pose: ObjectPose, object_id: int) -> RenderOutput:
    out = RenderOutput.empty(camera.width, camera.height)
    verts, normals = place_mesh(mesh, pose)
    tris = mesh.triangles
    centroids = verts[tris].mean(axis=1)
    to_cam = np.asarray(camera.position) - centroids
    dist = np.linalg.norm(to_cam, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_theta = np.einsum("ij,ij->i", normals, to_cam) / dist
    front = np.nan_to_num(cos_theta, nan=-1.0) > 0
    if not front.any():
        return out
    shade = face_shading(materials, mesh.material_of_triangle, np.clip(cos_theta, 0.0, 1.0))

    cam_verts = camera.world_to_camera(verts)
    focal = camera.focal_px
    cx, cy = camera.principal_point
    buffers = (out.intensity, out.object_id, out.depth)
    for t in np.flatnonzero(front):
        v = cam_verts[tris[t]]
        zmin = v[:, 2].min()
        if v[:, 2].max() < NEAR_PLANE:
            continue
        if zmin < NEAR_PLANE:
            poly = _clip_near(v)
            for k in range(1, len(poly) - 1):
                _raster_triangle(poly[[0, k, k + 1]], shade[t], object_id, buffers, focal, cx, cy)
        else:
            _raster_triangle(v, shade[t], object_id, buffers, focal, cx, cy)
    out.alpha[out.object_id != 0] = 1.0
    return out


def render(
    mesh: TriangleMesh,
    materials: list[ThermalMaterial],
    camera: CameraModel,
    pose: ObjectPose = ObjectPose(),
    *,
    object_id: int = 1,
    supersample: int = 1,
) -> RenderOutput:
    """Rasterize ``mesh`` placed at ``pose`` as seen by ``camera``.

    Back faces are culled and each front face is flat-shaded with the
    cosine between its normal and the direction to the camera. Pixel centers
    are sampled with a top-left fill rule. Alpha is binary unless
    ``supersample=4``, which averages a 2x2 sub-pixel grid.
    """
    if object_id <= 0:
        raise ValueError("object_id must be positive")
    if supersample == 1:
        return _render_single(mesh, materials, camera, pose, object_id)
    if supersample != 4:
        raise ValueError("supersample must be 1 or 4")
    hi = _render_single(mesh, materials, camera.scaled(2), pose, object_id)
    h, w = camera.height, camera.width
    covered = (hi.object_id != 0).reshape(h, 2, w, 2)
    count = covered.sum(axis=(1, 3))
    alpha = count / 4.0
    total = (hi.intensity.reshape(h, 2, w, 2) * covered).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        intensity = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    depth = hi.depth.reshape(h, 2, w, 2).min(axis=(1, 3))
    oid = np.where(count > 0, object_id, 0).astype(np.int32)
    return RenderOutput(intensity=intensity, alpha=alpha, object_id=oid, depth=depth)


def write_debug_channels(out: RenderOutput, prefix, id_stride: int = 64) -> dict[str, Path]:
    """Dump intensity, alpha, object id and normalized inverse depth as PNGs."""
    prefix = Path(prefix)
    q = lambda a: np.round(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)  # noqa: E731
    inv = np.zeros_like(out.depth)
    finite = np.isfinite(out.depth)
    if finite.any():
        inv[finite] = 1.0 / out.depth[finite]
        inv[finite] /= inv[finite].max()
    channels = {
        "intensity": q(out.intensity),
        "alpha": q(out.alpha),
        "object_id": np.clip(out.object_id.astype(np.int64) * id_stride, 0, 255).astype(np.uint8),
        "inv_depth": q(inv),
    }
    paths = {}
    for name, arr in channels.items():
        p = prefix.with_name(f"{prefix.name}_{name}.png")
        save_image(ThermalImage.from_array(arr), p)
        paths[name] = p
    return paths

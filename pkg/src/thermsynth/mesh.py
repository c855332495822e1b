"""Triangle meshes (OBJ subset) and thermal material definitions."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import MeshError


@dataclass(frozen=True)
class ThermalMaterial:
    """Emission-driven thermal surface.

    ``temperature_norm`` indexes the piecewise-linear ``ramp`` to get the
    face-on emission; ``fresnel_f0`` and ``angle_falloff`` shape how it dims
    toward grazing view angles.
    """

    temperature_norm: float
    ramp: tuple[tuple[float, float], ...] = ((0.0, 0.0), (1.0, 1.0))
    fresnel_f0: float = 0.04
    angle_falloff: float = 1.0

    def __post_init__(self):
        ramp = tuple((float(p), float(v)) for p, v in self.ramp)
        object.__setattr__(self, "ramp", ramp)
        if not 0.0 <= self.temperature_norm <= 1.0:
            raise MeshError(f"temperature_norm {self.temperature_norm} outside [0, 1]")
        if not 0.0 <= self.fresnel_f0 <= 1.0:
            raise MeshError(f"fresnel_f0 {self.fresnel_f0} outside [0, 1]")
        if self.angle_falloff < 0:
            raise MeshError("angle_falloff must be >= 0")
        if len(ramp) < 2 or ramp[0][0] != 0.0 or ramp[-1][0] != 1.0:
            raise MeshError("ramp must start at position 0 and end at position 1")
        if any(b[0] <= a[0] for a, b in zip(ramp, ramp[1:])):
            raise MeshError("ramp positions must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for _, v in ramp):
            raise MeshError("ramp intensities must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    normals: np.ndarray  # (V, 3) unit
    triangles: np.ndarray  # (T, 3) vertex indices
    material_of_triangle: np.ndarray  # (T,) index into material_names
    material_names: tuple[str, ...]
    part_labels: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(v) == 0 or len(t) == 0:
            raise MeshError("mesh is empty")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle index out of range")
        n = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if n.shape != v.shape:
            raise MeshError("need one normal per vertex")
        if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-4):
            raise MeshError("vertex normals must be unit length")
        m = np.asarray(self.material_of_triangle, dtype=np.int64).reshape(-1)
        if m.shape != (len(t),) or m.min() < 0 or m.max() >= len(self.material_names):
            raise MeshError("every triangle must reference one material")
        for name, arr in (("vertices", v), ("normals", n), ("triangles", t), ("material_of_triangle", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "material_names", tuple(self.material_names))

    def face_normals(self) -> np.ndarray:
        """Geometric unit normals from winding, flipped to agree with vertex normals."""
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        n = np.cross(b - a, c - a)
        vn = self.normals[self.triangles].sum(axis=1)
        flip = np.einsum("ij,ij->i", n, vn) < 0
        n[flip] *= -1
        lengths = np.linalg.norm(n, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(lengths > 0, n / lengths, 0.0)


def _obj_index(tok: str, count: int, lineno: int) -> int:
    i = int(tok)
    i = i - 1 if i > 0 else count + i
    if not 0 <= i < count:
        raise MeshError(f"line {lineno}: dangling index {tok}")
    return i


def load_mesh(mesh_text: str, materials: dict[str, ThermalMaterial]) -> tuple[TriangleMesh, list[ThermalMaterial]]:
    """Parse OBJ text (``v``, ``vn``, ``f``, ``usemtl``, ``g``/``o``).

    Polygonal faces are fan-triangulated. Each vertex gets the normalized
    average of the normals it is referenced with; faces without ``vn``
    references contribute their geometric normal. Groups become
    ``part_labels``. Returns the mesh plus the material list aligned with
    ``mesh.material_names``.
    """
    positions: list[tuple[float, float, float]] = []
    obj_normals: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    tri_normal_refs: list[list] = []
    tri_mat: list[int] = []
    mat_names: list[str] = []
    mat_index: dict[str, int] = {}
    parts: dict[str, list[int]] = {}
    current_mat = None
    current_group = None

    for lineno, raw in enumerate(mesh_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        try:
            if tag == "v":
                if len(rest) < 3:
                    raise ValueError
                positions.append(tuple(float(x) for x in rest[:3]))
            elif tag == "vn":
                nv = np.array([float(x) for x in rest[:3]])
                norm = np.linalg.norm(nv)
                if norm == 0:
                    raise MeshError(f"line {lineno}: zero-length normal")
                obj_normals.append(tuple(nv / norm))
            elif tag == "usemtl":
                current_mat = rest[0]
                if current_mat not in mat_index:
                    mat_index[current_mat] = len(mat_names)
                    mat_names.append(current_mat)
            elif tag in ("g", "o"):
                current_group = rest[0] if rest else None
            elif tag == "f":
                if len(rest) < 3:
                    raise MeshError(f"line {lineno}: face needs at least 3 vertices")
                if current_mat is None:
                    raise MeshError(f"line {lineno}: face before any usemtl")
                vis, nis = [], []
                for r in rest:
                    fields = r.split("/")
                    vis.append(_obj_index(fields[0], len(positions), lineno))
                    if len(fields) >= 3 and fields[2]:
                        nis.append(_obj_index(fields[2], len(obj_normals), lineno))
                    else:
                        nis.append(None)
                for k in range(1, len(vis) - 1):
                    if current_group is not None:
                        parts.setdefault(current_group, []).append(len(tris))
                    tris.append((vis[0], vis[k], vis[k + 1]))
                    tri_normal_refs.append([nis[0], nis[k], nis[k + 1]])
                    tri_mat.append(mat_index[current_mat])
        except (ValueError, IndexError):
            raise MeshError(f"line {lineno}: malformed {tag!r} record") from None

    if not tris or not positions:
        raise MeshError("mesh is empty")
    missing = [m for m in mat_names if m not in materials]
    if missing:
        raise MeshError(f"material {missing[0]!r} is not defined in the material sidecar")

    verts = np.array(positions, dtype=np.float64)
    tri_arr = np.array(tris, dtype=np.int64)
    accum = np.zeros_like(verts)
    a, b, c = (verts[tri_arr[:, k]] for k in range(3))
    geo = np.cross(b - a, c - a)
    for t, refs in enumerate(tri_normal_refs):
        for k, ni in enumerate(refs):
            accum[tri_arr[t, k]] += obj_normals[ni] if ni is not None else geo[t]
    lengths = np.linalg.norm(accum, axis=1)
    normals = np.zeros_like(verts)
    ok = lengths > 0
    normals[ok] = accum[ok] / lengths[ok, None]
    normals[~ok] = (0.0, 0.0, 1.0)
    mesh = TriangleMesh(
        vertices=verts,
        normals=normals,
        triangles=tri_arr,
        material_of_triangle=np.array(tri_mat),
        material_names=tuple(mat_names),
        part_labels={k: np.array(v) for k, v in parts.items()},
    )
    return mesh, [materials[m] for m in mat_names]


def parse_materials(text: str) -> dict[str, ThermalMaterial]:
    """Parse a material sidecar (YAML or JSON mapping name -> fields)."""
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise MeshError("material sidecar must be a mapping of name -> material")
    out = {}
    allowed = {"temperature_norm", "ramp", "fresnel_f0", "f0", "angle_falloff"}
    for name, fields in data.items():
        if not isinstance(fields, dict):
            raise MeshError(f"material {name!r}: expected a mapping")
        unknown = set(fields) - allowed
        if unknown:
            raise MeshError(f"material {name!r}: unknown fields {sorted(unknown)}")
        if "temperature_norm" not in fields:
            raise MeshError(f"material {name!r}: missing temperature_norm")
        kwargs = {"temperature_norm": float(fields["temperature_norm"])}
        if "ramp" in fields:
            kwargs["ramp"] = tuple((float(p), float(v)) for p, v in fields["ramp"])
        f0 = fields.get("fresnel_f0", fields.get("f0"))
        if f0 is not None:
            kwargs["fresnel_f0"] = float(f0)
        if "angle_falloff" in fields:
            kwargs["angle_falloff"] = float(fields["angle_falloff"])
        out[str(name)] = ThermalMaterial(**kwargs)
    return out


def load_mesh_files(mesh_path, sidecar_path) -> tuple[TriangleMesh, list[ThermalMaterial]]:
    materials = parse_materials(Path(sidecar_path).read_text(encoding="utf-8"))
    return load_mesh(Path(mesh_path).read_text(encoding="utf-8"), materials)

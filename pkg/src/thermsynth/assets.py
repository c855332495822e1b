"""Procedural stand-in meshes and material presets.

The shipped ``assets/*.obj`` files are the output of :func:`drone_obj` and
:func:`deer_obj`; regenerate them with ``python -m thermsynth.assets``.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

ASSET_DIR = Path(__file__).with_name("assets")
BUILTIN = {
    "drone": ("drone.obj", "drone_materials.yaml"),
    "deer": ("deer.obj", "deer_materials.yaml"),
}

_RAMP = [[0.0, 0.02], [0.5, 0.45], [1.0, 1.0]]

DRONE_MATERIALS = {
    "battery": {"temperature_norm": 0.9, "fresnel_f0": 0.05, "angle_falloff": 1.0, "ramp": _RAMP},
    "motor": {"temperature_norm": 0.85, "fresnel_f0": 0.08, "angle_falloff": 1.0, "ramp": _RAMP},
    "frame": {"temperature_norm": 0.3, "fresnel_f0": 0.1, "angle_falloff": 1.5, "ramp": _RAMP},
    "propeller": {"temperature_norm": 0.25, "fresnel_f0": 0.1, "angle_falloff": 1.5, "ramp": _RAMP},
}

DEER_MATERIALS = {
    "fur": {"temperature_norm": 0.75, "fresnel_f0": 0.03, "angle_falloff": 0.8, "ramp": _RAMP},
}


class _ObjWriter:
    def __init__(self):
        self.v: list[np.ndarray] = []
        self.vn: list[np.ndarray] = []
        self.lines: list[str] = []

    def add(self, group: str, material: str, verts: np.ndarray, faces: list[list[int]]):
        """Append a closed part; ``faces`` wind counter-clockwise seen from outside."""
        self.lines.append(f"g {group}")
        self.lines.append(f"usemtl {material}")
        base = len(self.v)
        self.v.extend(verts)
        for f in faces:
            pts = verts[f]
            n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            n /= np.linalg.norm(n)
            self.vn.append(n)
            ni = len(self.vn)
            self.lines.append("f " + " ".join(f"{base + i + 1}//{ni}" for i in f))

    def text(self, header: str) -> str:
        out = [f"# {header}"]
        out += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in self.v]
        out += [f"vn {x:.6f} {y:.6f} {z:.6f}" for x, y, z in self.vn]
        out += self.lines
        return "\n".join(out) + "\n"


def _rot_z(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def _rot_y(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def box(center, size, rot=None):
    sx, sy, sz = (s / 2 for s in size)
    v = np.array([[x, y, z] for z in (-sz, sz) for y in (-sy, sy) for x in (-sx, sx)], dtype=float)
    if rot is not None:
        v = v @ rot.T
    v += np.asarray(center, dtype=float)
    # index = x + 2y + 4z
    faces = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]]
    return v, faces


def cylinder(center, radius, height, segments=16, rot=None):
    """Closed cylinder along local +z, centered at ``center``."""
    ang = np.linspace(0, 2 * math.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    v = np.vstack([bottom, top])
    if rot is not None:
        v = v @ rot.T
    v += np.asarray(center, dtype=float)
    faces = [list(range(segments - 1, -1, -1)), list(range(segments, 2 * segments))]
    for i in range(segments):
        j = (i + 1) % segments
        faces.append([i, j, segments + j, segments + i])
    return v, faces


def ellipsoid(center, radii, rings=8, segments=16, rot=None):
    v = [[0, 0, -1.0]]
    for r in range(1, rings):
        phi = -math.pi / 2 + math.pi * r / rings
        for s in range(segments):
            th = 2 * math.pi * s / segments
            v.append([math.cos(phi) * math.cos(th), math.cos(phi) * math.sin(th), math.sin(phi)])
    v.append([0, 0, 1.0])
    v = np.array(v) * np.asarray(radii, dtype=float)
    if rot is not None:
        v = v @ rot.T
    v += np.asarray(center, dtype=float)
    top = len(v) - 1
    faces = []
    for s in range(segments):
        faces.append([0, 1 + (s + 1) % segments, 1 + s])
    for r in range(rings - 2):
        a = 1 + r * segments
        b = a + segments
        for s in range(segments):
            t = (s + 1) % segments
            faces.append([a + s, a + t, b + t, b + s])
    last = 1 + (rings - 2) * segments
    for s in range(segments):
        faces.append([last + s, last + (s + 1) % segments, top])
    return v, faces


def drone_obj() -> str:
    """Quadcopter: hot battery and motors, cool frame and propellers."""
    w = _ObjWriter()
    w.add("frame", "frame", *box((0, 0, 0.08), (0.18, 0.18, 0.06)))
    w.add("battery", "battery", *box((0, 0, 0.125), (0.13, 0.07, 0.035)))
    arm = 0.25
    for k, deg in enumerate((45, 135, 225, 315)):
        tip = np.array([arm * math.cos(math.radians(deg)), arm * math.sin(math.radians(deg))])
        w.add(f"arm{k}", "frame", *box((*(tip / 2), 0.08), (arm + 0.03, 0.045, 0.03), rot=_rot_z(deg)))
        w.add(f"motor{k}", "motor", *cylinder((*tip, 0.09), 0.035, 0.05, segments=12))
        w.add(f"propeller{k}", "propeller", *cylinder((*tip, 0.12), 0.12, 0.01, segments=20))
    return w.text("procedural quadcopter stand-in, meters, z up")


def deer_obj() -> str:
    """Deer-sized quadruped with one uniform material."""
    w = _ObjWriter()
    w.add("body", "fur", *ellipsoid((0, 0, 0.95), (0.55, 0.2, 0.22)))
    for k, (x, y) in enumerate(((0.38, 0.1), (0.38, -0.1), (-0.38, 0.1), (-0.38, -0.1))):
        w.add(f"leg{k}", "fur", *cylinder((x, y, 0.45), 0.045, 0.9, segments=10))
    w.add("neck", "fur", *cylinder((0.55, 0, 1.2), 0.08, 0.45, segments=10, rot=_rot_y(35)))
    w.add("head", "fur", *ellipsoid((0.72, 0, 1.42), (0.16, 0.08, 0.09), rings=6, segments=12))
    return w.text("procedural deer stand-in, meters, z up")


def materials_yaml(materials: dict) -> str:
    import copy

    import yaml

    # deep copy so shared ramp lists are not emitted as YAML anchors
    data = {name: copy.deepcopy(fields) for name, fields in materials.items()}
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=None)


def builtin_paths(name: str) -> tuple[Path, Path]:
    try:
        mesh, mats = BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown builtin asset {name!r}; choose from {sorted(BUILTIN)}") from None
    return ASSET_DIR / mesh, ASSET_DIR / mats


def write_assets(directory: Path = ASSET_DIR) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "drone.obj").write_text(drone_obj())
    (directory / "drone_materials.yaml").write_text(materials_yaml(DRONE_MATERIALS))
    (directory / "deer.obj").write_text(deer_obj())
    (directory / "deer_materials.yaml").write_text(materials_yaml(DEER_MATERIALS))


if __name__ == "__main__":
    write_assets()

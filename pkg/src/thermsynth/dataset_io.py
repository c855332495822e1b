"""Thermal images, YOLO-style label files and per-image flight metadata."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, ParseError, SerializationError

COORD_TOL = 1e-6
PITCH_RANGE = (-90.0, 92.0)
SPLITS = ("train", "test", "val")
LABEL_KINDS = ("aabb", "obb", "polygon", "mixed")

Point = tuple[float, float]


@dataclass(frozen=True, eq=False)
class ThermalImage:
    """Single-channel 8-bit raster. ``data`` has shape (height, width)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        if arr.shape != (self.height, self.width):
            raise ValueError(f"data shape {arr.shape} != ({self.height}, {self.width})")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "ThermalImage":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)

    def __eq__(self, other):
        if not isinstance(other, ThermalImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True)
class ImageMetadata:
    image_id: str
    camera_pitch_deg: float | None = None
    altitude_m: float | None = None
    split: str | None = None


@dataclass(frozen=True)
class Annotation:
    """One labelled object; coordinates are normalized to [0, 1]."""

    class_id: int
    aabb: tuple[float, float, float, float] | None = None
    obb: tuple[Point, Point, Point, Point] | None = None
    polygon: tuple[Point, ...] | None = None
    confidence: float | None = None

    def __post_init__(self):
        if self.aabb is None and self.obb is None and self.polygon is None:
            raise ValueError("annotation needs at least one of aabb/obb/polygon")
        if self.class_id < 0:
            raise ValueError("class_id must be non-negative")

    def has(self, kind: str) -> bool:
        return getattr(self, kind) is not None

    def bounding_aabb(self) -> tuple[float, float, float, float]:
        """AABB of whichever representation is present."""
        if self.aabb is not None:
            return self.aabb
        pts = self.obb if self.obb is not None else self.polygon
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        return ((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str = ""
    annotations: tuple[Annotation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))

    def __len__(self):
        return len(self.annotations)

    def __iter__(self):
        return iter(self.annotations)


# ---------------------------------------------------------------------------
# label files


def _signed_area(pts: Sequence[Point]) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def quad_is_simple(corners: Sequence[Point]) -> bool:
    """True for a non-self-intersecting quadrilateral with positive area."""
    if abs(_signed_area(corners)) <= 1e-15:
        return False
    a, b, c, d = corners
    return not (_segments_cross(a, b, c, d) or _segments_cross(b, c, d, a))


def _parse_line(tokens: list[str], kind: str, with_confidence: bool, lineno: int, source) -> Annotation:
    def fail(msg):
        raise ParseError(msg, line=lineno, source=source)

    try:
        class_id = int(tokens[0])
    except ValueError:
        fail(f"class id {tokens[0]!r} is not an integer")
    if class_id < 0:
        fail(f"negative class id {class_id}")
    values = []
    for tok in tokens[1:]:
        try:
            v = float(tok)
        except ValueError:
            fail(f"non-numeric token {tok!r}")
        if not math.isfinite(v):
            fail(f"non-finite value {tok!r}")
        values.append(v)

    confidence = None
    if with_confidence:
        if not values:
            fail("missing confidence field")
        confidence = values.pop()
        if not 0.0 <= confidence <= 1.0:
            fail(f"confidence {confidence} outside [0, 1]")

    n = len(values) + 1
    if kind == "mixed":
        kind = "aabb" if n == 5 else "obb" if n == 9 else "polygon"
    if kind == "aabb" and n != 5:
        fail(f"AABB line needs 5 fields, got {n}")
    if kind == "obb" and n != 9:
        fail(f"OBB line needs 9 fields, got {n}")
    if kind == "polygon" and (n < 7 or n % 2 == 0):
        fail(f"polygon line needs an odd field count >= 7, got {n}")

    for v in values:
        if v < -COORD_TOL or v > 1 + COORD_TOL:
            fail(f"coordinate {v} outside [0, 1]")

    if kind == "aabb":
        cx, cy, w, h = values
        if w <= 0 or h <= 0:
            fail("AABB width and height must be positive")
        for lo, hi in ((cx - w / 2, cx + w / 2), (cy - h / 2, cy + h / 2)):
            if lo < -COORD_TOL or hi > 1 + COORD_TOL:
                fail("AABB extends outside the image")
        return Annotation(class_id, aabb=(cx, cy, w, h), confidence=confidence)
    pts = tuple((values[i], values[i + 1]) for i in range(0, len(values), 2))
    if kind == "obb":
        if not quad_is_simple(pts):
            fail("OBB corners do not form a simple quadrilateral with positive area")
        return Annotation(class_id, obb=pts, confidence=confidence)
    return Annotation(class_id, polygon=pts, confidence=confidence)


def parse_label_file(
    text: str,
    kind: str = "mixed",
    *,
    image_id: str = "",
    with_confidence: bool = False,
    source: str | None = None,
) -> AnnotationSet:
    """Parse YOLO label content.

    Formats (all coordinates normalized):
        aabb:    ``class cx cy w h``
        obb:     ``class x1 y1 x2 y2 x3 y3 x4 y4``
        polygon: ``class x1 y1 ... xn yn`` (n >= 3)

    ``mixed`` picks the format per line by field count. Prediction files
    carry one extra trailing confidence field (``with_confidence=True``).

    Raises:
        ParseError: naming the 1-based line number of the first bad line.
    """
    if kind not in LABEL_KINDS:
        raise ValueError(f"unknown label kind {kind!r}")
    anns = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        anns.append(_parse_line(tokens, kind, with_confidence, lineno, source))
    return AnnotationSet(image_id=image_id, annotations=anns)


def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def serialize_annotations(aset: AnnotationSet | Iterable[Annotation], kind: str = "aabb") -> str:
    """Render annotations as label-file content, 6 decimals, LF line endings.

    For ``mixed`` each annotation is written as AABB if present, else OBB,
    else polygon. Confidence, when set, is appended as a trailing field.
    """
    if kind not in LABEL_KINDS:
        raise ValueError(f"unknown label kind {kind!r}")
    lines = []
    for idx, ann in enumerate(aset):
        k = kind
        if k == "mixed":
            k = "aabb" if ann.aabb is not None else "obb" if ann.obb is not None else "polygon"
        rep = getattr(ann, k)
        if rep is None:
            raise SerializationError(f"missing {k} representation", index=idx)
        if k == "aabb":
            nums = list(rep)
        else:
            nums = [c for p in rep for c in p]
        if ann.confidence is not None:
            nums.append(ann.confidence)
        lines.append(" ".join([str(ann.class_id)] + [_fmt(v) for v in nums]) + "\n")
    return "".join(lines)


def read_label_file(path, kind: str = "mixed", *, with_confidence: bool = False) -> AnnotationSet:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_label_file(text, kind, image_id=path.stem, with_confidence=with_confidence, source=str(path))


def write_label_file(path, aset: AnnotationSet, kind: str = "aabb") -> str:
    text = serialize_annotations(aset, kind)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return text


def drop_class(aset: AnnotationSet, class_id: int) -> AnnotationSet:
    return replace(aset, annotations=tuple(a for a in aset.annotations if a.class_id != class_id))


# ---------------------------------------------------------------------------
# metadata


def _opt_float(cell: str | None, column: str, row: int) -> float | None:
    if cell is None:
        return None
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {cell!r} as a number", line=row) from None
    if not math.isfinite(v):
        raise ParseError(f"column {column!r}: non-finite value {cell!r}", line=row)
    return v


def load_metadata(text: str) -> dict[str, ImageMetadata]:
    """Parse a comma-delimited metadata table keyed by ``image_id``.

    Required header columns: ``image_id`` and ``camera_pitch_deg``;
    ``altitude_m`` and ``split`` are optional. Empty cells are recorded as
    missing (``None``). Row numbers in errors are file line numbers.
    """
    reader = csv.DictReader(io.StringIO(text), skipinitialspace=True)
    if reader.fieldnames is None:
        raise ParseError("metadata table is empty", line=1)
    reader.fieldnames = [f.strip() for f in reader.fieldnames]
    for col in ("image_id", "camera_pitch_deg"):
        if col not in reader.fieldnames:
            raise ParseError(f"header lacks required column {col!r}", line=1)

    out: dict[str, ImageMetadata] = {}
    for rec in reader:
        row = reader.line_num
        image_id = (rec.get("image_id") or "").strip()
        if not image_id:
            raise ParseError("empty image_id", line=row)
        if image_id in out:
            raise ParseError(f"duplicate image_id {image_id!r}", line=row)
        pitch = _opt_float(rec.get("camera_pitch_deg"), "camera_pitch_deg", row)
        if pitch is not None and not PITCH_RANGE[0] <= pitch <= PITCH_RANGE[1]:
            raise ParseError(f"camera_pitch_deg {pitch} outside {PITCH_RANGE}", line=row)
        altitude = _opt_float(rec.get("altitude_m"), "altitude_m", row)
        split = (rec.get("split") or "").strip() or None
        if split is not None and split not in SPLITS:
            raise ParseError(f"split {split!r} not one of {SPLITS}", line=row)
        out[image_id] = ImageMetadata(image_id, pitch, altitude, split)
    return out


def load_metadata_file(path) -> dict[str, ImageMetadata]:
    try:
        return load_metadata(Path(path).read_text(encoding="utf-8"))
    except ParseError as exc:
        raise ParseError(exc.detail, line=exc.line, source=str(path)) from None


def filter_missing_metadata(records: Iterable[ImageMetadata]) -> tuple[list[ImageMetadata], float]:
    """Keep records with a camera pitch; return (kept, dropped fraction)."""
    records = list(records)
    kept = [r for r in records if r.camera_pitch_deg is not None]
    if not records:
        return kept, 0.0
    return kept, (len(records) - len(kept)) / len(records)


# ---------------------------------------------------------------------------
# images

_SUPPORTED_SUFFIXES = {".png", ".pgm"}


def load_image(path) -> ThermalImage:
    """Load an 8-bit single-channel PNG or binary PGM."""
    path = Path(path)
    try:
        im = Image.open(path)
    except UnidentifiedImageError:
        raise ImageFormatError(f"{path}: not a readable PNG or PGM image") from None
    with im:
        mode = im.mode
        if mode in ("RGB", "RGBA", "LA", "P", "CMYK", "YCbCr", "PA", "RGBX"):
            raise ImageFormatError(
                f"{path}: {mode} image has multiple channels; convert with rgb_to_grayscale first"
            )
        if mode != "L":
            raise ImageFormatError(f"{path}: unsupported bit depth / mode {mode!r}, need 8-bit grayscale")
        try:
            arr = np.array(im, dtype=np.uint8)
        except (OSError, SyntaxError) as exc:  # truncated or corrupt pixel data
            raise ImageFormatError(f"{path}: corrupt image data ({exc})") from None
    return ThermalImage.from_array(arr)


def save_image(image: ThermalImage, path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SUPPORTED_SUFFIXES:
        raise ImageFormatError(f"{path}: unsupported output format {suffix!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    im = Image.fromarray(np.ascontiguousarray(image.data))
    if suffix == ".png":
        im.save(path, format="PNG", optimize=False)
    else:
        im.save(path, format="PPM")

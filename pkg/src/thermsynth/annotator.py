"""Annotations derived from render buffers, and merging with original labels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataset_io import Annotation, AnnotationSet, quad_is_simple
from .errors import MergeError
from .geometry import OrientedBox, convex_hull, min_area_rect, polygon_area, simplify_ring
from .render import RenderOutput

DEFAULT_OCCLUSION_THRESHOLD = 0.99
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class PixelMask:
    width: int
    height: int
    bits: np.ndarray  # bool (height, width)

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != (self.height, self.width):
            raise ValueError("mask bits do not match dimensions")
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_bits(cls, bits) -> "PixelMask":
        b = np.asarray(bits, dtype=bool)
        return cls(b.shape[1], b.shape[0], b)

    def count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()


def extract_mask(render: RenderOutput, object_id: int = 1) -> PixelMask:
    if object_id <= 0:
        raise ValueError("object_id must be positive")
    return PixelMask.from_bits(render.object_id == object_id)


def mask_bounds(mask: PixelMask) -> tuple[int, int, int, int] | None:
    """Pixel-edge bounds ``(x0, y0, x1, y1)``, exclusive max; None when empty."""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if len(rows) == 0:
        return None
    cols = np.flatnonzero(mask.bits.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


def mask_to_aabb(mask: PixelMask) -> tuple[float, float, float, float] | None:
    """Normalized ``(cx, cy, w, h)`` of the set pixels, or None for an empty mask."""
    b = mask_bounds(mask)
    if b is None:
        return None
    x0, y0, x1, y1 = b
    W, H = mask.width, mask.height
    return ((x0 + x1) / 2 / W, (y0 + y1) / 2 / H, (x1 - x0) / W, (y1 - y0) / H)


def mask_corner_points(mask: PixelMask) -> np.ndarray:
    """Pixel corners whose hull equals the hull of every set pixel's 4 corners.

    Only the leftmost and rightmost pixel of each row can contribute.
    """
    bits = mask.bits
    rows = np.flatnonzero(bits.any(axis=1))
    if len(rows) == 0:
        return np.zeros((0, 2))
    sub = bits[rows]
    left = np.argmax(sub, axis=1)
    right = bits.shape[1] - 1 - np.argmax(sub[:, ::-1], axis=1)
    y = rows.astype(np.float64)
    pts = np.concatenate([
        np.column_stack([left, y]), np.column_stack([left, y + 1]),
        np.column_stack([right + 1, y]), np.column_stack([right + 1, y + 1]),
    ]).astype(np.float64)
    return pts


def mask_to_obb(mask: PixelMask) -> OrientedBox | None:
    """Minimum-area rectangle around the set pixels, in pixel coordinates."""
    pts = mask_corner_points(mask)
    if len(pts) == 0:
        return None
    return min_area_rect(convex_hull(pts))


def _trace_outer(padded: list, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Follow pixel edges around an 8-connected component, fg on the right.

    ``padded[y + 1][x + 1]`` is pixel (x, y). Corners are returned in
    positive-area order starting at ``start`` (a top-left pixel corner).
    """
    x, y = start
    dx, dy = 1, 0
    verts = []
    while True:
        x += dx
        y += dy
        rx, ry = -dy, dx
        # pixels ahead-left / ahead-right of the corner, as padded indices
        alx = x + ((dx - rx - 1) >> 1) + 1
        aly = y + ((dy - ry - 1) >> 1) + 1
        arx = x + ((dx + rx - 1) >> 1) + 1
        ary = y + ((dy + ry - 1) >> 1) + 1
        if padded[aly][alx]:
            ndx, ndy = dy, -dx
        elif padded[ary][arx]:
            ndx, ndy = dx, dy
        else:
            ndx, ndy = -dy, dx
        if (ndx, ndy) != (dx, dy):
            verts.append((x, y))
        dx, dy = ndx, ndy
        if (x, y) == start and (dx, dy) == (1, 0):
            break
    # rotate so the ring starts at the start corner
    return verts[-1:] + verts[:-1]


def trace_outer_contours(mask: PixelMask) -> list[np.ndarray]:
    """Outer boundary of every 8-connected component as pixel-corner rings."""
    labels, n = ndimage.label(mask.bits, structure=_EIGHT)
    if n == 0:
        return []
    padded = np.pad(mask.bits, 1).astype(np.uint8).tolist()
    flat = labels.ravel()
    _, first = np.unique(flat, return_index=True)
    rings = []
    for idx in first:
        if flat[idx] == 0:
            continue
        y, x = divmod(int(idx), mask.width)
        rings.append(np.array(_trace_outer(padded, (x, y)), dtype=np.float64))
    return rings


def trace_contours(mask: PixelMask) -> list[tuple[np.ndarray, list[np.ndarray]]]:
    """Per 8-connected component: outer ring and hole rings, as pixel-corner rings.

    Holes are the 4-connected background regions enclosed by the component.
    Every ring is returned with positive area.
    """
    labels, n = ndimage.label(mask.bits, structure=_EIGHT)
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == k
        oy, ox = sl[0].start, sl[1].start
        padded = np.pad(sub, 1).astype(np.uint8).tolist()
        y, x = divmod(int(np.argmax(sub)), sub.shape[1])
        outer = np.array(_trace_outer(padded, (x, y)), dtype=np.float64) + (ox, oy)
        holes = []
        hole_bits = ndimage.binary_fill_holes(sub) & ~sub
        if hole_bits.any():
            hl, _ = ndimage.label(hole_bits)
            for j, hs in enumerate(ndimage.find_objects(hl), start=1):
                hsub = hl[hs] == j
                hpad = np.pad(hsub, 1).astype(np.uint8).tolist()
                hy, hx = divmod(int(np.argmax(hsub)), hsub.shape[1])
                ring = np.array(_trace_outer(hpad, (hx, hy)), dtype=np.float64)
                holes.append(ring + (ox + hs[1].start, oy + hs[0].start))
        out.append((outer, holes))
    return out


def _closest_link(ring: np.ndarray, hole: np.ndarray) -> tuple[float, int, np.ndarray, int, np.ndarray]:
    """Closest pair of boundary points: (distance, ring edge, point, hole edge, point)."""
    best = (math.inf, 0, ring[0], 0, hole[0])
    for src, dst, flip in ((hole, ring, False), (ring, hole, True)):
        a, b = dst, np.roll(dst, -1, axis=0)
        d = b - a
        L2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
        # every source vertex against every destination edge
        t = np.clip(np.einsum("pij,ij->pi", src[:, None, :] - a[None], d) / L2, 0.0, 1.0)
        proj = a[None] + t[..., None] * d[None]
        dist = np.linalg.norm(src[:, None, :] - proj, axis=2)
        p, e = np.unravel_index(int(np.argmin(dist)), dist.shape)
        if dist[p, e] < best[0]:
            if flip:  # source is the ring: vertex p sits at the start of ring edge p
                best = (float(dist[p, e]), p, ring[p], e, proj[p, e])
            else:
                best = (float(dist[p, e]), e, proj[p, e], p, hole[p])
    return best


def bridge_holes(outer: np.ndarray, holes: list[np.ndarray]) -> np.ndarray:
    """Splice holes into the outer ring with zero-width slits (a keyhole ring).

    Holes are joined closest-first along the shortest segment to the ring
    built so far, so a slit never crosses another hole or the boundary. The
    result fills the component minus its holes under the even-odd or
    nonzero rule.
    """
    ring = np.asarray(outer, dtype=np.float64)
    pending = [np.asarray(h, dtype=np.float64)[::-1] for h in holes]  # holes run clockwise
    while pending:
        links = [_closest_link(ring, h) for h in pending]
        k = int(np.argmin([l[0] for l in links]))
        _, re, rp, he, hp = links[k]
        hole = pending.pop(k)
        # hole walk from the link point all the way around back to it
        walk = np.vstack([[hp], np.roll(hole, -(he + 1), axis=0), [hp]])
        ring = np.vstack([ring[: re + 1], [rp], walk, [rp], ring[re + 1:]])
        keep = np.r_[True, np.any(np.diff(ring, axis=0) != 0, axis=1)]
        ring = ring[keep]
        if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
            ring = ring[:-1]
    return ring


def mask_to_polygon(mask: PixelMask, simplify_eps: float = 0.5, holes: bool = True) -> list[np.ndarray]:
    """Simplified contours (pixel coordinates, positive area), one per component.

    With ``holes`` set, enclosed background is cut out through zero-width
    slits, since YOLO polygons carry a single ring per object.
    """
    out = []
    for outer, inner in trace_contours(mask):
        simp = (lambda r: simplify_ring(r, simplify_eps)) if simplify_eps > 0 else (lambda r: r)
        ring = simp(outer)
        if holes and inner:
            ring = bridge_holes(ring, [simp(h) for h in inner])
        out.append(ring)
    return out


def _aabb_pixel_window(aabb, width: int, height: int) -> tuple[int, int, int, int]:
    cx, cy, w, h = aabb
    x0, x1 = (cx - w / 2) * width, (cx + w / 2) * width
    y0, y1 = (cy - h / 2) * height, (cy + h / 2) * height
    # pixels whose centers fall in [x0, x1) x [y0, y1)
    i0, i1 = math.ceil(x0 - 0.5), math.ceil(x1 - 0.5)
    j0, j1 = math.ceil(y0 - 0.5), math.ceil(y1 - 0.5)
    return max(i0, 0), max(j0, 0), min(i1, width), min(j1, height)


def coverage(aabb, alpha) -> float:
    """Fraction of the box's pixels covered with alpha >= 0.5."""
    alpha = np.asarray(alpha)
    height, width = alpha.shape
    i0, j0, i1, j1 = _aabb_pixel_window(aabb, width, height)
    if i1 <= i0 or j1 <= j0:
        return 0.0
    window = alpha[j0:j1, i0:i1]
    return float(np.count_nonzero(window >= 0.5)) / window.size


def merge_annotations(
    original: AnnotationSet,
    synthetic: AnnotationSet,
    alpha,
    occlusion_threshold: float = DEFAULT_OCCLUSION_THRESHOLD,
) -> AnnotationSet:
    """Originals not hidden by the new object, followed by the synthetic labels.

    An original is removed when the rendered silhouette covers at least
    ``occlusion_threshold`` of its box.
    """
    orig_classes = {a.class_id for a in original}
    clash = sorted(orig_classes & {a.class_id for a in synthetic})
    if clash:
        raise MergeError(f"synthetic class id(s) {clash} collide with original labels")
    if len(synthetic) == 0:
        return AnnotationSet(original.image_id, original.annotations)
    kept = tuple(a for a in original if coverage(a.bounding_aabb(), alpha) < occlusion_threshold)
    return AnnotationSet(original.image_id, kept + tuple(synthetic))


def _normalize(pts: np.ndarray, width: int, height: int) -> tuple[tuple[float, float], ...]:
    n = np.clip(np.asarray(pts) / np.array([width, height], dtype=np.float64), 0.0, 1.0)
    return tuple((float(x), float(y)) for x, y in n)


def annotate_mask(mask: PixelMask, class_id: int, simplify_eps: float = 0.5) -> Annotation | None:
    """AABB, OBB and polygon for one object's mask; None when it is empty.

    The OBB is clamped to the image for the label file; if clamping breaks
    the quadrilateral, the AABB corners are used instead. The polygon is the
    largest component's contour.
    """
    aabb = mask_to_aabb(mask)
    if aabb is None:
        return None
    W, H = mask.width, mask.height
    obb = _normalize(mask_to_obb(mask).corners, W, H)
    if not quad_is_simple(obb):
        cx, cy, w, h = aabb
        obb = ((cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2), (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2))
    polys = mask_to_polygon(mask, simplify_eps)
    largest = max(polys, key=polygon_area)
    return Annotation(class_id, aabb=aabb, obb=obb, polygon=_normalize(largest, W, H))

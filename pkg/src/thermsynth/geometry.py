"""Planar geometry: hulls, minimum-area rectangles, clipping, simplification.

Orientation convention: "counter-clockwise" means positive shoelace area in
the raw (x, y) coordinates. In image coordinates (y down) such polygons
appear clockwise on screen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_HALF_PI = math.pi / 2


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    return abs(signed_area(poly))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain. Returns hull vertices CCW, collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.float64).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class OrientedBox:
    """Rectangle given by four CCW corners; the first edge sets the angle."""

    corners: np.ndarray  # (4, 2)

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        if signed_area(c) < 0:
            c = c[::-1].copy()
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)

    @property
    def extents(self) -> tuple[float, float]:
        c = self.corners
        return float(np.linalg.norm(c[1] - c[0])), float(np.linalg.norm(c[2] - c[1]))

    @property
    def angle_deg(self) -> float:
        d = self.corners[1] - self.corners[0]
        return math.degrees(math.atan2(d[1], d[0])) % 90.0

    @property
    def area(self) -> float:
        return polygon_area(self.corners)

    def contains(self, pts, slack: float = 1e-6) -> np.ndarray:
        return points_in_convex(self.corners, pts, slack)


def points_in_convex(poly, pts, slack: float = 0.0) -> np.ndarray:
    """Vectorized inside test for a CCW convex polygon, edges expanded by ``slack``."""
    poly = np.asarray(poly, dtype=np.float64)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    inside = np.ones(len(pts), dtype=bool)
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        e = b - a
        length = math.hypot(*e)
        if length == 0:
            continue
        cross = e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])
        inside &= cross / length >= -slack
    return inside


def _rect_from_axes(theta: float, pts: np.ndarray) -> tuple[float, np.ndarray]:
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-u[1], u[0]])
    pu, pv = pts @ u, pts @ v
    a0, a1, b0, b1 = pu.min(), pu.max(), pv.min(), pv.max()
    corners = np.array([a0 * u + b0 * v, a1 * u + b0 * v, a1 * u + b1 * v, a0 * u + b1 * v])
    return (a1 - a0) * (b1 - b0), corners


def min_area_rect(hull) -> OrientedBox:
    """Minimum-area enclosing rectangle of a convex hull (rotating calipers).

    The optimal rectangle has a side flush with some hull edge, so every
    edge direction (folded into [0, 90) degrees) is tried as a caliper
    orientation. Ties go to the smallest angle. Hulls of one or two points
    get a 1-unit extent across the degenerate direction.
    """
    h = np.asarray(hull, dtype=np.float64).reshape(-1, 2)
    if len(h) == 0:
        raise ValueError("empty hull")
    if len(h) == 1 or np.allclose(h, h[0]):
        x, y = h[0]
        return OrientedBox(np.array([[x - 0.5, y - 0.5], [x + 0.5, y - 0.5], [x + 0.5, y + 0.5], [x - 0.5, y + 0.5]]))
    if len(h) == 2:
        d = h[1] - h[0]
        theta = math.atan2(d[1], d[0]) % _HALF_PI
        u = np.array([math.cos(theta), math.sin(theta)])
        v = np.array([-u[1], u[0]])
        pu, pv = h @ u, h @ v
        a0, a1, b0, b1 = pu.min(), pu.max(), pv.min(), pv.max()
        if a1 - a0 < 1.0:
            m = (a0 + a1) / 2
            a0, a1 = m - 0.5, m + 0.5
        if b1 - b0 < 1.0:
            m = (b0 + b1) / 2
            b0, b1 = m - 0.5, m + 0.5
        return OrientedBox(np.array([a0 * u + b0 * v, a1 * u + b0 * v, a1 * u + b1 * v, a0 * u + b1 * v]))

    edges = np.roll(h, -1, axis=0) - h
    thetas = np.arctan2(edges[:, 1], edges[:, 0]) % _HALF_PI
    thetas[np.isclose(thetas, _HALF_PI, rtol=0, atol=1e-12)] = 0.0
    thetas = np.unique(thetas)
    c, s = np.cos(thetas), np.sin(thetas)
    pu = h[:, 0][None, :] * c[:, None] + h[:, 1][None, :] * s[:, None]
    pv = -h[:, 0][None, :] * s[:, None] + h[:, 1][None, :] * c[:, None]
    areas = (pu.max(axis=1) - pu.min(axis=1)) * (pv.max(axis=1) - pv.min(axis=1))
    best = areas.min()
    # np.unique sorted the angles, so the first near-tie is the smallest angle
    k = int(np.flatnonzero(areas <= best * (1 + 1e-12))[0])
    _, corners = _rect_from_axes(float(thetas[k]), h)
    return OrientedBox(corners)


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman: clip ``subject`` by the convex CCW polygon ``clip``."""
    out = [tuple(p) for p in np.asarray(subject, dtype=np.float64)]
    clip = np.asarray(clip, dtype=np.float64)
    for i in range(len(clip)):
        if not out:
            break
        a, b = clip[i], clip[(i + 1) % len(clip)]
        inp, out = out, []
        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            p_in = _cross(a, b, p) >= 0
            q_in = _cross(a, b, q) >= 0
            if p_in:
                out.append(p)
            if p_in != q_in:
                dp, dq = _cross(a, b, p), _cross(a, b, q)
                t = dp / (dp - dq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def ccw(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    return p[::-1].copy() if signed_area(p) < 0 else p


def _seg_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = float(d @ d)
    if L2 == 0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip(((pts - a) @ d) / L2, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * d), axis=1)


def douglas_peucker(points, eps: float) -> np.ndarray:
    """Simplify an open polyline, keeping both endpoints."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n <= 2:
        return pts.copy()
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _seg_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > eps:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return pts[keep]


def simplify_ring(ring, eps: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring (no repeated closing vertex)."""
    r = np.asarray(ring, dtype=np.float64).reshape(-1, 2)
    if len(r) <= 3:
        return r.copy()
    far = int(np.argmax(np.linalg.norm(r - r[0], axis=1)))
    a = douglas_peucker(r[: far + 1], eps)
    b = douglas_peucker(np.vstack([r[far:], r[:1]]), eps)
    out = np.vstack([a, b[1:-1]])
    if len(out) < 3:
        # keep the vertex farthest from the chord so the ring stays a polygon
        d = _seg_distance(r, r[0], r[far])
        d[[0, far]] = -1.0
        k = int(np.argmax(d))
        out = r[sorted({0, far, k})]
    return out

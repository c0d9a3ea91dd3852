"""Exact intersection/union machinery for boxes: IoU, 3D IoU, and GIoU.

Intersection vertices of two rotated rectangles come from two sources:
crossings between the boxes' edges, and corners of one box contained in the
other.  The candidates are deduplicated, sorted anticlockwise about their
centroid, and fanned into triangles for the area.

The private ``_*_parts`` pipelines are written over generic scalars: every
branch decision (containment, crossing, sort order, min/max selection) reads
plain float values, while the surviving vertex coordinates stay symbolic.
Running the same code with tape-backed scalars therefore reproduces the
numeric results bit for bit and yields exact gradients on each smooth piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cmp_to_key

from .geom import (
    EPS_DEDUP,
    EPS_GEOM,
    AABox2,
    Box3,
    ConvexPoly,
    RBox2,
    Vec2,
    _corner_points,
    _fan_area,
    _val,
)

# Provenance tags: ("corner", box_index, corner_index) for a contained corner
# (box 0 = first argument, box 1 = second), ("cross", i, j) for the crossing
# of edge i of the first box with edge j of the second.
Provenance = tuple[tuple, ...]

# Angles closer than this sort by distance from the centroid instead.
_ANGLE_TIE = 1e-12


@dataclass(frozen=True)
class OverlapResult:
    """Intersection/union summary for one box pair.

    For 3D pairs the two measure fields hold volumes.  ``vertex_provenance``
    lists, in polygon order, where each intersection vertex came from.
    """

    intersection_area: float
    union_area: float
    iou: float
    vertex_provenance: Provenance = field(default=())

    def __post_init__(self):
        if self.intersection_area < 0.0:
            raise ValueError(f"negative intersection measure: {self.intersection_area}")
        if self.union_area <= 0.0:
            raise ValueError(f"union measure must be positive: {self.union_area}")
        if not -EPS_GEOM <= self.iou <= 1.0 + EPS_GEOM:
            raise ValueError(f"iou out of range: {self.iou}")


def aa_iou(g: AABox2, d: AABox2) -> OverlapResult:
    """IoU of two axis-aligned boxes via clamped min/max overlap extents."""
    area_g = g.area
    area_d = d.area
    ow = min(g.x_max, d.x_max) - max(g.x_min, d.x_min)
    oh = min(g.y_max, d.y_max) - max(g.y_min, d.y_min)
    inter = max(0.0, ow) * max(0.0, oh)
    union = area_g + area_d - inter
    if union <= 0.0:
        raise ValueError("aa_iou needs at least one box of positive area")
    return OverlapResult(inter, union, min(1.0, inter / union))


def segment_intersection(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> Vec2 | None:
    """Proper crossing point of two segments, or None.

    Parallel segments (direction cross within EPS_GEOM) and crossings whose
    line parameters fall outside [0, 1] yield None.
    """
    if math.dist(tuple(p1), tuple(p2)) <= EPS_GEOM or math.dist(tuple(q1), tuple(q2)) <= EPS_GEOM:
        raise ValueError("segment_intersection requires non-degenerate segments")
    pt = _segment_crossing((p1.x, p1.y), (p2.x, p2.y), (q1.x, q1.y), (q2.x, q2.y))
    return None if pt is None else Vec2(pt[0], pt[1])


def point_in_rbox(p: Vec2, b: RBox2) -> bool:
    """Boundary-inclusive containment test in the box's local frame."""
    return _point_in_box(p.x, p.y, b.params())


def intersection_polygon(g: RBox2, d: RBox2) -> ConvexPoly | None:
    """Intersection region of two rotated boxes, or None when it is empty.

    Touching configurations with fewer than 3 distinct vertices count as
    empty (measure-zero overlap).
    """
    verts = _intersection_vertices(g.params(), d.params())
    if len(verts) < 3:
        return None
    return ConvexPoly(tuple(Vec2(x, y) for x, y, _ in verts))


def rotated_iou(g: RBox2, d: RBox2) -> OverlapResult:
    """IoU of two rotated boxes (reduces to aa_iou when both yaws are 0)."""
    parts = _iou2d_parts(g.params(), d.params())
    return OverlapResult(parts.inter, parts.union, parts.iou, parts.provenance)


def iou_3d(g: Box3, d: Box3) -> OverlapResult:
    """Volume IoU of two yaw-only cuboids: footprint overlap times height overlap."""
    parts = _iou3d_parts(g.params(), d.params())
    return OverlapResult(parts.inter_vol, parts.union_vol, parts.iou, parts.provenance)


def enclosing_aabb(g: RBox2, d: RBox2) -> AABox2:
    """Smallest axis-aligned rectangle covering every corner of both boxes."""
    xs = []
    ys = []
    for box in (g, d):
        for x, y in _corner_points(*box.params()):
            xs.append(x)
            ys.append(y)
    return AABox2(min(xs), min(ys), max(xs), max(ys))


def giou(g: RBox2, d: RBox2) -> float:
    """Generalized IoU: IoU minus the enclosing-box area not covered by the union.

    The enclosure is the axis-aligned rectangle over both boxes' corners; its
    corner-wise min/max stays piecewise-differentiable, unlike a minimum-area
    rotated enclosure.
    """
    return _giou2d_parts(g.params(), d.params()).giou


def giou_3d(g: Box3, d: Box3) -> float:
    """Generalized 3D IoU using the enclosing axis-aligned cuboid."""
    return _giou3d_parts(g.params(), d.params()).giou


# ---------------------------------------------------------------------------
# Generic-scalar pipelines shared with the gradient layer.


def _point_in_box(px: float, py: float, params) -> bool:
    cx, cy, w, l, yaw = (_val(p) for p in params)
    c = math.cos(yaw)
    s = math.sin(yaw)
    dx = px - cx
    dy = py - cy
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return abs(u) <= w * 0.5 + EPS_GEOM and abs(v) <= l * 0.5 + EPS_GEOM


def _segment_crossing(p1, p2, q1, q2):
    """Crossing of segments p1-p2 and q1-q2 in generic scalars, or None.

    The point solves the 2x2 linear system in the endpoints; expressing it
    through the parametric quotient keeps it differentiable in all eight
    coordinates once the crossing decision is fixed.
    """
    rx = p2[0] - p1[0]
    ry = p2[1] - p1[1]
    sx = q2[0] - q1[0]
    sy = q2[1] - q1[1]
    denom = rx * sy - ry * sx
    if abs(_val(denom)) <= EPS_GEOM:
        return None
    qpx = q1[0] - p1[0]
    qpy = q1[1] - p1[1]
    t = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    tv = _val(t)
    uv = _val(u)
    if tv < 0.0 or tv > 1.0 or uv < 0.0 or uv > 1.0:
        return None
    return (p1[0] + t * rx, p1[1] + t * ry)


def _intersection_vertices(g_params, d_params):
    """Deduplicated, anticlockwise-sorted intersection vertices with tags."""
    cg = _corner_points(*g_params)
    cd = _corner_points(*d_params)

    candidates = []
    for i, (x, y) in enumerate(cg):
        if _point_in_box(_val(x), _val(y), d_params):
            candidates.append((x, y, ("corner", 0, i)))
    for i, (x, y) in enumerate(cd):
        if _point_in_box(_val(x), _val(y), g_params):
            candidates.append((x, y, ("corner", 1, i)))
    for i in range(4):
        a1 = cg[i]
        a2 = cg[(i + 1) % 4]
        for j in range(4):
            pt = _segment_crossing(a1, a2, cd[j], cd[(j + 1) % 4])
            if pt is not None:
                candidates.append((pt[0], pt[1], ("cross", i, j)))

    kept = []
    kept_vals = []
    for x, y, tag in candidates:
        xv = _val(x)
        yv = _val(y)
        if any((xv - kx) ** 2 + (yv - ky) ** 2 < EPS_DEDUP**2 for kx, ky in kept_vals):
            continue
        kept.append((x, y, tag))
        kept_vals.append((xv, yv))

    if len(kept) < 3:
        return kept
    return _sort_anticlockwise(kept, kept_vals)


def _sort_anticlockwise(kept, kept_vals):
    n = len(kept_vals)
    cx = sum(v[0] for v in kept_vals) / n
    cy = sum(v[1] for v in kept_vals) / n
    keys = {
        id(item): (math.atan2(yv - cy, xv - cx), math.hypot(xv - cx, yv - cy))
        for item, (xv, yv) in zip(kept, kept_vals)
    }

    def compare(a, b):
        ang_a, dist_a = keys[id(a)]
        ang_b, dist_b = keys[id(b)]
        if abs(ang_a - ang_b) <= _ANGLE_TIE:
            return -1 if dist_a < dist_b else (1 if dist_a > dist_b else 0)
        return -1 if ang_a < ang_b else 1

    return sorted(kept, key=cmp_to_key(compare))


@dataclass
class _Parts2D:
    area_g: object
    area_d: object
    inter: object
    union: object
    iou: object
    provenance: Provenance
    corners_g: list
    corners_d: list


def _iou2d_parts(g_params, d_params) -> _Parts2D:
    verts = _intersection_vertices(g_params, d_params)
    area_g = g_params[2] * g_params[3]
    area_d = d_params[2] * d_params[3]

    if len(verts) < 3:
        inter = 0.0
        provenance = ()
    else:
        inter = _fan_area([(x, y) for x, y, _ in verts])
        if _val(inter) <= 0.0:
            inter = 0.0
        provenance = tuple(tag for _, _, tag in verts)

    union = area_g + area_d - inter
    iou = inter / union
    if _val(iou) > 1.0:
        iou = 1.0
    return _Parts2D(
        area_g,
        area_d,
        inter,
        union,
        iou,
        provenance,
        _corner_points(*g_params),
        _corner_points(*d_params),
    )


def _argmin(values: list[float]) -> int:
    return min(range(len(values)), key=values.__getitem__)


def _argmax(values: list[float]) -> int:
    return max(range(len(values)), key=values.__getitem__)


@dataclass
class _Giou2D:
    base: _Parts2D
    giou: object
    enclosure_choice: tuple[int, int, int, int]


def _giou2d_parts(g_params, d_params) -> _Giou2D:
    base = _iou2d_parts(g_params, d_params)
    xs = [p[0] for p in base.corners_g] + [p[0] for p in base.corners_d]
    ys = [p[1] for p in base.corners_g] + [p[1] for p in base.corners_d]
    xv = [_val(x) for x in xs]
    yv = [_val(y) for y in ys]
    # min/max route the adjoint to the single achieving corner (first wins).
    ix0 = _argmin(xv)
    ix1 = _argmax(xv)
    iy0 = _argmin(yv)
    iy1 = _argmax(yv)
    area_c = (xs[ix1] - xs[ix0]) * (ys[iy1] - ys[iy0])
    penalty = (area_c - base.union) / area_c
    if _val(penalty) < 0.0:
        penalty = 0.0
    return _Giou2D(base, base.iou - penalty, (ix0, ix1, iy0, iy1))


@dataclass
class _Parts3D:
    bev: _Parts2D
    inter_vol: object
    union_vol: object
    iou: object
    provenance: Provenance
    height_branch: tuple[bool, bool, bool]
    tops: tuple
    bots: tuple


def _iou3d_parts(g_params, d_params) -> _Parts3D:
    gx, gy, gz, gw, gl, gh, gyaw = g_params
    dx, dy, dz, dw, dl, dh, dyaw = d_params
    bev = _iou2d_parts((gx, gy, gw, gl, gyaw), (dx, dy, dw, dl, dyaw))

    top_g = gz + gh * 0.5
    bot_g = gz - gh * 0.5
    top_d = dz + dh * 0.5
    bot_d = dz - dh * 0.5
    top_is_g = _val(top_g) <= _val(top_d)
    bot_is_g = _val(bot_g) >= _val(bot_d)
    h_raw = (top_g if top_is_g else top_d) - (bot_g if bot_is_g else bot_d)
    clamped = _val(h_raw) <= 0.0
    h_ov = 0.0 if clamped else h_raw

    inter_vol = bev.inter * h_ov
    union_vol = bev.area_g * gh + bev.area_d * dh - inter_vol
    iou = inter_vol / union_vol
    if _val(iou) > 1.0:
        iou = 1.0
    return _Parts3D(
        bev,
        inter_vol,
        union_vol,
        iou,
        bev.provenance,
        (top_is_g, bot_is_g, clamped),
        (top_g, top_d),
        (bot_g, bot_d),
    )


@dataclass
class _Giou3D:
    base: _Parts3D
    giou: object
    enclosure_choice: tuple[int, ...]


def _giou3d_parts(g_params, d_params) -> _Giou3D:
    base = _iou3d_parts(g_params, d_params)
    xs = [p[0] for p in base.bev.corners_g] + [p[0] for p in base.bev.corners_d]
    ys = [p[1] for p in base.bev.corners_g] + [p[1] for p in base.bev.corners_d]
    xv = [_val(x) for x in xs]
    yv = [_val(y) for y in ys]
    ix0 = _argmin(xv)
    ix1 = _argmax(xv)
    iy0 = _argmin(yv)
    iy1 = _argmax(yv)
    top_g, top_d = base.tops
    bot_g, bot_d = base.bots
    z_top_is_g = _val(top_g) >= _val(top_d)
    z_bot_is_g = _val(bot_g) <= _val(bot_d)
    z_top = top_g if z_top_is_g else top_d
    z_bot = bot_g if z_bot_is_g else bot_d
    vol_c = (xs[ix1] - xs[ix0]) * (ys[iy1] - ys[iy0]) * (z_top - z_bot)
    penalty = (vol_c - base.union_vol) / vol_c
    if _val(penalty) < 0.0:
        penalty = 0.0
    return _Giou3D(
        base,
        base.iou - penalty,
        (ix0, ix1, iy0, iy1, int(z_top_is_g), int(z_bot_is_g)),
    )

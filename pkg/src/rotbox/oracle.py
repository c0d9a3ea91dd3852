"""Independent ground-truth generators for overlap testing.

Two oracles with different failure modes: a Monte-Carlo area estimator
(statistical) and a successive half-plane clipper (geometric, structurally
unlike the vertex-collection pipeline).  A bug in shared geometry code
cannot validate itself against both.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .geom import EPS_GEOM, Box3, RBox2, _corner_points
from .overlap import enclosing_aabb

_MC_CHUNK = 250_000


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo IoU estimate with its propagated standard error."""

    estimate: float
    stderr: float
    samples: int
    seed: int


def mc_iou(g: RBox2, d: RBox2, samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """Estimate IoU by uniform sampling over the pair's joint bounding box.

    Intersection and union indicators are counted per sample; the returned
    standard error propagates the window-scaled binomial errors of both area
    estimates through the ratio, including their covariance (an intersection
    hit is always a union hit).  Deterministic for a given seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    window = enclosing_aabb(g, d)
    rng = np.random.default_rng(seed)

    n_inter = 0
    n_union = 0
    remaining = samples
    while remaining > 0:
        chunk = min(_MC_CHUNK, remaining)
        xs = rng.uniform(window.x_min, window.x_max, chunk)
        ys = rng.uniform(window.y_min, window.y_max, chunk)
        in_g = _inside_mask(xs, ys, g)
        in_d = _inside_mask(xs, ys, d)
        n_inter += int(np.count_nonzero(in_g & in_d))
        n_union += int(np.count_nonzero(in_g | in_d))
        remaining -= chunk

    if n_union == 0:
        return McEstimate(0.0, float("inf"), samples, seed)

    estimate = n_inter / n_union
    area = window.area
    p_i = n_inter / samples
    p_u = n_union / samples
    a_i = p_i * area
    a_u = p_u * area
    var_i = area * area * p_i * (1.0 - p_i) / samples
    var_u = area * area * p_u * (1.0 - p_u) / samples
    cov = area * area * p_i * (1.0 - p_u) / samples
    var_ratio = (
        var_i / (a_u * a_u)
        + (a_i * a_i) * var_u / (a_u**4)
        - 2.0 * a_i * cov / (a_u**3)
    )
    stderr = math.sqrt(max(0.0, var_ratio))
    return McEstimate(estimate, stderr, samples, seed)


def _inside_mask(xs: np.ndarray, ys: np.ndarray, box: RBox2) -> np.ndarray:
    c = math.cos(box.yaw)
    s = math.sin(box.yaw)
    dx = xs - box.cx
    dy = ys - box.cy
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= box.w * 0.5 + EPS_GEOM) & (np.abs(v) <= box.l * 0.5 + EPS_GEOM)


def clip_iou(g: RBox2, d: RBox2) -> float:
    """IoU via successive half-plane clipping of one box against the other.

    Classic subject-against-clip-edges polygon clipping: keeps, for each edge
    of ``d`` in turn, the part of the running polygon on the inner side.
    """
    poly = _corner_points(*g.params())
    clip = _corner_points(*d.params())
    for j in range(4):
        poly = _clip_half_plane(poly, clip[j], clip[(j + 1) % 4])
        if len(poly) < 3:
            poly = []
            break

    inter = 0.0
    if poly:
        acc = 0.0
        for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
            acc += x0 * y1 - x1 * y0
        inter = max(0.0, 0.5 * acc)
    union = g.area + d.area - inter
    return min(1.0, inter / union)


def _clip_half_plane(poly, a, b):
    ex = b[0] - a[0]
    ey = b[1] - a[1]

    def side(p):
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    out = []
    for s, e in zip(poly, poly[1:] + poly[:1]):
        fs = side(s)
        fe = side(e)
        if fe >= 0.0:
            if fs < 0.0:
                out.append(_on_edge_point(s, e, fs, fe))
            out.append(e)
        elif fs >= 0.0:
            out.append(_on_edge_point(s, e, fs, fe))
    return out


def _on_edge_point(s, e, fs, fe):
    t = fs / (fs - fe)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


REGIMES = ("any", "overlap", "disjoint", "nested", "touch")


@dataclass(frozen=True)
class PairSpec:
    """Ranges and regime mix for the random pair generator.

    ``regimes`` is sampled uniformly per call; repeat an entry to weight it.
    """

    center_range: tuple[float, float] = (-4.0, 4.0)
    size_range: tuple[float, float] = (0.5, 4.0)
    yaw_range: tuple[float, float] = (-math.pi, math.pi)
    regimes: tuple[str, ...] = REGIMES

    def __post_init__(self):
        for name, (lo, hi) in (
            ("center_range", self.center_range),
            ("size_range", self.size_range),
            ("yaw_range", self.yaw_range),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"invalid {name}: ({lo}, {hi})")
        if self.size_range[0] <= 0.0:
            raise ValueError(f"sizes must be positive, got {self.size_range}")
        unknown = set(self.regimes) - set(REGIMES)
        if not self.regimes or unknown:
            raise ValueError(f"regimes must be a non-empty subset of {REGIMES}, got {self.regimes}")


def random_pair(spec: PairSpec = PairSpec(), seed: int = 0) -> tuple[RBox2, RBox2]:
    """Reproducible box pair covering the regime drawn from ``spec.regimes``.

    Overlap, disjointness, nesting and edge contact are guaranteed by
    construction (inscribed/circumscribed radii), not by testing overlap, so
    the generator stays independent of the code under test.
    """
    rng = random.Random(seed)
    regime = spec.regimes[rng.randrange(len(spec.regimes))]
    first = _random_box(rng, spec)

    if regime == "any":
        return first, _random_box(rng, spec)

    if regime == "overlap":
        second = _random_box(rng, spec)
        reach = 0.9 * (_inradius(first) + _inradius(second))
        phi = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(0.0, reach)
        return first, _moved(second, first.cx + r * math.cos(phi), first.cy + r * math.sin(phi))

    if regime == "disjoint":
        second = _random_box(rng, spec)
        gap = _circumradius(first) + _circumradius(second) + rng.uniform(0.1, 2.0)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        return first, _moved(second, first.cx + gap * math.cos(phi), first.cy + gap * math.sin(phi))

    if regime == "nested":
        inner_w = rng.uniform(*spec.size_range)
        inner_l = rng.uniform(*spec.size_range)
        scale = 0.9 * _inradius(first) / math.hypot(inner_w * 0.5, inner_l * 0.5)
        inner = RBox2(
            first.cx,
            first.cy,
            inner_w * scale,
            inner_l * scale,
            rng.uniform(*spec.yaw_range),
        )
        slack = _inradius(first) - _circumradius(inner)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(0.0, 0.5 * max(0.0, slack))
        return first, _moved(inner, first.cx + r * math.cos(phi), first.cy + r * math.sin(phi))

    # touch: same yaw, second box translated along the first's local x axis
    # until the facing edges are flush.
    w2 = rng.uniform(*spec.size_range)
    l2 = rng.uniform(*spec.size_range)
    shift = (first.w + w2) * 0.5
    c = math.cos(first.yaw)
    s = math.sin(first.yaw)
    return first, RBox2(first.cx + shift * c, first.cy + shift * s, w2, l2, first.yaw)


def random_pair_3d(spec: PairSpec = PairSpec(), seed: int = 0) -> tuple[Box3, Box3]:
    """Lift a 2D pair to cuboids with heights and vertical centers from ``spec``."""
    g2, d2 = random_pair(spec, seed)
    rng = random.Random((seed << 1) ^ 0x9E3779B9)
    boxes = []
    for flat in (g2, d2):
        h = rng.uniform(*spec.size_range)
        cz = rng.uniform(spec.center_range[0], spec.center_range[1]) * 0.25
        boxes.append(Box3(flat.cx, flat.cy, cz, flat.w, flat.l, h, flat.yaw))
    return boxes[0], boxes[1]


def _random_box(rng: random.Random, spec: PairSpec) -> RBox2:
    return RBox2(
        rng.uniform(*spec.center_range),
        rng.uniform(*spec.center_range),
        rng.uniform(*spec.size_range),
        rng.uniform(*spec.size_range),
        rng.uniform(*spec.yaw_range),
    )


def _moved(box: RBox2, cx: float, cy: float) -> RBox2:
    return RBox2(cx, cy, box.w, box.l, box.yaw)


def _inradius(box: RBox2) -> float:
    return 0.5 * min(box.w, box.l)


def _circumradius(box: RBox2) -> float:
    return 0.5 * math.hypot(box.w, box.l)

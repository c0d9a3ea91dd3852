"""Box and point primitives: parameterization, corner extraction, angles, areas.

All types are immutable values and every function is pure, so everything here
is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Absolute tolerance for cross products and areas in normalized units.
EPS_GEOM = 1e-9
# Candidate intersection vertices closer than this are merged.
EPS_DEDUP = 1e-7

# Counterclockwise corner order, starting from the local (+w/2, +l/2) corner.
_CORNER_SIGNS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


def normalize_angle(theta: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    r = math.fmod(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    elif r > math.pi:
        r -= 2.0 * math.pi
    return r


def _val(x):
    """Plain float behind a scalar-like operand (floats pass through)."""
    return getattr(x, "value", x)


def _sin(x):
    return x.sin() if hasattr(x, "sin") else math.sin(x)


def _cos(x):
    return x.cos() if hasattr(x, "cos") else math.cos(x)


def _corner_points(cx, cy, w, l, yaw):
    """Four (x, y) corners of a rotated rectangle, counterclockwise.

    Works on plain floats or any scalar type with arithmetic operators and
    sin/cos methods, so the same code serves the numeric and differentiable
    paths.
    """
    c = _cos(yaw)
    s = _sin(yaw)
    hw = w * 0.5
    hl = l * 0.5
    pts = []
    for su, sv in _CORNER_SIGNS:
        u = hw * su
        v = hl * sv
        pts.append((cx + c * u - s * v, cy + s * u + c * v))
    return pts


def _fan_area(pts):
    """Signed area of a polygon as a triangle fan about its first vertex."""
    x0, y0 = pts[0]
    total = 0.0
    for k in range(1, len(pts) - 1):
        ax = pts[k][0] - x0
        ay = pts[k][1] - y0
        bx = pts[k + 1][0] - x0
        by = pts[k + 1][1] - y0
        total = total + (ax * by - ay * bx)
    return total * 0.5


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} requires finite fields, got {v!r}")


@dataclass(frozen=True)
class Vec2:
    """A 2D point or direction."""

    x: float
    y: float

    def __post_init__(self):
        _check_finite("Vec2", self.x, self.y)

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class AABox2:
    """Axis-aligned rectangle given by its min/max corners."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        _check_finite("AABox2", self.x_min, self.y_min, self.x_max, self.y_max)
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"AABox2 min corner must not exceed max corner: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class RBox2:
    """Rotated rectangle: center, extents along its local axes, and yaw.

    ``w`` is the extent along the local x axis and ``l`` along the local y
    axis before rotation.  ``yaw`` is counterclockwise in radians, zero when
    the local axes line up with the world axes; it is normalized to
    (-pi, pi] at construction.  Degenerate extents are rejected here so the
    overlap and gradient code never sees zero-area operands.
    """

    cx: float
    cy: float
    w: float
    l: float
    yaw: float

    def __post_init__(self):
        _check_finite("RBox2", self.cx, self.cy, self.w, self.l, self.yaw)
        if self.w <= 0.0 or self.l <= 0.0:
            raise ValueError(f"RBox2 extents must be positive, got w={self.w} l={self.l}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def area(self) -> float:
        return self.w * self.l

    def params(self) -> tuple[float, float, float, float, float]:
        return (self.cx, self.cy, self.w, self.l, self.yaw)


@dataclass(frozen=True)
class Box3:
    """Yaw-only 3D cuboid: center, footprint extents, height, and yaw."""

    cx: float
    cy: float
    cz: float
    w: float
    l: float
    h: float
    yaw: float

    def __post_init__(self):
        _check_finite("Box3", self.cx, self.cy, self.cz, self.w, self.l, self.h, self.yaw)
        if self.w <= 0.0 or self.l <= 0.0 or self.h <= 0.0:
            raise ValueError(
                f"Box3 extents must be positive, got w={self.w} l={self.l} h={self.h}"
            )
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def volume(self) -> float:
        return self.w * self.l * self.h

    def bev(self) -> RBox2:
        """Bird-eye-view footprint, keeping (cx, cy, w, l, yaw) unchanged."""
        return RBox2(self.cx, self.cy, self.w, self.l, self.yaw)

    def params(self) -> tuple[float, ...]:
        return (self.cx, self.cy, self.cz, self.w, self.l, self.h, self.yaw)


@dataclass(frozen=True)
class ConvexPoly:
    """Convex polygon as a counterclockwise vertex tuple (3 to 8 vertices)."""

    vertices: tuple[Vec2, ...]

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if not 3 <= n <= 8:
            raise ValueError(f"ConvexPoly needs 3..8 vertices, got {n}")
        for i in range(n):
            ax = verts[(i + 1) % n].x - verts[i].x
            ay = verts[(i + 1) % n].y - verts[i].y
            bx = verts[(i + 2) % n].x - verts[(i + 1) % n].x
            by = verts[(i + 2) % n].y - verts[(i + 1) % n].y
            if ax * by - ay * bx < -EPS_GEOM:
                raise ValueError("ConvexPoly vertices must be convex and counterclockwise")
        if _fan_area([(v.x, v.y) for v in verts]) < -EPS_GEOM:
            raise ValueError("ConvexPoly must have nonnegative area")

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self):
        return len(self.vertices)


def corners(box: RBox2) -> list[Vec2]:
    """Counterclockwise corners of ``box``, starting at local (+w/2, +l/2)."""
    return [Vec2(x, y) for x, y in _corner_points(*box.params())]


def shoelace_area(poly) -> float:
    """Nonnegative area of a counterclockwise polygon (triangle-fan sum).

    Accepts a ConvexPoly or any sequence of points with x/y access.
    """
    pts = [(p[0], p[1]) if isinstance(p, tuple) else (p.x, p.y) for p in poly]
    if len(pts) < 3:
        raise ValueError(f"polygon area needs at least 3 vertices, got {len(pts)}")
    return _fan_area(pts)

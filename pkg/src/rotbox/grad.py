"""Reverse-mode gradients for the overlap pipelines.

A small scalar tape records every arithmetic operation while the overlap code
runs on ``DiffScalar`` operands instead of floats.  Branch decisions
(containment, crossings, the anticlockwise sort, min/max selection) read
plain values, so the recorded graph covers exactly one smooth piece and the
backward sweep yields its exact derivatives.  Re-running the shared pipeline
this way reproduces the plain forward values bit for bit.

Each public entry point builds a fresh tape, so the module is reentrant and
safe to call from multiple threads; a single tape must not be shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .geom import Box3, RBox2
from .overlap import _giou2d_parts, _giou3d_parts, _iou2d_parts, _iou3d_parts


class Tape:
    """Append-only record of scalar operations; parents always precede children."""

    __slots__ = ("_parents", "_partials")

    def __init__(self):
        self._parents: list[tuple[int, ...]] = []
        self._partials: list[tuple[float, ...]] = []

    def __len__(self) -> int:
        return len(self._parents)

    def leaf(self, value: float) -> "DiffScalar":
        return self._record(value, (), ())

    def _record(self, value, parents, partials) -> "DiffScalar":
        node_id = len(self._parents)
        self._parents.append(parents)
        self._partials.append(partials)
        return DiffScalar(self, value, node_id)

    def backward(self, output: "DiffScalar") -> list[float]:
        """Adjoint of every node with respect to ``output`` (seeded with 1)."""
        if output.tape is not self:
            raise ValueError("output belongs to a different tape")
        adjoint = [0.0] * len(self._parents)
        adjoint[output.node_id] = 1.0
        for i in range(output.node_id, -1, -1):
            a = adjoint[i]
            if a == 0.0:
                continue
            for parent, partial in zip(self._parents[i], self._partials[i]):
                adjoint[parent] += a * partial
        return adjoint


class DiffScalar:
    """A float plus its node on a tape.  Comparisons read the plain value."""

    __slots__ = ("tape", "value", "node_id")

    def __init__(self, tape: Tape, value: float, node_id: int):
        self.tape = tape
        self.value = value
        self.node_id = node_id

    def __repr__(self):
        return f"DiffScalar({self.value!r}, node={self.node_id})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, DiffScalar):
            return self.tape._record(
                self.value + other.value, (self.node_id, other.node_id), (1.0, 1.0)
            )
        return self.tape._record(self.value + other, (self.node_id,), (1.0,))

    def __radd__(self, other):
        return self.tape._record(other + self.value, (self.node_id,), (1.0,))

    def __sub__(self, other):
        if isinstance(other, DiffScalar):
            return self.tape._record(
                self.value - other.value, (self.node_id, other.node_id), (1.0, -1.0)
            )
        return self.tape._record(self.value - other, (self.node_id,), (1.0,))

    def __rsub__(self, other):
        return self.tape._record(other - self.value, (self.node_id,), (-1.0,))

    def __mul__(self, other):
        if isinstance(other, DiffScalar):
            return self.tape._record(
                self.value * other.value,
                (self.node_id, other.node_id),
                (other.value, self.value),
            )
        return self.tape._record(self.value * other, (self.node_id,), (other,))

    def __rmul__(self, other):
        return self.tape._record(other * self.value, (self.node_id,), (other,))

    def __truediv__(self, other):
        if isinstance(other, DiffScalar):
            inv = 1.0 / other.value
            return self.tape._record(
                self.value / other.value,
                (self.node_id, other.node_id),
                (inv, -self.value * inv * inv),
            )
        return self.tape._record(self.value / other, (self.node_id,), (1.0 / other,))

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        return self.tape._record(other / self.value, (self.node_id,), (-other * inv * inv,))

    def __neg__(self):
        return self.tape._record(-self.value, (self.node_id,), (-1.0,))

    def sin(self):
        return self.tape._record(math.sin(self.value), (self.node_id,), (math.cos(self.value),))

    def cos(self):
        return self.tape._record(math.cos(self.value), (self.node_id,), (-math.sin(self.value),))

    # -- comparisons (branch decisions; never recorded) ----------------------

    def __lt__(self, other):
        return self.value < _plain(other)

    def __le__(self, other):
        return self.value <= _plain(other)

    def __gt__(self, other):
        return self.value > _plain(other)

    def __ge__(self, other):
        return self.value >= _plain(other)


def _plain(x) -> float:
    return x.value if isinstance(x, DiffScalar) else x


@dataclass(frozen=True)
class BoxGrad2:
    """Partial derivatives with respect to a rotated box's five parameters."""

    d_cx: float
    d_cy: float
    d_w: float
    d_l: float
    d_yaw: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.d_cx, self.d_cy, self.d_w, self.d_l, self.d_yaw)

    def scaled(self, k: float) -> "BoxGrad2":
        return BoxGrad2(*(k * g for g in self.as_tuple()))

    @classmethod
    def zero(cls) -> "BoxGrad2":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class BoxGrad3:
    """Partial derivatives with respect to a cuboid's seven parameters."""

    d_cx: float
    d_cy: float
    d_cz: float
    d_w: float
    d_l: float
    d_h: float
    d_yaw: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.d_cx, self.d_cy, self.d_cz, self.d_w, self.d_l, self.d_h, self.d_yaw)

    def scaled(self, k: float) -> "BoxGrad3":
        return BoxGrad3(*(k * g for g in self.as_tuple()))

    @classmethod
    def zero(cls) -> "BoxGrad3":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _run_taped(values_g, values_d, parts_fn, out_attr, grad_cls):
    tape = Tape()
    leaves_g = [tape.leaf(v) for v in values_g]
    leaves_d = [tape.leaf(v) for v in values_d]
    parts = parts_fn(tuple(leaves_g), tuple(leaves_d))
    out = getattr(parts, out_attr)
    if not isinstance(out, DiffScalar):
        # Fully clamped output (e.g. IoU pinned at 1): constant on this piece.
        return float(out), grad_cls.zero(), grad_cls.zero(), parts
    adjoint = tape.backward(out)
    grad_g = grad_cls(*(adjoint[leaf.node_id] for leaf in leaves_g))
    grad_d = grad_cls(*(adjoint[leaf.node_id] for leaf in leaves_d))
    return out.value, grad_d, grad_g, parts


def diff_rotated_iou(g: RBox2, d: RBox2) -> tuple[float, BoxGrad2, BoxGrad2]:
    """IoU of two rotated boxes with gradients for both parameter sets."""
    iou, grad_d, grad_g, _ = _run_taped(g.params(), d.params(), _iou2d_parts, "iou", BoxGrad2)
    return iou, grad_d, grad_g


def diff_giou(g: RBox2, d: RBox2) -> tuple[float, BoxGrad2, BoxGrad2]:
    """Generalized IoU with gradients; the enclosure keeps these nonzero when disjoint."""
    val, grad_d, grad_g, _ = _run_taped(g.params(), d.params(), _giou2d_parts, "giou", BoxGrad2)
    return val, grad_d, grad_g


def diff_iou_3d(g: Box3, d: Box3) -> tuple[float, BoxGrad3, BoxGrad3]:
    """Volume IoU with gradients; the height clamp zeroes adjoints when active."""
    iou, grad_d, grad_g, _ = _run_taped(g.params(), d.params(), _iou3d_parts, "iou", BoxGrad3)
    return iou, grad_d, grad_g


def diff_giou_3d(g: Box3, d: Box3) -> tuple[float, BoxGrad3, BoxGrad3]:
    """Generalized 3D IoU with gradients via the enclosing cuboid."""
    val, grad_d, grad_g, _ = _run_taped(g.params(), d.params(), _giou3d_parts, "giou", BoxGrad3)
    return val, grad_d, grad_g


# ---------------------------------------------------------------------------
# Finite-difference verification.


class NonSmoothPointError(RuntimeError):
    """The configuration sits too close to a branch boundary to difference."""


@dataclass(frozen=True)
class GradCheckResult:
    """Per-parameter relative errors of analytic vs central differences."""

    errors: tuple[float, ...]
    max_error: float
    analytic: tuple[float, ...]
    numeric: tuple[float, ...]


# Below this magnitude, gradient components are compared absolutely
# (guards the quotient against finite-difference round-off noise).
_REL_FLOOR = 1e-3


class PairFunction:
    """Scalar function of concatenated box parameters, with gradient and branch signature.

    ``signature`` is pure branch information (vertex provenance, min/max and
    clamp selections); two evaluations on the same smooth piece share it.
    """

    def __init__(self, parts_fn, out_attr: str, n_params: int, signature_fn):
        self._parts_fn = parts_fn
        self._out = out_attr
        self.n_params = n_params
        self._signature_fn = signature_fn

    def _split(self, params: Sequence[float]):
        if len(params) != 2 * self.n_params:
            raise ValueError(f"expected {2 * self.n_params} parameters, got {len(params)}")
        return tuple(params[: self.n_params]), tuple(params[self.n_params :])

    def value_and_signature(self, params: Sequence[float]) -> tuple[float, tuple]:
        gp, dp = self._split(params)
        parts = self._parts_fn(gp, dp)
        return float(getattr(parts, self._out)), self._signature_fn(parts)

    def value_grad_signature(self, params: Sequence[float]):
        gp, dp = self._split(params)
        grad_cls = BoxGrad2 if self.n_params == 5 else BoxGrad3
        value, grad_d, grad_g, parts = _run_taped(gp, dp, self._parts_fn, self._out, grad_cls)
        grads = grad_g.as_tuple() + grad_d.as_tuple()
        return value, grads, self._signature_fn(parts)


def _sig_iou2d(parts):
    return ("iou2d", parts.provenance)


def _sig_giou2d(parts):
    return ("giou2d", parts.base.provenance, parts.enclosure_choice)


def _sig_iou3d(parts):
    return ("iou3d", parts.provenance, parts.height_branch)


def _sig_giou3d(parts):
    return ("giou3d", parts.base.provenance, parts.base.height_branch, parts.enclosure_choice)


def box_pair_function(kind: str = "iou", boxdim: str = "2d") -> PairFunction:
    """Build the checkable function for one metric: kind in {iou, giou}, boxdim in {2d, 3d}."""
    table = {
        ("iou", "2d"): (_iou2d_parts, "iou", 5, _sig_iou2d),
        ("giou", "2d"): (_giou2d_parts, "giou", 5, _sig_giou2d),
        ("iou", "3d"): (_iou3d_parts, "iou", 7, _sig_iou3d),
        ("giou", "3d"): (_giou3d_parts, "giou", 7, _sig_giou3d),
    }
    try:
        parts_fn, out_attr, n, sig_fn = table[(kind, boxdim)]
    except KeyError:
        raise ValueError(f"unknown metric: kind={kind!r} boxdim={boxdim!r}") from None
    return PairFunction(parts_fn, out_attr, n, sig_fn)


def finite_diff_check(
    fn: PairFunction | Callable,
    point: Sequence[float],
    step: float = 1e-6,
) -> GradCheckResult:
    """Compare an analytic gradient against central differences at ``point``.

    Raises NonSmoothPointError when the branch signature changes anywhere
    within 10*step of the point along a parameter axis, instead of reporting
    a spurious mismatch.  The reported error per parameter is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    point = [float(p) for p in point]
    value, analytic, sig0 = fn.value_grad_signature(point)

    def probe(i: int, delta: float) -> float:
        shifted = list(point)
        shifted[i] += delta
        v, sig = fn.value_and_signature(shifted)
        if sig != sig0:
            raise NonSmoothPointError(
                f"branch signature changes within {delta:+.2e} of parameter {i}"
            )
        return v

    n = len(point)
    for i in range(n):
        # Margin check: the smooth piece must extend well past the stencil.
        probe(i, 10.0 * step)
        probe(i, -10.0 * step)

    numeric = []
    for i in range(n):
        f_plus = probe(i, step)
        f_minus = probe(i, -step)
        numeric.append((f_plus - f_minus) / (2.0 * step))

    errors = tuple(
        abs(a - c) / max(abs(a), abs(c), _REL_FLOOR) for a, c in zip(analytic, numeric)
    )
    return GradCheckResult(errors, max(errors) if errors else 0.0, tuple(analytic), tuple(numeric))

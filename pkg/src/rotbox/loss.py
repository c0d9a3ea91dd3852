"""Batched box-regression losses: 1 - IoU and 1 - GIoU, with gradients.

Only the box term is exposed; weighting against classification or other
detector losses is left to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .geom import Box3, RBox2
from .grad import (
    BoxGrad2,
    BoxGrad3,
    diff_giou,
    diff_giou_3d,
    diff_iou_3d,
    diff_rotated_iou,
)


class LossKind(str, Enum):
    IOU = "iou"
    GIOU = "giou"


class Dimensionality(str, Enum):
    ROT2D = "rot2d"
    BOX3D = "box3d"


class Reduction(str, Enum):
    MEAN = "mean"
    SUM = "sum"
    NONE = "none"


@dataclass(frozen=True)
class LossSpec:
    """One loss configuration: metric kind, box dimensionality, reduction."""

    kind: LossKind = LossKind.IOU
    dimensionality: Dimensionality = Dimensionality.ROT2D
    reduction: Reduction = Reduction.MEAN


@dataclass(frozen=True)
class BatchLossResult:
    """Per-pair losses (unreduced), the reduced total, and per-pair gradients.

    Gradients are with respect to the predicted parameters and already carry
    the reduction scaling: with mean reduction each entry is the gradient of
    ``total``.  For ``none`` the total is the plain sum.
    """

    per_pair_loss: tuple[float, ...]
    total: float
    per_pair_grad_d: tuple[BoxGrad2 | BoxGrad3, ...]


_METRICS = {
    (LossKind.IOU, Dimensionality.ROT2D): (diff_rotated_iou, RBox2),
    (LossKind.GIOU, Dimensionality.ROT2D): (diff_giou, RBox2),
    (LossKind.IOU, Dimensionality.BOX3D): (diff_iou_3d, Box3),
    (LossKind.GIOU, Dimensionality.BOX3D): (diff_giou_3d, Box3),
}


def iou_loss(spec: LossSpec, predicted: Sequence, target: Sequence) -> BatchLossResult:
    """Per-pair loss 1 - metric(target_i, predicted_i) with gradients.

    Raises ValueError on an empty batch, mismatched lengths, or boxes that do
    not match ``spec.dimensionality``.
    """
    if len(predicted) != len(target):
        raise ValueError(f"batch length mismatch: {len(predicted)} predicted vs {len(target)} target")
    if not predicted:
        raise ValueError("empty batch")
    metric, box_type = _METRICS[(spec.kind, spec.dimensionality)]
    for i, box in enumerate(predicted):
        if not isinstance(box, box_type):
            raise ValueError(f"predicted[{i}] is {type(box).__name__}, expected {box_type.__name__}")
    for i, box in enumerate(target):
        if not isinstance(box, box_type):
            raise ValueError(f"target[{i}] is {type(box).__name__}, expected {box_type.__name__}")

    losses = []
    grads = []
    for g, d in zip(target, predicted):
        value, grad_d, _ = metric(g, d)
        losses.append(1.0 - value)
        grads.append(grad_d.scaled(-1.0))

    n = len(losses)
    if spec.reduction is Reduction.MEAN:
        total = sum(losses) / n
        grads = [grad.scaled(1.0 / n) for grad in grads]
    else:
        total = sum(losses)
    return BatchLossResult(tuple(losses), total, tuple(grads))

"""Batched array surface over the rotbox loss layer.

Training frameworks hold box parameters as row-major arrays, so this module
exposes one function per loss kind taking N x 5 (cx, cy, w, l, yaw) or N x 7
(cx, cy, cz, w, l, h, yaw) float arrays and returning per-row losses plus
gradients with respect to the predicted rows.  Inputs already laid out as
contiguous float64 are used without copying; anything else is converted.

The functions keep no state between calls and may be called from multiple
threads.  Wrapping the returned gradients in a framework's custom backward
node is the caller's job.
"""

from __future__ import annotations

import numpy as np

from rotbox import Box3, Dimensionality, LossKind, LossSpec, RBox2, Reduction, iou_loss

__version__ = "0.1.0"


def version() -> str:
    """Version of this binding layer."""
    return __version__


def iou_loss_batch(predicted, target, reduction: str = "none"):
    """Per-row 1 - IoU losses and gradients for box parameter arrays.

    Returns ``(losses, grads)``: losses has shape (N,), grads matches the
    predicted array's shape.  ``reduction`` scales gradients like the loss
    layer does ('mean' divides by N; 'sum' and 'none' leave them unscaled).
    """
    return _batch(LossKind.IOU, predicted, target, reduction)


def giou_loss_batch(predicted, target, reduction: str = "none"):
    """Per-row 1 - GIoU losses and gradients; see iou_loss_batch."""
    return _batch(LossKind.GIOU, predicted, target, reduction)


_BOX_TYPES = {5: (Dimensionality.ROT2D, RBox2), 7: (Dimensionality.BOX3D, Box3)}


def _batch(kind: LossKind, predicted, target, reduction: str):
    pred = np.asarray(predicted, dtype=np.float64)
    targ = np.asarray(target, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] not in _BOX_TYPES:
        raise ValueError(f"predicted must be N x 5 or N x 7, got shape {pred.shape}")
    if targ.shape != pred.shape:
        raise ValueError(f"shape mismatch: predicted {pred.shape} vs target {targ.shape}")
    dimensionality, box_type = _BOX_TYPES[pred.shape[1]]

    def rows_to_boxes(arr, name):
        boxes = []
        for i, row in enumerate(arr):
            try:
                boxes.append(box_type(*(float(v) for v in row)))
            except ValueError as exc:
                raise ValueError(f"{name} row {i}: {exc}") from None
        return boxes

    spec = LossSpec(kind, dimensionality, Reduction(reduction))
    result = iou_loss(spec, rows_to_boxes(pred, "predicted"), rows_to_boxes(targ, "target"))
    losses = np.array(result.per_pair_loss, dtype=np.float64)
    grads = np.array([g.as_tuple() for g in result.per_pair_grad_d], dtype=np.float64)
    return losses, grads

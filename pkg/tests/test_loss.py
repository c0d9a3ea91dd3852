import math

import pytest

from rotbox import (
    Box3,
    Dimensionality,
    LossKind,
    LossSpec,
    PairSpec,
    RBox2,
    Reduction,
    diff_rotated_iou,
    iou_loss,
    random_pair,
    random_pair_3d,
    rotated_iou,
)

SPEC_IOU = LossSpec(LossKind.IOU, Dimensionality.ROT2D, Reduction.NONE)
SPEC_GIOU = LossSpec(LossKind.GIOU, Dimensionality.ROT2D, Reduction.NONE)


def batch(seed0, n):
    pairs = [random_pair(seed=seed0 + i) for i in range(n)]
    return [d for _, d in pairs], [g for g, _ in pairs]


class TestValues:
    def test_perfect_prediction_zero_loss(self):
        boxes = [RBox2(0, 0, 2, 4, 0.0), RBox2(1, -1, 1, 3, 0.0)]
        result = iou_loss(SPEC_IOU, boxes, boxes)
        assert all(loss == pytest.approx(0.0, abs=1e-12) for loss in result.per_pair_loss)

    def test_disjoint_pair_plateau(self):
        predicted = [RBox2(9, 9, 1, 1, 0.0)]
        target = [RBox2(0, 0, 1, 1, 0.0)]
        result = iou_loss(SPEC_IOU, predicted, target)
        assert result.per_pair_loss == (1.0,)
        assert all(g == 0.0 for g in result.per_pair_grad_d[0].as_tuple())

    def test_crossed_squares_closed_form(self):
        predicted = [RBox2(0, 0, 2, 2, math.pi / 4)]
        target = [RBox2(0, 0, 2, 2, 0)]
        result = iou_loss(SPEC_IOU, predicted, target)
        assert result.per_pair_loss[0] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-9)

    def test_loss_is_one_minus_forward(self):
        predicted, target = batch(1000, 50)
        result = iou_loss(SPEC_IOU, predicted, target)
        for loss, d, g in zip(result.per_pair_loss, predicted, target):
            assert loss == pytest.approx(1.0 - rotated_iou(g, d).iou, abs=1e-12)

    def test_gradient_is_negated_metric_gradient(self):
        predicted, target = batch(2000, 20)
        result = iou_loss(SPEC_IOU, predicted, target)
        for grad, d, g in zip(result.per_pair_grad_d, predicted, target):
            _, metric_grad, _ = diff_rotated_iou(g, d)
            for a, b in zip(grad.as_tuple(), metric_grad.as_tuple()):
                assert a == -b

    def test_iou_loss_range(self):
        predicted, target = batch(3000, 100)
        result = iou_loss(SPEC_IOU, predicted, target)
        assert all(0.0 <= loss <= 1.0 for loss in result.per_pair_loss)

    def test_giou_loss_range(self):
        predicted, target = batch(4000, 100)
        result = iou_loss(SPEC_GIOU, predicted, target)
        assert all(0.0 <= loss < 2.0 for loss in result.per_pair_loss)

    def test_3d_batch(self):
        pairs = [random_pair_3d(seed=7000 + i) for i in range(20)]
        predicted = [d for _, d in pairs]
        target = [g for g, _ in pairs]
        spec = LossSpec(LossKind.IOU, Dimensionality.BOX3D, Reduction.NONE)
        result = iou_loss(spec, predicted, target)
        assert len(result.per_pair_loss) == 20
        assert all(0.0 <= loss <= 1.0 for loss in result.per_pair_loss)
        assert len(result.per_pair_grad_d[0].as_tuple()) == 7


class TestReduction:
    def test_sum_equals_none_total(self):
        predicted, target = batch(5000, 30)
        none_result = iou_loss(SPEC_IOU, predicted, target)
        sum_result = iou_loss(
            LossSpec(LossKind.IOU, Dimensionality.ROT2D, Reduction.SUM), predicted, target
        )
        assert sum_result.total == pytest.approx(sum(none_result.per_pair_loss), abs=1e-12)

    def test_mean_equals_sum_over_count(self):
        predicted, target = batch(6000, 30)
        sum_result = iou_loss(
            LossSpec(LossKind.IOU, Dimensionality.ROT2D, Reduction.SUM), predicted, target
        )
        mean_result = iou_loss(
            LossSpec(LossKind.IOU, Dimensionality.ROT2D, Reduction.MEAN), predicted, target
        )
        assert mean_result.total == pytest.approx(sum_result.total / 30, abs=1e-12)

    def test_mean_scales_gradients(self):
        predicted, target = batch(6500, 10)
        none_result = iou_loss(SPEC_IOU, predicted, target)
        mean_result = iou_loss(
            LossSpec(LossKind.IOU, Dimensionality.ROT2D, Reduction.MEAN), predicted, target
        )
        for g_none, g_mean in zip(none_result.per_pair_grad_d, mean_result.per_pair_grad_d):
            for a, b in zip(g_none.as_tuple(), g_mean.as_tuple()):
                assert b == pytest.approx(a / 10, rel=1e-12, abs=1e-300)


class TestValidation:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            iou_loss(SPEC_IOU, [RBox2(0, 0, 1, 1, 0)], [])

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            iou_loss(SPEC_IOU, [], [])

    def test_dimensionality_mismatch(self):
        with pytest.raises(ValueError, match="predicted\\[0\\]"):
            iou_loss(SPEC_IOU, [Box3(0, 0, 0, 1, 1, 1, 0)], [Box3(0, 0, 0, 1, 1, 1, 0)])


def test_descent_step_decreases_loss():
    # one small step along the negative gradient must reduce the loss at any
    # smooth point with a nonzero gradient
    eta = 1e-3
    checked = 0
    seed = 8000
    while checked < 100:
        g, d = random_pair(PairSpec(regimes=("overlap", "nested")), seed=seed)
        seed += 1
        result = iou_loss(SPEC_IOU, [d], [g])
        grad = result.per_pair_grad_d[0].as_tuple()
        if all(abs(x) < 1e-9 for x in grad):
            continue
        new_params = [p - eta * gr for p, gr in zip(d.params(), grad)]
        if new_params[2] <= 0 or new_params[3] <= 0:
            continue
        moved = RBox2(*new_params)
        new_loss = iou_loss(SPEC_IOU, [moved], [g]).per_pair_loss[0]
        assert new_loss < result.per_pair_loss[0]
        checked += 1

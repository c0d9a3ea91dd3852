import math
import random

import pytest

from rotbox import (
    AABox2,
    Box3,
    Detection,
    Difficulty,
    EvalConfig,
    EvalMode,
    GtObject,
    Interpolation,
    assign_difficulty,
    average_precision,
    evaluate,
    iou_3d,
    match_frame,
    rotated_iou,
)

EASY_BBOX = AABox2(100.0, 100.0, 150.0, 150.0)  # height 50 px


def make_gt(frame, cx, cy=0.0, *, yaw=0.3, trunc=0.0, occ=0, bbox=EASY_BBOX, label="Car"):
    return GtObject(frame, label, Box3(cx, cy, 0.8, 1.8, 4.2, 1.6, yaw), trunc, occ, bbox)


def make_det(gt, score, box=None):
    return Detection(gt.frame_id, gt.class_label, box or gt.box, score, gt.image_bbox)


def shift_along_heading(box: Box3, delta: float) -> Box3:
    return Box3(
        box.cx + delta * math.cos(box.yaw),
        box.cy + delta * math.sin(box.yaw),
        box.cz,
        box.w,
        box.l,
        box.h,
        box.yaw,
    )


class TestAssignDifficulty:
    def test_easy(self):
        assert assign_difficulty(make_gt("0", 0.0)) is Difficulty.EASY

    def test_moderate(self):
        gt = make_gt("0", 0.0, trunc=0.2, occ=1, bbox=AABox2(0, 0, 40, 30))
        assert assign_difficulty(gt) is Difficulty.MODERATE

    def test_hard(self):
        gt = make_gt("0", 0.0, trunc=0.45, occ=2, bbox=AABox2(0, 0, 40, 30))
        assert assign_difficulty(gt) is Difficulty.HARD

    def test_ignored_below_min_height(self):
        gt = make_gt("0", 0.0, bbox=AABox2(0, 0, 40, 20))
        assert assign_difficulty(gt) is Difficulty.IGNORED


class TestMatchFrame:
    def test_exact_detection_is_tp(self):
        gt = make_gt("0", 0.0)
        result = match_frame([make_det(gt, 0.9)], [gt], 0.7, EvalMode.BEV)
        assert [flag for _, flag in result.det_flags] == ["tp"]
        assert result.n_valid_gt == 1

    def test_double_detection_single_match(self):
        gt = make_gt("0", 0.0)
        dets = [make_det(gt, 0.6), make_det(gt, 0.9)]
        result = match_frame(dets, [gt], 0.7, EvalMode.BEV)
        flags = {det.score: flag for det, flag in result.det_flags}
        assert flags == {0.9: "tp", 0.6: "fp"}

    def test_detection_on_ignored_gt_is_discarded(self):
        ignored_gt = make_gt("0", 0.0, bbox=AABox2(0, 0, 40, 20))
        det = make_det(ignored_gt, 0.9)
        result = match_frame([det], [ignored_gt], 0.7, EvalMode.BEV)
        assert [flag for _, flag in result.det_flags] == ["ignored"]
        assert result.n_valid_gt == 0

    def test_low_overlap_is_fp(self):
        gt = make_gt("0", 0.0)
        det = make_det(gt, 0.9, box=shift_along_heading(gt.box, 3.0))
        result = match_frame([det], [gt], 0.7, EvalMode.BEV)
        assert [flag for _, flag in result.det_flags] == ["fp"]

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            match_frame([], [], 1.5, EvalMode.BEV)


class TestAveragePrecision:
    def test_perfect_detector(self):
        points = [(0.5, 1.0), (1.0, 1.0)]
        assert average_precision(points, Interpolation.ELEVEN) == pytest.approx(100.0)
        assert average_precision(points, Interpolation.FORTY) == pytest.approx(100.0)

    def test_no_detections(self):
        assert average_precision([], Interpolation.ELEVEN) == 0.0

    def test_micro_staircase_eleven_point(self):
        # dets in score order: TP, FP, TP over 3 ground truths
        # PR points: (1/3, 1), (1/3, 1/2), (2/3, 2/3)
        # interp precision: 1 for r <= 1/3, 2/3 for r <= 2/3, else 0
        # AP = (4*1 + 3*(2/3)) / 11 = 6/11
        points = [(1 / 3, 1.0), (1 / 3, 0.5), (2 / 3, 2 / 3)]
        assert average_precision(points, Interpolation.ELEVEN) == pytest.approx(
            600.0 / 11.0, abs=1e-12
        )

    def test_micro_staircase_forty_point(self):
        # recalls k/40: 13 points get precision 1, 13 get 2/3, rest 0
        # AP = (13 + 26/3) / 40 = 65/120
        points = [(1 / 3, 1.0), (1 / 3, 0.5), (2 / 3, 2 / 3)]
        assert average_precision(points, Interpolation.FORTY) == pytest.approx(
            100.0 * 65.0 / 120.0, abs=1e-12
        )


def micro_dataset():
    """Three ground truths, dets scored (0.9 TP), (0.8 FP), (0.7 TP)."""
    gts = [make_gt("000000", 0.0), make_gt("000000", 10.0), make_gt("000000", 20.0)]
    dets = [
        make_det(gts[0], 0.9),
        Detection("000000", "Car", Box3(40.0, 0, 0.8, 1.8, 4.2, 1.6, 0.3), 0.8, EASY_BBOX),
        make_det(gts[1], 0.7),
    ]
    return gts, dets


def jittered_dataset():
    """Copies of each gt shifted along the heading so every pair IoU is 0.72."""
    gts = [make_gt(f, cx) for f in ("000000", "000001") for cx in (0.0, 10.0, 20.0)]
    dets = []
    for i, gt in enumerate(gts):
        delta = gt.box.w * 7.0 / 43.0  # (w - d)/(w + d) = 36/50 = 0.72 exactly
        dets.append(make_det(gt, 0.9 - 0.01 * i, box=shift_along_heading(gt.box, delta)))
    return gts, dets


class TestEvaluate:
    def test_identity_dataset_perfect_ap(self):
        gts, _ = micro_dataset()
        dets = [make_det(gt, 1.0) for gt in gts]
        report = evaluate(gts, dets, EvalConfig(mode=EvalMode.BEV))
        for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
            for thr in report.thresholds:
                assert report.ap[(diff, thr)] == pytest.approx(100.0, abs=1e-12)
            assert report.mean_ap[diff] == pytest.approx(100.0, abs=1e-12)

    def test_empty_detections_zero_ap(self):
        gts, _ = micro_dataset()
        report = evaluate(gts, [], EvalConfig())
        for thr in report.thresholds:
            assert report.ap[(Difficulty.EASY, thr)] == 0.0

    def test_micro_dataset_hand_computed_ap(self):
        gts, dets = micro_dataset()
        for mode in (EvalMode.BEV, EvalMode.FULL3D):
            report = evaluate(gts, dets, EvalConfig(mode=mode))
            for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
                for thr in report.thresholds:
                    assert report.ap[(diff, thr)] == pytest.approx(600.0 / 11.0, abs=1e-12)
                assert report.mean_ap[diff] == pytest.approx(600.0 / 11.0, abs=1e-12)

    def test_micro_dataset_forty_point(self):
        gts, dets = micro_dataset()
        report = evaluate(gts, dets, EvalConfig(interpolation=Interpolation.FORTY))
        assert report.ap[(Difficulty.EASY, 0.70)] == pytest.approx(
            100.0 * 65.0 / 120.0, abs=1e-12
        )

    def test_jittered_dataset_thresholds(self):
        gts, dets = jittered_dataset()
        # verify the construction against the overlap module first
        for gt, det in zip(gts, dets):
            assert rotated_iou(gt.box.bev(), det.box.bev()).iou == pytest.approx(0.72, abs=1e-12)
            assert iou_3d(gt.box, det.box).iou == pytest.approx(0.72, abs=1e-12)
        for mode in (EvalMode.BEV, EvalMode.FULL3D):
            report = evaluate(gts, dets, EvalConfig(mode=mode))
            for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
                assert report.ap[(diff, 0.70)] == pytest.approx(100.0, abs=1e-12)
                assert report.ap[(diff, 0.75)] == 0.0
                assert report.ap[(diff, 0.80)] == 0.0

    def test_map_is_mean_of_sweep(self):
        gts, dets = jittered_dataset()
        report = evaluate(gts, dets, EvalConfig())
        for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
            sweep_aps = [report.ap[(diff, t)] for t in report.sweep]
            assert report.mean_ap[diff] == pytest.approx(
                sum(sweep_aps) / len(sweep_aps), abs=1e-12
            )

    def test_ap_monotone_in_threshold(self):
        gts, dets = jittered_dataset()
        # add a few detections of varying quality
        rng = random.Random(5)
        for i, gt in enumerate(gts):
            dets.append(
                make_det(gt, 0.5 - 0.01 * i, box=shift_along_heading(gt.box, rng.uniform(0, 2)))
            )
        report = evaluate(gts, dets, EvalConfig())
        for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
            aps = [report.ap[(diff, t)] for t in report.sweep]
            assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))

    def test_duplicating_detections_never_increases_ap(self):
        gts, dets = jittered_dataset()
        base = evaluate(gts, dets, EvalConfig())
        doubled = evaluate(gts, dets + dets, EvalConfig())
        for key, ap in base.ap.items():
            assert doubled.ap[key] <= ap + 1e-12

    def test_removing_fp_never_decreases_ap(self):
        gts, dets = micro_dataset()
        base = evaluate(gts, dets, EvalConfig())
        without_fp = evaluate(gts, [dets[0], dets[2]], EvalConfig())
        for key, ap in base.ap.items():
            assert without_fp.ap[key] >= ap - 1e-12

    def test_input_order_invariance(self):
        gts, dets = jittered_dataset()
        report_a = evaluate(gts, dets, EvalConfig())
        shuffled_gts = list(reversed(gts))
        # swap the two frame blocks, keeping the within-frame order
        frame0 = [d for d in dets if d.frame_id == "000000"]
        frame1 = [d for d in dets if d.frame_id == "000001"]
        report_b = evaluate(shuffled_gts, frame1 + frame0, EvalConfig())
        assert report_a.ap == report_b.ap
        assert report_a.mean_ap == report_b.mean_ap

    def test_unknown_class_skipped(self):
        gts, dets = micro_dataset()
        report = evaluate(gts, dets, EvalConfig(class_label="Pedestrian"))
        assert report.skipped_classes == ("Pedestrian",)
        assert report.ap == {}

    def test_unknown_frame_rejected(self):
        gts, dets = micro_dataset()
        stray = Detection("000099", "Car", gts[0].box, 0.5, EASY_BBOX)
        with pytest.raises(ValueError, match="unknown frames"):
            evaluate(gts, dets + [stray], EvalConfig())

    def test_image_plane_mode_uses_2d_boxes(self):
        gt = make_gt("000000", 0.0, bbox=AABox2(0.0, 0.0, 100.0, 50.0))
        det = Detection(
            "000000",
            "Car",
            Box3(500.0, 0, 0.8, 1.8, 4.2, 1.6, 0.3),  # 3D box nowhere near the gt
            0.9,
            AABox2(0.0, 0.0, 100.0, 50.0),  # image bbox identical
        )
        report = evaluate([gt], [det], EvalConfig(mode=EvalMode.IMAGE2D))
        assert report.ap[(Difficulty.EASY, 0.70)] == pytest.approx(100.0)

    def test_report_serialization_keys(self):
        gts, dets = micro_dataset()
        report = evaluate(gts, dets, EvalConfig())
        data = report.to_dict()
        assert set(data) == {
            "class", "mode", "interpolation", "sweep", "results", "map", "skipped_classes",
        }
        assert {"class", "difficulty", "threshold", "ap"} == set(data["results"][0])
        assert {"class", "difficulty", "map"} == set(data["map"][0])
        table = report.format_table()
        assert "AP@0.70" in table and "easy" in table

    def test_mixed_difficulties_change_valid_counts(self):
        easy = make_gt("000000", 0.0)
        hard = make_gt("000000", 10.0, trunc=0.45, occ=2, bbox=AABox2(0, 0, 40, 30))
        dets = [make_det(easy, 0.9), make_det(hard, 0.8)]
        report = evaluate([easy, hard], dets, EvalConfig())
        # at Easy difficulty the hard gt is ignored: its exact detection is
        # discarded, leaving a single-tp perfect curve
        assert report.ap[(Difficulty.EASY, 0.70)] == pytest.approx(100.0)
        assert report.ap[(Difficulty.HARD, 0.70)] == pytest.approx(100.0)

"""Detection evaluation: greedy matching, average precision, threshold sweeps.

Detections are matched per frame to the unmatched valid ground truth of
maximal overlap, in descending score order, with each ground truth consumed
at most once.  A detection whose best overlap above threshold is with an
ignored ground truth (wrong difficulty bucket) is dropped from scoring
instead of counting as a false positive.  AP is reported in percent per
difficulty at each matching threshold, plus the mean AP over a sweep.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .kitti import Detection, GtObject
from .overlap import aa_iou, iou_3d, rotated_iou


class Difficulty(IntEnum):
    EASY = 0
    MODERATE = 1
    HARD = 2
    IGNORED = 3


class EvalMode(str, Enum):
    BEV = "bev"
    FULL3D = "3d"
    IMAGE2D = "2d"


class Interpolation(IntEnum):
    ELEVEN = 11
    FORTY = 40


# (min image-plane bbox height px, max occlusion, max truncation) per bucket.
_DIFFICULTY_RULES = (
    (Difficulty.EASY, 40.0, 0, 0.15),
    (Difficulty.MODERATE, 25.0, 1, 0.30),
    (Difficulty.HARD, 25.0, 2, 0.50),
)

SWEEP_THRESHOLDS = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))
REPORT_THRESHOLDS = (0.70, 0.75, 0.80)


def assign_difficulty(gt: GtObject) -> Difficulty:
    """Easiest bucket whose height/occlusion/truncation limits the object meets."""
    for bucket, min_height, max_occ, max_trunc in _DIFFICULTY_RULES:
        if (
            gt.image_bbox_height >= min_height
            and gt.occlusion <= max_occ
            and gt.truncation <= max_trunc
        ):
            return bucket
    return Difficulty.IGNORED


def pair_iou(det: Detection, gt: GtObject, mode: EvalMode) -> float:
    """Overlap of one detection/ground-truth pair under the given mode."""
    if mode is EvalMode.BEV:
        return rotated_iou(gt.box.bev(), det.box.bev()).iou
    if mode is EvalMode.FULL3D:
        return iou_3d(gt.box, det.box).iou
    return aa_iou(gt.image_bbox, det.image_bbox).iou


@dataclass(frozen=True)
class FrameMatch:
    """Flags per detection in descending-score order, plus the valid-gt count.

    Flags: 'tp', 'fp', or 'ignored' (best overlap above threshold was with an
    ignored ground truth).
    """

    det_flags: tuple[tuple[Detection, str], ...]
    n_valid_gt: int


def match_frame(
    dets: list[Detection],
    gts: list[GtObject],
    threshold: float,
    mode: EvalMode,
    difficulty: Difficulty = Difficulty.HARD,
) -> FrameMatch:
    """Greedy per-frame matching at one threshold and difficulty."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matrix = [[pair_iou(det, gt, mode) for gt in gts] for det in dets]
    valid = [assign_difficulty(gt) <= difficulty for gt in gts]
    flags = _greedy_flags(order, matrix, valid, threshold)
    return FrameMatch(tuple((dets[i], flag) for i, flag in flags), sum(valid))


def _greedy_flags(order, matrix, valid, threshold):
    """Greedy matching core; returns [(det_index, flag)] in processing order."""
    taken = [False] * len(valid)
    out = []
    for i in order:
        best_iou = 0.0
        best_j = -1
        ignored_iou = 0.0
        for j in range(len(valid)):
            iou = matrix[i][j]
            if valid[j] and not taken[j]:
                if iou > best_iou:
                    best_iou = iou
                    best_j = j
            elif not valid[j] and iou > ignored_iou:
                ignored_iou = iou
        if best_j >= 0 and best_iou >= threshold:
            taken[best_j] = True
            out.append((i, "tp"))
        elif ignored_iou >= threshold:
            out.append((i, "ignored"))
        else:
            out.append((i, "fp"))
    return out


def average_precision(pr_points, interpolation: Interpolation = Interpolation.ELEVEN) -> float:
    """Interpolated AP in percent from (recall, precision) staircase samples.

    Eleven-point: recalls {0.0, 0.1, ..., 1.0}; forty-point: {1/40, ..., 40/40}.
    Interpolated precision at recall r is the maximum precision among points
    with recall >= r (0 when none).
    """
    points = sorted((float(r), float(p)) for r, p in pr_points)
    if interpolation is Interpolation.ELEVEN:
        recalls = [k / 10.0 for k in range(11)]
    else:
        recalls = [k / 40.0 for k in range(1, 41)]
    total = 0.0
    for r in recalls:
        total += max((p for pr, p in points if pr >= r - 1e-12), default=0.0)
    return 100.0 * total / len(recalls)


@dataclass(frozen=True)
class EvalConfig:
    class_label: str = "Car"
    mode: EvalMode = EvalMode.BEV
    thresholds: tuple[float, ...] = REPORT_THRESHOLDS
    sweep: tuple[float, ...] = SWEEP_THRESHOLDS
    interpolation: Interpolation = Interpolation.ELEVEN


@dataclass
class EvalReport:
    """AP per (difficulty, threshold), mAP per difficulty, and PR curves.

    AP values are None when the class/difficulty has no ground truth at all
    (undefined rather than zero).
    """

    class_label: str
    mode: EvalMode
    interpolation: Interpolation
    thresholds: tuple[float, ...]
    sweep: tuple[float, ...]
    # (Difficulty, threshold) -> float | None, for report and sweep thresholds
    ap: dict = field(default_factory=dict)
    mean_ap: dict = field(default_factory=dict)  # Difficulty -> float | None
    pr_curves: dict = field(default_factory=dict)  # (Difficulty, threshold) -> [(r, p)]
    skipped_classes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        all_thresholds = sorted(set(self.thresholds) | set(self.sweep))
        results = [
            {
                "class": self.class_label,
                "difficulty": diff.name.lower(),
                "threshold": thr,
                "ap": self.ap.get((diff, thr)),
            }
            for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD)
            for thr in all_thresholds
        ]
        maps = [
            {
                "class": self.class_label,
                "difficulty": diff.name.lower(),
                "map": self.mean_ap.get(diff),
            }
            for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD)
        ]
        return {
            "class": self.class_label,
            "mode": self.mode.value,
            "interpolation": int(self.interpolation),
            "sweep": list(self.sweep),
            "results": results,
            "map": maps,
            "skipped_classes": list(self.skipped_classes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        def cell(value):
            return "   -  " if value is None else f"{value:6.2f}"

        header = ["difficulty"] + [f"AP@{t:.2f}" for t in self.thresholds] + ["mAP"]
        lines = [
            f"class={self.class_label} mode={self.mode.value} interp={int(self.interpolation)}",
            "  ".join(f"{h:>10}" for h in header),
        ]
        for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
            row = [f"{diff.name.lower():>10}"]
            row += [f"{cell(self.ap.get((diff, t))):>10}" for t in self.thresholds]
            row.append(f"{cell(self.mean_ap.get(diff)):>10}")
            lines.append("  ".join(row))
        if self.skipped_classes:
            lines.append("skipped classes: " + ", ".join(self.skipped_classes))
        return "\n".join(lines)


def evaluate(gt_set, det_set, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Full evaluation of one class over frames, thresholds, and difficulties.

    Detections are consumed in descending score order with ties broken by
    frame id then by position within the frame, so reports do not depend on
    the order label files were read.
    """
    gt_frames = {gt.frame_id for gt in gt_set}
    det_frames = {det.frame_id for det in det_set}
    extra = det_frames - gt_frames
    if extra:
        raise ValueError(f"detections reference unknown frames: {sorted(extra)[:5]}")

    report = EvalReport(
        class_label=config.class_label,
        mode=config.mode,
        interpolation=config.interpolation,
        thresholds=tuple(config.thresholds),
        sweep=tuple(config.sweep),
    )

    gts = [gt for gt in gt_set if gt.class_label == config.class_label]
    dets = [det for det in det_set if det.class_label == config.class_label]
    if not gts:
        report.skipped_classes = (config.class_label,)
        return report

    frames = sorted(gt_frames)
    gt_by_frame = {f: [gt for gt in gts if gt.frame_id == f] for f in frames}
    det_by_frame = {f: [det for det in dets if det.frame_id == f] for f in frames}
    matrices = {
        f: [[pair_iou(det, gt, config.mode) for gt in gt_by_frame[f]] for det in det_by_frame[f]]
        for f in frames
    }
    difficulties = {f: [assign_difficulty(gt) for gt in gt_by_frame[f]] for f in frames}

    all_thresholds = sorted(set(config.thresholds) | set(config.sweep))
    for diff in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
        n_valid = sum(d <= diff for frame in frames for d in difficulties[frame])
        per_threshold = {}
        for thr in all_thresholds:
            if n_valid == 0:
                per_threshold[thr] = None
                continue
            records = []
            for f in frames:
                frame_dets = det_by_frame[f]
                order = sorted(range(len(frame_dets)), key=lambda i: (-frame_dets[i].score, i))
                valid = [d <= diff for d in difficulties[f]]
                for i, flag in _greedy_flags(order, matrices[f], valid, thr):
                    records.append((-frame_dets[i].score, f, i, flag))
            records.sort()
            tp = 0
            fp = 0
            points = []
            for _, _, _, flag in records:
                if flag == "ignored":
                    continue
                if flag == "tp":
                    tp += 1
                else:
                    fp += 1
                points.append((tp / n_valid, tp / (tp + fp)))
            per_threshold[thr] = average_precision(points, config.interpolation)
            if thr in config.thresholds:
                report.pr_curves[(diff, thr)] = points
        report.ap.update({(diff, thr): ap for thr, ap in per_threshold.items()})
        sweep_aps = [per_threshold[t] for t in config.sweep]
        if any(ap is None for ap in sweep_aps):
            report.mean_ap[diff] = None
        else:
            report.mean_ap[diff] = sum(sweep_aps) / len(sweep_aps)
    return report

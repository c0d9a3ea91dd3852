"""Differentiable rotated-box overlap: exact IoU/GIoU with analytic gradients,
a detection AP evaluator, and testing oracles."""

from .geom import (
    EPS_DEDUP,
    EPS_GEOM,
    AABox2,
    Box3,
    ConvexPoly,
    RBox2,
    Vec2,
    corners,
    normalize_angle,
    shoelace_area,
)
from .overlap import (
    OverlapResult,
    aa_iou,
    enclosing_aabb,
    giou,
    giou_3d,
    intersection_polygon,
    iou_3d,
    point_in_rbox,
    rotated_iou,
    segment_intersection,
)
from .grad import (
    BoxGrad2,
    BoxGrad3,
    DiffScalar,
    GradCheckResult,
    NonSmoothPointError,
    Tape,
    box_pair_function,
    diff_giou,
    diff_giou_3d,
    diff_iou_3d,
    diff_rotated_iou,
    finite_diff_check,
)
from .loss import BatchLossResult, Dimensionality, LossKind, LossSpec, Reduction, iou_loss
from .oracle import McEstimate, PairSpec, clip_iou, mc_iou, random_pair, random_pair_3d
from .kitti import (
    Detection,
    GtObject,
    LabelParseError,
    box3_from_camera,
    camera_from_box3,
    load_det_dir,
    load_gt_dir,
)
from .evaluation import (
    Difficulty,
    EvalConfig,
    EvalMode,
    EvalReport,
    Interpolation,
    assign_difficulty,
    average_precision,
    evaluate,
    match_frame,
)

__version__ = "0.1.0"

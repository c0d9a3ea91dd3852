"""KITTI-style label text IO.

One text file per frame, file stem = frame id.  Each line holds one object,
space separated::

    type truncated occluded alpha left top right bottom h w l x y z rotation_y [score]

Detection files carry the trailing score; ground-truth files do not.
Dimensions are metres, the location (x, y, z) is the bottom-face center in
the camera frame (x right, y down, z forward), and rotation_y is the yaw
about the camera's vertical axis.

Camera-to-BEV convention used throughout: the footprint center is (x, z),
the box bottom sits at y so the vertical center is y - h/2, and yaw equals
rotation_y.  At rotation_y = 0 the object's length l lies along the local x
axis and its width w along the local y axis of the footprint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .geom import AABox2, Box3


class LabelParseError(ValueError):
    """A label line that cannot be parsed; carries file and line number."""


@dataclass(frozen=True)
class GtObject:
    """One labeled object: box, truncation/occlusion state, image-plane bbox."""

    frame_id: str
    class_label: str
    box: Box3
    truncation: float
    occlusion: int
    image_bbox: AABox2

    def __post_init__(self):
        if not 0.0 <= self.truncation <= 1.0:
            raise ValueError(f"truncation out of range: {self.truncation}")
        if self.occlusion not in (0, 1, 2, 3):
            raise ValueError(f"occlusion out of range: {self.occlusion}")

    @property
    def image_bbox_height(self) -> float:
        return self.image_bbox.height


@dataclass(frozen=True)
class Detection:
    """One scored detection."""

    frame_id: str
    class_label: str
    box: Box3
    score: float
    image_bbox: AABox2


def box3_from_camera(h: float, w: float, l: float, x: float, y: float, z: float, ry: float) -> Box3:
    """Camera-frame label fields to an evaluator box (see module docstring)."""
    return Box3(cx=x, cy=z, cz=y - h * 0.5, w=l, l=w, h=h, yaw=ry)


def camera_from_box3(box: Box3) -> tuple[float, float, float, float, float, float, float]:
    """Inverse of box3_from_camera: (h, w, l, x, y, z, rotation_y)."""
    return (box.h, box.l, box.w, box.cx, box.cz + box.h * 0.5, box.cy, box.yaw)


def parse_label_line(
    line: str,
    frame_id: str,
    with_score: bool,
    source: str = "<string>",
    lineno: int = 0,
):
    """Parse one label line into a GtObject or (with_score) a Detection.

    Out-of-range truncation is clamped to [0, 1] and out-of-range occlusion
    maps to 3, so partially filled labels land in the most restrictive
    difficulty bucket instead of failing.  Ground-truth rows whose dimensions
    are placeholders (non-positive, e.g. DontCare regions) return None.
    """
    tokens = line.split()
    expected = 16 if with_score else 15
    try:
        if len(tokens) != expected:
            raise ValueError(f"expected {expected} fields, got {len(tokens)}")
        class_label = tokens[0]
        truncated = float(tokens[1])
        occluded = int(float(tokens[2]))
        left, top, right, bottom = (float(t) for t in tokens[4:8])
        h, w, l = (float(t) for t in tokens[8:11])
        x, y, z = (float(t) for t in tokens[11:14])
        ry = float(tokens[14])
        if not with_score and min(h, w, l) <= 0.0:
            return None
        box = box3_from_camera(h, w, l, x, y, z, ry)
        image_bbox = AABox2(left, top, right, bottom)
        if with_score:
            return Detection(frame_id, class_label, box, float(tokens[15]), image_bbox)
        return GtObject(
            frame_id,
            class_label,
            box,
            min(1.0, max(0.0, truncated)),
            occluded if occluded in (0, 1, 2, 3) else 3,
            image_bbox,
        )
    except ValueError as exc:
        raise LabelParseError(f"{source}:{lineno}: {exc}") from None


def format_label_line(obj: GtObject | Detection, alpha: float = -10.0) -> str:
    """Render an object back into its label-line form."""
    h, w, l, x, y, z, ry = camera_from_box3(obj.box)
    bb = obj.image_bbox
    if isinstance(obj, Detection):
        head = f"{obj.class_label} -1 -1"
        tail = f" {obj.score:.6f}"
    else:
        head = f"{obj.class_label} {obj.truncation:.2f} {obj.occlusion:d}"
        tail = ""
    return (
        f"{head} {alpha:.2f} "
        f"{bb.x_min:.2f} {bb.y_min:.2f} {bb.x_max:.2f} {bb.y_max:.2f} "
        f"{h:.6f} {w:.6f} {l:.6f} {x:.6f} {y:.6f} {z:.6f} {ry:.6f}{tail}"
    )


def _load_dir(path: str | Path, with_score: bool) -> list:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"label directory not found: {root}")
    objects = []
    for label_file in sorted(root.glob("*.txt")):
        frame_id = label_file.stem
        for lineno, line in enumerate(label_file.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            obj = parse_label_line(
                line, frame_id, with_score, source=str(label_file), lineno=lineno
            )
            if obj is not None:
                objects.append(obj)
    return objects


def load_gt_dir(path: str | Path) -> list[GtObject]:
    """Read every ground-truth label file (*.txt) under ``path``."""
    return _load_dir(path, with_score=False)


def load_det_dir(path: str | Path) -> list[Detection]:
    """Read every detection file (*.txt) under ``path``."""
    return _load_dir(path, with_score=True)


def write_frames(path: str | Path, objects) -> None:
    """Write objects grouped by frame id, one file per frame."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    by_frame: dict[str, list] = {}
    for obj in objects:
        by_frame.setdefault(obj.frame_id, []).append(obj)
    for frame_id, frame_objs in by_frame.items():
        lines = [format_label_line(o) for o in frame_objs]
        (root / f"{frame_id}.txt").write_text("\n".join(lines) + "\n")

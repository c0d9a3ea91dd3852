"""Command-line surface: pairwise IoU queries, gradient checks, dataset
evaluation, and the gradient-descent fit demo.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines (long
option names; '#' starts a comment); explicit flags win over the file.  The
ROTBOX_LOG environment variable sets the logging level.  Exit codes: 0 on
success, 1 on tolerance or validation failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .evaluation import EvalConfig, EvalMode, Interpolation, evaluate
from .fitdemo import run_fit_demo, trace_to_csv
from .geom import AABox2, Box3, RBox2
from .grad import NonSmoothPointError, box_pair_function, finite_diff_check
from .kitti import LabelParseError, load_det_dir, load_gt_dir
from .oracle import random_pair, random_pair_3d
from .overlap import aa_iou, giou, giou_3d, iou_3d, rotated_iou

log = logging.getLogger("rotbox")


def _to_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# attr, converter, default, required
_SCHEMAS = {
    "iou": (
        ("mode", str, "rot", False),
        ("g", str, None, True),
        ("d", str, None, True),
        ("json", _to_bool, False, False),
    ),
    "grad-check": (
        ("pairs", int, 200, False),
        ("seed", int, 0, False),
        ("mode", str, "rot", False),
        ("loss", str, "iou", False),
        ("step", float, 1e-6, False),
        ("tol", float, 1e-4, False),
    ),
    "eval": (
        ("gt", str, None, True),
        ("det", str, None, True),
        ("class_label", str, "Car", False),
        ("mode", str, "bev", False),
        ("interp", int, 11, False),
        ("out", str, None, False),
    ),
    "fit-demo": (
        ("loss", str, "iou", False),
        ("init", str, "overlap", False),
        ("steps", int, 500, False),
        ("lr", float, 0.01, False),
        ("seed", int, 0, False),
        ("out", str, None, False),
    ),
}

_CHOICES = {
    ("iou", "mode"): ("aa", "rot", "3d"),
    ("grad-check", "mode"): ("rot", "3d"),
    ("grad-check", "loss"): ("iou", "giou"),
    ("eval", "mode"): ("bev", "3d", "2d"),
    ("eval", "interp"): (11, 40),
    ("fit-demo", "loss"): ("l1", "iou", "giou"),
    ("fit-demo", "init"): ("overlap", "disjoint"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotbox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_iou = sub.add_parser("iou", help="IoU/GIoU of one box pair")
    p_iou.add_argument("--mode", default=None, help="aa | rot | 3d (default rot)")
    p_iou.add_argument("--g", default=None, help="first box: aa=xmin,ymin,xmax,ymax; rot=cx,cy,w,l,yaw; 3d=cx,cy,cz,w,l,h,yaw")
    p_iou.add_argument("--d", default=None, help="second box, same format as --g")
    p_iou.add_argument("--json", action="store_true", default=None, help="structured output")

    p_gc = sub.add_parser("grad-check", help="finite-difference check over random pairs")
    p_gc.add_argument("--pairs", type=int, default=None)
    p_gc.add_argument("--seed", type=int, default=None)
    p_gc.add_argument("--mode", default=None, help="rot | 3d (default rot)")
    p_gc.add_argument("--loss", default=None, help="iou | giou (default iou)")
    p_gc.add_argument("--step", type=float, default=None)
    p_gc.add_argument("--tol", type=float, default=None)

    p_eval = sub.add_parser("eval", help="evaluate detections against ground truth")
    p_eval.add_argument("--gt", default=None, help="ground-truth label directory")
    p_eval.add_argument("--det", default=None, help="detection label directory")
    p_eval.add_argument("--class", dest="class_label", default=None)
    p_eval.add_argument("--mode", default=None, help="bev | 3d | 2d (default bev)")
    p_eval.add_argument("--interp", type=int, default=None, help="11 | 40 (default 11)")
    p_eval.add_argument("--out", default=None, help="write the JSON report here")

    p_fit = sub.add_parser("fit-demo", help="gradient-descent fit of a box to a fixed target")
    p_fit.add_argument("--loss", default=None, help="l1 | iou | giou (default iou)")
    p_fit.add_argument("--init", default=None, help="overlap | disjoint (default overlap)")
    p_fit.add_argument("--steps", type=int, default=None)
    p_fit.add_argument("--lr", type=float, default=None)
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--out", default=None, help="write the CSV trace here (default stdout)")

    for sp in (p_iou, p_gc, p_eval, p_fit):
        sp.add_argument("--config", default=None, help="key = value defaults file")
    return parser


def _load_config_file(path: str, parser: argparse.ArgumentParser) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    data: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            parser.error(f"{path}:{lineno}: expected 'key = value'")
        data[key.strip().replace("-", "_")] = value.strip()
    return data


def _resolve_options(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    schema = _SCHEMAS[args.command]
    config = _load_config_file(args.config, parser) if args.config else {}
    known = {attr for attr, *_ in schema}
    unknown = set(config) - known
    if unknown:
        parser.error(f"unknown config key: {sorted(unknown)[0]}")
    for attr, convert, default, required in schema:
        if getattr(args, attr) is None:
            if attr in config:
                try:
                    setattr(args, attr, convert(config[attr]))
                except ValueError as exc:
                    parser.error(f"config key {attr}: {exc}")
            elif required:
                parser.error(f"missing required option --{attr.replace('_', '-')}")
            else:
                setattr(args, attr, default)
        choices = _CHOICES.get((args.command, attr))
        if choices and getattr(args, attr) not in choices:
            parser.error(f"--{attr.replace('_', '-')} must be one of {choices}")


def _parse_box_fields(text: str, n: int, parser, flag: str) -> list[float]:
    tokens = text.split(",")
    if len(tokens) != n:
        parser.error(f"{flag} expects {n} comma-separated numbers, got {len(tokens)}")
    values = []
    for token in tokens:
        try:
            values.append(float(token))
        except ValueError:
            parser.error(f"{flag}: invalid number {token.strip()!r}")
    return values


def _cmd_iou(args, parser) -> int:
    try:
        if args.mode == "aa":
            g = AABox2(*_parse_box_fields(args.g, 4, parser, "--g"))
            d = AABox2(*_parse_box_fields(args.d, 4, parser, "--d"))
            res = aa_iou(g, d)
            g_rot = RBox2((g.x_min + g.x_max) / 2, (g.y_min + g.y_max) / 2, g.width, g.height, 0.0)
            d_rot = RBox2((d.x_min + d.x_max) / 2, (d.y_min + d.y_max) / 2, d.width, d.height, 0.0)
            giou_value = giou(g_rot, d_rot)
        elif args.mode == "rot":
            g = RBox2(*_parse_box_fields(args.g, 5, parser, "--g"))
            d = RBox2(*_parse_box_fields(args.d, 5, parser, "--d"))
            res = rotated_iou(g, d)
            giou_value = giou(g, d)
        else:
            g = Box3(*_parse_box_fields(args.g, 7, parser, "--g"))
            d = Box3(*_parse_box_fields(args.d, 7, parser, "--d"))
            res = iou_3d(g, d)
            giou_value = giou_3d(g, d)
    except ValueError as exc:
        parser.error(str(exc))

    if args.json:
        print(
            json.dumps(
                {
                    "mode": args.mode,
                    "iou": res.iou,
                    "giou": giou_value,
                    "intersection": res.intersection_area,
                    "union": res.union_area,
                },
                sort_keys=True,
            )
        )
    else:
        measure = "volume" if args.mode == "3d" else "area"
        print(f"iou          {res.iou!r}")
        print(f"giou         {giou_value!r}")
        print(f"intersection {res.intersection_area!r}  ({measure})")
        print(f"union        {res.union_area!r}  ({measure})")
    return 0


def _cmd_grad_check(args, parser) -> int:
    if args.pairs < 1:
        parser.error("--pairs must be >= 1")
    if args.step <= 0:
        parser.error("--step must be positive")
    boxdim = "2d" if args.mode == "rot" else "3d"
    fn = box_pair_function(args.loss, boxdim)

    max_errs = []
    resampled = 0
    counter = 0
    while len(max_errs) < args.pairs:
        pair_seed = args.seed + counter
        counter += 1
        if boxdim == "2d":
            g, d = random_pair(seed=pair_seed)
        else:
            g, d = random_pair_3d(seed=pair_seed)
        point = g.params() + d.params()
        try:
            result = finite_diff_check(fn, point, args.step)
        except NonSmoothPointError:
            resampled += 1
            continue
        max_errs.append(result.max_error)

    worst = max(max_errs)
    mean = sum(max_errs) / len(max_errs)
    print(f"pairs={args.pairs} mode={args.mode} loss={args.loss} seed={args.seed}")
    print(f"max_rel_err={worst!r} mean_rel_err={mean!r} resampled_non_smooth={resampled}")
    if worst > args.tol:
        print(f"FAIL: max relative error exceeds tolerance {args.tol!r}")
        return 1
    return 0


def _cmd_eval(args, parser) -> int:
    try:
        gts = load_gt_dir(args.gt)
        dets = load_det_dir(args.det)
        config = EvalConfig(
            class_label=args.class_label,
            mode=EvalMode(args.mode),
            interpolation=Interpolation(args.interp),
        )
        report = evaluate(gts, dets, config)
    except (FileNotFoundError, LabelParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.format_table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
        log.info("wrote report to %s", args.out)
    return 0


def _cmd_fit_demo(args, parser) -> int:
    if args.steps < 1:
        parser.error("--steps must be >= 1")
    if args.lr <= 0:
        parser.error("--lr must be positive")
    trace = run_fit_demo(
        loss=args.loss, init=args.init, steps=args.steps, lr=args.lr, seed=args.seed
    )
    csv_text = trace_to_csv(trace)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


_COMMANDS = {
    "iou": _cmd_iou,
    "grad-check": _cmd_grad_check,
    "eval": _cmd_eval,
    "fit-demo": _cmd_fit_demo,
}


def main(argv=None) -> int:
    level = os.environ.get("ROTBOX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = _build_parser()
    args = parser.parse_args(argv)
    _resolve_options(args, parser)
    return _COMMANDS[args.command](args, parser)


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

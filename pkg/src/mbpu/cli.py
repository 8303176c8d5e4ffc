"""Command-line entry point.

Every subcommand prints its resolved configuration to stderr before doing
any work, so stdout carries only results.  Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .checks import SUITES, run_suite
from .config import ConfigError, RunConfig, format_config, load_config
from .geometry import PointCloudError, load_cloud, normalize_unit_sphere, save_cloud
from .metrics import metrics
from .network import config_from_params
from .renderer import RenderConfig, make_camera_rig, render_views, write_pfm
from .training import DivergenceError, train
from .upsampler import upsample


def _err(msg):
    print(msg, file=sys.stderr)


def _show(pairs):
    for k, v in pairs:
        _err(f"{k} = {v}")


def _run_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return load_config(path)


# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _run_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    curve = args.curve or os.path.splitext(args.out)[0] + ".loss.csv"
    _err(format_config(cfg).rstrip())
    _show([("out", args.out), ("curve", curve)])

    def progress(epoch, loss, parts):
        _err(f"epoch {epoch} loss {loss:.6g}")

    try:
        result = train(cfg.train, cfg.loss, cfg.network, cfg.render, cfg.refine.k_midpoint, progress=progress, refine_cfg=cfg.refine)
    except DivergenceError as e:
        _err(f"training diverged: {e}")
        return 1
    save_checkpoint(args.out, result.params)
    with open(curve, "w", encoding="ascii", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(result.losses):
            fh.write(f"{i},{v:.17g}\n")
    print(f"wrote {args.out} ({result.params.count()} parameters) and {curve}")
    return 0


def cmd_upsample(args) -> int:
    cfg = _run_config(args.config)
    refine_cfg = cfg.refine
    if args.no_shift:
        refine_cfg = replace(refine_cfg, apply_shift=False)
    if args.step is not None:
        refine_cfg = replace(refine_cfg, step=args.step)
    if args.iters is not None:
        refine_cfg = replace(refine_cfg, iterations=args.iters)
    params = load_checkpoint(args.ckpt)
    net_cfg = config_from_params(params, cfg.network)
    _show([("input", args.input), ("rate", args.rate), ("ckpt", args.ckpt), ("out", args.out)])
    _show([(f"refine.{k}", v) for k, v in vars(refine_cfg).items()])
    _show([("net.shift_scale", net_cfg.shift_scale), ("extractor.k_conv", net_cfg.extractor.k_conv)])
    if not 2 <= args.rate <= 8:
        _err(f"warning: rate {args.rate} is outside the evaluated range [2, 8]")
    cloud = load_cloud(args.input)
    out = upsample(cloud, args.rate, params, refine_cfg, net_cfg)
    save_cloud(args.out, out)
    print(f"wrote {out.count} points to {args.out}")
    return 0


def cmd_eval(args) -> int:
    _show([("pred", args.pred), ("gt", args.gt), ("dense_gt", args.dense_gt), ("threshold", args.threshold), ("json_lines", args.json_lines)])
    pred = load_cloud(args.pred)
    gt = load_cloud(args.gt)
    dense = None
    if args.dense_gt is None:
        _err("no dense ground truth given; p2f is n/a")
    elif not os.path.exists(args.dense_gt):
        _err(f"dense ground truth {args.dense_gt} not found; p2f is n/a")
    else:
        dense = load_cloud(args.dense_gt)
        if dense.count < gt.count:
            _err(f"dense ground truth has {dense.count} points, fewer than the {gt.count} of gt; p2f is n/a")
            dense = None
    m = metrics(pred, gt, args.threshold, dense=dense)
    if args.json_lines:
        print(json.dumps(m.as_dict()))
    else:
        for k, v in m.as_dict().items():
            print(f"{k} {'n/a' if v is None else format(v, '.10g')}")
    return 0


def cmd_render(args) -> int:
    width, height = args.size
    try:
        cfg = RenderConfig(width=width, height=height, depth_bins=args.depth_bins, sigma=args.sigma)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _show([("input", args.input), ("out_dir", args.out_dir), ("views", args.views)])
    _show([(f"render.{k}", v) for k, v in vars(cfg).items()])
    cloud = load_cloud(args.input, allow_empty=True)
    pts = normalize_unit_sphere(cloud)[0].points if cloud.count else cloud.points
    images = render_views(pts, make_camera_rig(args.views), cfg).data
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        for i, img in enumerate(images):
            write_pfm(os.path.join(args.out_dir, f"view_{i:03d}.pfm"), img)
    except OSError as e:
        _err(f"cannot write to {args.out_dir}: {e}")
        return 1
    print(f"wrote {len(images)} depth images to {args.out_dir}")
    return 0


def cmd_check(args) -> int:
    _show([("suite", args.suite)])
    results = run_suite(args.suite, report=print)
    return 0 if all(r.ok for r in results) else 1


# ---------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mbpu", description="Point-cloud upsampling by learned distance-field refinement.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on synthetic shapes")
    t.add_argument("--config", help="key = value config file (defaults when omitted)")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--seed", type=int)
    t.add_argument("--curve", help="loss-curve CSV path (default: <out>.loss.csv)")
    t.set_defaults(func=cmd_train)

    u = sub.add_parser("upsample", help="upsample a point cloud with a trained checkpoint")
    u.add_argument("--input", required=True)
    u.add_argument("--rate", type=float, required=True)
    u.add_argument("--ckpt", required=True)
    u.add_argument("--out", required=True)
    u.add_argument("--no-shift", action="store_true", help="skip the one-off position shift")
    u.add_argument("--lambda", dest="step", type=float, help="refinement step size")
    u.add_argument("--iters", type=int, help="refinement iterations")
    u.add_argument("--config", help="config file for refinement and network settings")
    u.set_defaults(func=cmd_upsample)

    e = sub.add_parser("eval", help="compare a prediction with ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--dense-gt")
    e.add_argument("--threshold", type=float, default=0.005, help="F-score radius as a fraction of the gt bounding-box diagonal")
    e.add_argument("--json-lines", action="store_true")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="write depth images of a cloud as PFM files")
    r.add_argument("--input", required=True)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--views", type=_positive_int, default=32)
    r.add_argument("--size", type=_positive_int, nargs=2, metavar=("W", "H"), default=(32, 32))
    r.add_argument("--depth-bins", type=int, default=64)
    r.add_argument("--sigma", type=float, default=1.0)
    r.set_defaults(func=cmd_render)

    c = sub.add_parser("check", help="run a self-check suite")
    c.add_argument("--suite", choices=SUITES, required=True)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        _err(f"config error: {e}")
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        _err(f"cannot open {e.filename}: {e.strerror}")
        return 1
    except (PointCloudError, CheckpointError, FloatingPointError, ValueError) as e:
        _err(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

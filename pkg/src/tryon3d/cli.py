"""Command-line entry points for the try-on toolkit.

Subcommands mirror the pipeline stages (prealign, warp, fuse, reconstruct),
plus whole-run orchestration (pipeline), dataset auditing (validate-dataset),
metric reporting (metrics), and synthetic fixture generation (synth-sample).

Exit codes: 0 success, 2 input or validation error, 3 numerical failure
(e.g. a singular warp-fitting system).
"""

import argparse
import os
import sys

import numpy as np

from .depthtools import depth_metrics
from .fusion import coarse_tryon, derive_fusion_mask, fuse
from .imgcore import (
    LABEL_BACKGROUND,
    MaskImage,
    load_depth,
    load_image,
    load_labels,
    load_mask,
    save_gray,
    save_image,
    save_mask,
)
from .metrics import iou, ssim
from .pipeline import (
    PipelineConfig,
    PipelineError,
    SampleRecord,
    cloth_mask_from_image,
    run_pipeline,
    validate_dataset,
)
from .prealign import ARM_TORSO_LABELS, apply_affine, compute_prealign
from .recon import export_ply, make_back_texture, stitch_mesh, synth_depth
from .synth import DEFAULT_HEIGHT, DEFAULT_WIDTH, write_sample
from .tpswarp import (
    NumericalError,
    contour_correspondences,
    fit_tps,
    load_correspondences,
    save_correspondences,
    tps_warp_image,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _load_config(args):
    cfg = PipelineConfig() if args.config is None else PipelineConfig.from_file(args.config)
    return cfg.replaced(
        tps_points=getattr(args, "tps_points", None),
        inpaint_radius=getattr(args, "inpaint_radius", None),
        threads=getattr(args, "threads", None),
        out_dir=getattr(args, "out", None),
    )


def _two_stage_warp(cloth_path, parse_path, cfg, corr_path=None):
    cloth = load_image(cloth_path)
    labels = load_labels(parse_path)
    h, w = labels.data.shape
    cmask = cloth_mask_from_image(cloth)
    params = compute_prealign(cmask, labels.mask_for(ARM_TORSO_LABELS))
    aligned = apply_affine(cloth, params, w, h)
    aligned_mask = apply_affine(cmask, params, w, h)
    if corr_path is not None:
        corr = load_correspondences(corr_path)
    else:
        corr = contour_correspondences(aligned_mask, labels.mask_for([3]), cfg.tps_points)
    inverse = fit_tps(corr.swapped(), cfg.tps_regularization)
    warped = tps_warp_image(aligned, inverse, w, h, threads=cfg.threads)
    warped_mask = tps_warp_image(aligned_mask, inverse, w, h, threads=cfg.threads)
    return params, aligned, aligned_mask, corr, warped, warped_mask


def _cmd_synth_sample(args):
    paths = write_sample(args.out, name=args.name, width=args.width, height=args.height)
    for key in sorted(paths):
        print(f"{key}={paths[key]}")
    return EXIT_OK


def _cmd_validate_dataset(args):
    report = validate_dataset(args.root)
    print(report.render())
    return EXIT_OK


def _cmd_prealign(args):
    os.makedirs(args.out, exist_ok=True)
    cloth = load_image(args.cloth)
    labels = load_labels(args.parse)
    h, w = labels.data.shape
    cmask = cloth_mask_from_image(cloth)
    params = compute_prealign(cmask, labels.mask_for(ARM_TORSO_LABELS))
    save_image(apply_affine(cloth, params, w, h),
               os.path.join(args.out, "cloth_aligned.png"))
    save_mask(apply_affine(cmask, params, w, h),
              os.path.join(args.out, "cloth_aligned_mask.png"))
    print(f"scale={params.scale!r}")
    print(f"translate_x={params.translate_x!r}")
    print(f"translate_y={params.translate_y!r}")
    return EXIT_OK


def _cmd_warp(args):
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    params, aligned, _, corr, warped, warped_mask = _two_stage_warp(
        args.cloth, args.parse, cfg, corr_path=args.correspondences
    )
    save_image(aligned, os.path.join(args.out, "cloth_aligned.png"))
    save_image(warped, os.path.join(args.out, "cloth_warped.png"))
    save_mask(warped_mask, os.path.join(args.out, "cloth_warped_mask.png"))
    if args.save_correspondences:
        save_correspondences(corr, args.save_correspondences)
    print(f"scale={params.scale!r}")
    print(f"control_points={len(corr)}")
    return EXIT_OK


def _cmd_fuse(args):
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    warped = load_image(args.warped_cloth)
    person = load_image(args.person)
    labels = load_labels(args.parse)
    cw_mask = cloth_mask_from_image(warped)
    fusion_mask = derive_fusion_mask(labels, cw_mask)
    coarse = coarse_tryon(person, labels, cfg.inpaint_radius)
    tryon = fuse(warped, coarse, fusion_mask)
    save_gray(fusion_mask, os.path.join(args.out, "fusion_mask.png"))
    save_image(coarse, os.path.join(args.out, "coarse_tryon.png"))
    save_image(tryon, os.path.join(args.out, "tryon.png"))
    return EXIT_OK


def _cmd_reconstruct(args):
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    tryon = load_image(args.tryon)
    labels = load_labels(args.parse)
    person_mask = MaskImage(labels.data != LABEL_BACKGROUND)
    if args.synth_depth:
        front, back = synth_depth(person_mask, cfg.synth_base, cfg.synth_amplitude)
    elif args.depth_front and args.depth_back:
        front = load_depth(args.depth_front)
        back = load_depth(args.depth_back)
    else:
        raise ValueError("reconstruct needs --depth-front/--depth-back or --synth-depth")
    back_tex = make_back_texture(tryon, labels, cfg.inpaint_radius)
    mesh = stitch_mesh(front, back, person_mask, tryon, back_tex)
    save_image(back_tex, os.path.join(args.out, "back_texture.png"))
    export_ply(mesh, os.path.join(args.out, "mesh.ply"))
    print(f"vertices={mesh.num_vertices}")
    print(f"triangles={mesh.num_triangles}")
    return EXIT_OK


def _cmd_metrics(args):
    lines = []
    if (args.pred_image is None) != (args.gt_image is None):
        raise ValueError("--pred-image and --gt-image must be given together")
    if (args.pred_mask is None) != (args.gt_mask is None):
        raise ValueError("--pred-mask and --gt-mask must be given together")
    if (args.pred_depth is None) != (args.gt_depth is None):
        raise ValueError("--pred-depth and --gt-depth must be given together")
    if args.pred_image:
        lines.append(("ssim", ssim(load_image(args.pred_image), load_image(args.gt_image))))
    if args.pred_mask:
        lines.append(("iou", iou(load_mask(args.pred_mask), load_mask(args.gt_mask))))
    if args.pred_depth:
        pred = load_depth(args.pred_depth)
        gt = load_depth(args.gt_depth)
        if args.depth_mask:
            mask = load_mask(args.depth_mask)
        else:
            mask = MaskImage(np.ones(pred.data.shape, dtype=bool))
        dm = depth_metrics(pred, gt, mask, relative=args.relative)
        lines.extend([("abs", dm.abs_err), ("sq", dm.sq_err), ("rmse", dm.rmse)])
        lines.extend([(f"{k}_x1000", v * 1000.0)
                      for k, v in (("abs", dm.abs_err), ("sq", dm.sq_err), ("rmse", dm.rmse))])
    if not lines:
        raise ValueError("metrics: no input pairs given")
    for key, value in lines:
        print(f"{key}={value!r}")
    return EXIT_OK


def _cmd_pipeline(args):
    cfg = _load_config(args)
    if args.root is not None:
        if args.name is None:
            raise ValueError("--name is required with --root")
        sample = SampleRecord.from_dataset(args.root, args.name)
    else:
        required = {"cloth": args.cloth, "image": args.image,
                    "parse": args.parse, "pose": args.pose}
        missing = [k for k, v in required.items() if v is None]
        if missing:
            raise ValueError(
                f"pipeline needs --root/--name or explicit --{'/--'.join(missing)}"
            )
        sample = SampleRecord(
            name=args.name or "sample",
            cloth_path=args.cloth,
            image_path=args.image,
            parse_path=args.parse,
            pose_path=args.pose,
            depth_front_path=args.depth_front,
            depth_back_path=args.depth_back,
            gt_tryon_path=args.gt_tryon,
            gt_mask_path=args.gt_mask,
        )
    artifacts = run_pipeline(sample, cfg, out_dir=cfg.out_dir,
                             use_synth_depth=args.synth_depth)
    for key in sorted(artifacts):
        print(f"{key}={artifacts[key]}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tryon3d",
        description="Deterministic 2-D-to-3-D virtual try-on toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")

    p = sub.add_parser("synth-sample", help="write the bundled synthetic sample")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="sample0")
    p.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    p.set_defaults(fn=_cmd_synth_sample)

    p = sub.add_parser("validate-dataset", help="audit a dataset tree")
    p.add_argument("root")
    p.set_defaults(fn=_cmd_validate_dataset)

    p = sub.add_parser("prealign", help="center-align and rescale the in-shop cloth")
    add_common(p)
    p.add_argument("--cloth", required=True)
    p.add_argument("--parse", required=True)
    p.set_defaults(fn=_cmd_prealign)

    p = sub.add_parser("warp", help="two-stage warp: prealign + TPS")
    add_common(p)
    p.add_argument("--cloth", required=True)
    p.add_argument("--parse", required=True)
    p.add_argument("--tps-points", type=int, default=None)
    p.add_argument("--correspondences", default=None,
                   help="read 'sx sy tx ty' pairs instead of contour matching")
    p.add_argument("--save-correspondences", default=None)
    p.set_defaults(fn=_cmd_warp)

    p = sub.add_parser("fuse", help="composite warped cloth with a coarse try-on")
    add_common(p)
    p.add_argument("--warped-cloth", required=True)
    p.add_argument("--person", required=True)
    p.add_argument("--parse", required=True)
    p.add_argument("--inpaint-radius", type=int, default=None)
    p.set_defaults(fn=_cmd_fuse)

    p = sub.add_parser("reconstruct", help="stitch the double-depth mesh")
    add_common(p)
    p.add_argument("--tryon", required=True)
    p.add_argument("--parse", required=True)
    p.add_argument("--depth-front", default=None)
    p.add_argument("--depth-back", default=None)
    p.add_argument("--synth-depth", action="store_true")
    p.add_argument("--inpaint-radius", type=int, default=None)
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("metrics", help="report ssim/iou/depth errors")
    p.add_argument("--pred-image", default=None)
    p.add_argument("--gt-image", default=None)
    p.add_argument("--pred-mask", default=None)
    p.add_argument("--gt-mask", default=None)
    p.add_argument("--pred-depth", default=None)
    p.add_argument("--gt-depth", default=None)
    p.add_argument("--depth-mask", default=None)
    p.add_argument("--relative", action="store_true",
                   help="divide abs/sq errors by the reference depth")
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    add_common(p)
    p.add_argument("--root", default=None, help="dataset root (with --name)")
    p.add_argument("--name", default=None)
    p.add_argument("--cloth", default=None)
    p.add_argument("--image", default=None)
    p.add_argument("--parse", default=None)
    p.add_argument("--pose", default=None)
    p.add_argument("--depth-front", default=None)
    p.add_argument("--depth-back", default=None)
    p.add_argument("--gt-tryon", default=None)
    p.add_argument("--gt-mask", default=None)
    p.add_argument("--synth-depth", action="store_true")
    p.add_argument("--tps-points", type=int, default=None)
    p.add_argument("--inpaint-radius", type=int, default=None)
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, NumericalError):
            return EXIT_NUMERICAL
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

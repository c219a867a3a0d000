"""Batch orchestration: configuration, sample records, the full run, reports.

One pipeline run takes a clothes-person sample (in-shop garment, person
image, segmentation, keypoints, optional double depth) through pre-alignment,
contour-driven TPS warping, fusion-mask derivation, coarse try-on synthesis,
compositing, back-texture synthesis, and mesh reconstruction, writing every
intermediate plus a flat key=value report.  Runs are deterministic: the same
inputs, configuration, and thread count produce byte-identical artifacts,
and results do not depend on the thread count at all (work partitions are
fixed).
"""

import dataclasses
import json
import os
from dataclasses import dataclass

from . import metrics as metrics_mod
from .depthtools import depth_metrics
from .fusion import coarse_tryon, derive_fusion_mask, fuse, load_keypoints, tfm_losses
from .imgcore import (
    LABEL_BACKGROUND,
    MaskImage,
    load_depth,
    load_image,
    load_labels,
    load_mask,
    save_depth,
    save_gray,
    save_image,
)
from .prealign import ARM_TORSO_LABELS, apply_affine, compute_prealign
from .recon import export_ply, make_back_texture, stitch_mesh, synth_depth
from .tpswarp import contour_correspondences, fit_tps, tps_warp_image, warping_loss

DATASET_SUBDIRS = ("cloth", "image", "parse", "pose", "depth-front", "depth-back")

#: Brightness threshold separating garment pixels from the white product background.
CLOTH_BG_THRESHOLD = 0.96


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name and sample identifier."""

    def __init__(self, stage, sample, cause):
        super().__init__(f"stage '{stage}' failed for sample '{sample}': {cause}")
        self.stage = stage
        self.sample = sample
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """All pipeline tunables, with library defaults."""

    tps_points: int = 24
    tps_regularization: float = 1e-4
    lambda_depth: float = 1.0
    lambda_grad: float = 0.5
    inpaint_radius: int = 5
    pose_sigma: float = 3.0
    synth_base: float = 0.5
    synth_amplitude: float = 0.08
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.tps_points < 3:
            raise ValueError("tps_points must be >= 3")
        if self.tps_regularization < 0:
            raise ValueError("tps_regularization must be >= 0")
        if self.lambda_depth < 0 or self.lambda_grad < 0:
            raise ValueError("loss weights must be >= 0")
        if self.inpaint_radius < 1:
            raise ValueError("inpaint_radius must be >= 1")
        if self.pose_sigma <= 0:
            raise ValueError("pose_sigma must be > 0")
        if self.synth_amplitude <= 0:
            raise ValueError("synth_amplitude must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_file(cls, path):
        """Load a flat JSON config; unknown keys are rejected to catch typos."""
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"config {path} must hold a flat JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys in {path}: {', '.join(unknown)}")
        return cls(**raw)

    def replaced(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class SampleRecord:
    """File paths making up one clothes-person sample."""

    name: str
    cloth_path: str
    image_path: str
    parse_path: str
    pose_path: str
    depth_front_path: str = None
    depth_back_path: str = None
    gt_tryon_path: str = None
    gt_mask_path: str = None

    @classmethod
    def from_dataset(cls, root, name):
        """Resolve the standard layout; optional files are picked up if present."""
        def p(sub, ext):
            return os.path.join(root, sub, f"{name}.{ext}")

        def opt(sub, ext):
            path = p(sub, ext)
            return path if os.path.exists(path) else None

        return cls(
            name=name,
            cloth_path=p("cloth", "png"),
            image_path=p("image", "png"),
            parse_path=p("parse", "png"),
            pose_path=p("pose", "txt"),
            depth_front_path=opt("depth-front", "pfm"),
            depth_back_path=opt("depth-back", "pfm"),
            gt_tryon_path=opt("gt-tryon", "png"),
            gt_mask_path=opt("gt-mask", "png"),
        )

    def validate(self):
        """Check that every referenced file exists."""
        for label, path in (("cloth", self.cloth_path), ("image", self.image_path),
                            ("parse", self.parse_path), ("pose", self.pose_path),
                            ("depth-front", self.depth_front_path),
                            ("depth-back", self.depth_back_path),
                            ("gt-tryon", self.gt_tryon_path),
                            ("gt-mask", self.gt_mask_path)):
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(f"{label} file missing: {path}")


def cloth_mask_from_image(cloth, threshold=CLOTH_BG_THRESHOLD):
    """Garment silhouette of an in-shop photo: pixels darker than the white bg."""
    return MaskImage((cloth.data < threshold).any(axis=2))


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(entries, path):
    """Write an ordered mapping as 'key=value' lines."""
    with open(path, "w", encoding="ascii") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={_fmt(value)}\n")


def run_pipeline(sample, cfg=PipelineConfig(), out_dir=None, use_synth_depth=False):
    """Execute the full 2-D-to-3-D try-on pipeline for one sample.

    Writes the nine intermediates (aligned cloth, warped cloth, fusion mask,
    coarse try-on, try-on, back texture, both depth maps, mesh) plus a
    report into ``out_dir`` and returns {artifact name: path} including the
    report.  Any stage failure raises PipelineError tagged with the stage
    name and sample identifier.
    """
    out_dir = cfg.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    report = {}
    artifacts = {}

    def stage(name, fn):
        try:
            return fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, sample.name, exc) from exc

    def load_inputs():
        sample.validate()
        cloth = load_image(sample.cloth_path)
        person = load_image(sample.image_path)
        labels = load_labels(sample.parse_path)
        keypoints = load_keypoints(sample.pose_path)
        if cloth.data.shape != person.data.shape:
            raise ValueError(
                f"cloth dims {cloth.data.shape[:2]} != person {person.data.shape[:2]}"
            )
        if labels.data.shape != person.data.shape[:2]:
            raise ValueError(
                f"parse dims {labels.data.shape} != person {person.data.shape[:2]}"
            )
        return cloth, person, labels, keypoints

    cloth, person, labels, keypoints = stage("load", load_inputs)
    h, w = person.data.shape[:2]

    def do_prealign():
        cmask = cloth_mask_from_image(cloth)
        at_mask = labels.mask_for(ARM_TORSO_LABELS)
        params = compute_prealign(cmask, at_mask)
        aligned = apply_affine(cloth, params, w, h)
        aligned_mask = apply_affine(cmask, params, w, h)
        return params, aligned, aligned_mask

    params, cloth_aff, aff_mask = stage("prealign", do_prealign)
    report["prealign_scale"] = float(params.scale)

    def do_correspondences():
        target = labels.mask_for([3])
        return contour_correspondences(aff_mask, target, cfg.tps_points)

    corr = stage("correspondences", do_correspondences)

    def do_fit():
        # fit target -> source so image warping can inverse-map
        return fit_tps(corr.swapped(), cfg.tps_regularization)

    inverse_params = stage("fit_tps", do_fit)

    def do_warp():
        warped = tps_warp_image(cloth_aff, inverse_params, w, h, threads=cfg.threads)
        warped_mask = tps_warp_image(aff_mask, inverse_params, w, h, threads=cfg.threads)
        return warped, warped_mask

    cloth_warped, cw_mask = stage("warp", do_warp)

    fusion_mask = stage("fusion_mask", lambda: derive_fusion_mask(labels, cw_mask))
    coarse = stage("coarse_tryon", lambda: coarse_tryon(person, labels, cfg.inpaint_radius))
    tryon = stage("fuse", lambda: fuse(cloth_warped, coarse, fusion_mask))
    back_tex = stage("back_texture",
                     lambda: make_back_texture(tryon, labels, cfg.inpaint_radius))

    def do_depth():
        person_mask = MaskImage(labels.data != LABEL_BACKGROUND)
        if use_synth_depth or sample.depth_front_path is None:
            if not use_synth_depth:
                raise ValueError("no depth files and synthetic depth not enabled")
            front, back = synth_depth(person_mask, cfg.synth_base, cfg.synth_amplitude)
        else:
            front = load_depth(sample.depth_front_path)
            back = load_depth(sample.depth_back_path)
        return person_mask, front, back

    person_mask, depth_front, depth_back = stage("depth", do_depth)

    mesh = stage("reconstruct",
                 lambda: stitch_mesh(depth_front, depth_back, person_mask,
                                     tryon, back_tex))

    def do_export():
        writers = {
            "cloth_aligned": ("cloth_aligned.png", lambda p: save_image(cloth_aff, p)),
            "cloth_warped": ("cloth_warped.png", lambda p: save_image(cloth_warped, p)),
            "fusion_mask": ("fusion_mask.png", lambda p: save_gray(fusion_mask, p)),
            "coarse_tryon": ("coarse_tryon.png", lambda p: save_image(coarse, p)),
            "tryon": ("tryon.png", lambda p: save_image(tryon, p)),
            "back_texture": ("back_texture.png", lambda p: save_image(back_tex, p)),
            "depth_front": ("depth_front.pfm", lambda p: save_depth(depth_front, p)),
            "depth_back": ("depth_back.pfm", lambda p: save_depth(depth_back, p)),
            "mesh": ("mesh.ply", lambda p: export_ply(mesh, p)),
        }
        for key, (fname, writer) in writers.items():
            path = os.path.join(out_dir, fname)
            writer(path)
            artifacts[key] = path

    stage("export", do_export)

    def do_report():
        report["mesh_vertices"] = mesh.num_vertices
        report["mesh_triangles"] = mesh.num_triangles
        if sample.gt_tryon_path is not None:
            gt_tryon = load_image(sample.gt_tryon_path)
            report["warping_loss"] = warping_loss(cloth_warped, gt_tryon)
        report["ssim"] = metrics_mod.ssim(tryon, person)
        if sample.gt_mask_path is not None:
            gt_mask = load_mask(sample.gt_mask_path)
            losses = tfm_losses(tryon, person, fusion_mask, gt_mask)
            report["l_tryon"] = losses.l_tryon
            report["l_mask"] = losses.l_mask
            report["iou"] = metrics_mod.iou(MaskImage(fusion_mask.data > 0.5), gt_mask)
            report["iou_raw_cloth"] = metrics_mod.iou(cw_mask, gt_mask)
        if use_synth_depth and sample.depth_front_path is not None:
            ref_front = load_depth(sample.depth_front_path)
            ref_back = load_depth(sample.depth_back_path)
            front_m = depth_metrics(depth_front, ref_front, person_mask)
            back_m = depth_metrics(depth_back, ref_back, person_mask)
            for key, fm, bm in (("abs", front_m.abs_err, back_m.abs_err),
                                ("sq", front_m.sq_err, back_m.sq_err),
                                ("rmse", front_m.rmse, back_m.rmse)):
                mean = (fm + bm) / 2.0
                report[f"depth_{key}"] = mean
                report[f"depth_{key}_x1000"] = mean * 1000.0
        path = os.path.join(out_dir, "report.txt")
        write_report(report, path)
        artifacts["report"] = path

    stage("report", do_report)
    return artifacts


# ---------------------------------------------------------------------------
# Dataset validation
# ---------------------------------------------------------------------------

@dataclass
class DatasetReport:
    """Validation outcome: valid basenames and per-file failures."""

    root: str
    valid: list
    invalid: list
    problems: list

    def render(self):
        lines = [f"dataset root: {self.root}"]
        lines.extend(f"problem: {p}" for p in self.problems)
        for name, reason in self.invalid:
            lines.append(f"invalid {name}: {reason}")
        lines.append(f"{len(self.valid)} valid, {len(self.invalid)} invalid")
        return "\n".join(lines)


def validate_dataset(root):
    """Check layout, dimension consistency, and file validity of a dataset.

    Failures never raise; they become report entries so a whole tree can be
    audited in one pass.
    """
    problems = []
    if not os.path.isdir(root):
        problems.append(f"root directory missing: {root}")
        return DatasetReport(root=root, valid=[], invalid=[], problems=problems)
    for sub in DATASET_SUBDIRS:
        if not os.path.isdir(os.path.join(root, sub)):
            problems.append(f"missing subdirectory: {sub}/")

    names = set()
    suffix = {"cloth": ".png", "image": ".png", "parse": ".png", "pose": ".txt",
              "depth-front": ".pfm", "depth-back": ".pfm"}
    for sub in DATASET_SUBDIRS:
        subdir = os.path.join(root, sub)
        if not os.path.isdir(subdir):
            continue
        for entry in os.listdir(subdir):
            if entry.endswith(suffix[sub]):
                names.add(entry[: -len(suffix[sub])])

    valid, invalid = [], []
    for name in sorted(names):
        try:
            record = SampleRecord.from_dataset(root, name)
            for field_name in ("depth_front_path", "depth_back_path"):
                if getattr(record, field_name) is None:
                    raise FileNotFoundError(
                        f"{field_name.replace('_path', '').replace('_', '-')} file missing"
                    )
            record.validate()
            person = load_image(record.image_path)
            shape = person.data.shape[:2]
            cloth = load_image(record.cloth_path)
            labels = load_labels(record.parse_path)
            load_keypoints(record.pose_path)
            front = load_depth(record.depth_front_path)
            back = load_depth(record.depth_back_path)
            for label, got in (("cloth", cloth.data.shape[:2]),
                               ("parse", labels.data.shape),
                               ("depth-front", front.data.shape),
                               ("depth-back", back.data.shape)):
                if got != shape:
                    raise ValueError(f"{label} dims {got} != image dims {shape}")
            valid.append(name)
        except Exception as exc:  # noqa: BLE001 - every failure becomes a report row
            invalid.append((name, str(exc)))
    return DatasetReport(root=root, valid=valid, invalid=invalid, problems=problems)

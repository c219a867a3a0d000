"""Clothing-agnostic representation, fusion mask, and try-on compositing.

The agnostic representation stacks 25 pose heatmap channels, the preserved
person part (identity regions only: hair, face, lower body, shoes), and a
coarse person mask -- 29 channels that describe the person without leaking
the original garment.  The final try-on image is a per-pixel convex blend of
the warped clothing and a coarse garment-free base, steered by a fusion mask
derived from the conditional segmentation.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgcore import (
    LABEL_BACKGROUND,
    LABEL_FACE,
    LABEL_HAIR,
    LABEL_LEFT_ARM,
    LABEL_LOWER_BODY,
    LABEL_RIGHT_ARM,
    LABEL_SHOES,
    LABEL_TORSO_SKIN,
    LABEL_UPPER_CLOTHES,
    GrayImage,
    MaskImage,
    RgbImage,
)
from .recon import telea_inpaint

#: Identity regions kept in the preserved person part.
PRESERVED_LABELS = (LABEL_HAIR, LABEL_FACE, LABEL_LOWER_BODY, LABEL_SHOES)
#: Garment and exposed-skin regions removed so the new garment governs them.
DECLOTH_LABELS = (
    LABEL_UPPER_CLOTHES,
    LABEL_LEFT_ARM,
    LABEL_RIGHT_ARM,
    LABEL_TORSO_SKIN,
)

#: Pose heatmap spread, tuned for 512x320 rasters.
DEFAULT_POSE_SIGMA = 3.0
#: Dilation radius (px) for the coarse person mask.
COARSE_MASK_RADIUS = 8.0

#: BODY-25 joint naming, in channel order.
JOINT_NAMES = (
    "nose", "neck",
    "right_shoulder", "right_elbow", "right_wrist",
    "left_shoulder", "left_elbow", "left_wrist",
    "mid_hip",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "right_eye", "left_eye", "right_ear", "left_ear",
    "left_big_toe", "left_small_toe", "left_heel",
    "right_big_toe", "right_small_toe", "right_heel",
)
NUM_JOINTS = len(JOINT_NAMES)


@dataclass(frozen=True)
class Keypoints:
    """25 named 2-D joints with confidences; absent joints are flagged."""

    points: np.ndarray
    confidence: np.ndarray
    present: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(NUM_JOINTS, 2)
        conf = np.asarray(self.confidence, dtype=np.float64).reshape(NUM_JOINTS)
        pres = np.asarray(self.present, dtype=bool).reshape(NUM_JOINTS)
        if np.any((conf < 0) | (conf > 1)):
            raise ValueError("keypoint confidence must lie in [0, 1]")
        if not np.all(np.isfinite(pts[pres])):
            raise ValueError("present keypoints must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "present", pres)


@dataclass(frozen=True)
class AgnosticRep:
    """29-channel person description: pose heatmaps + preserved part + mask."""

    pose: np.ndarray = field(repr=False)
    preserved: RgbImage
    coarse_mask: MaskImage

    def __post_init__(self):
        h, w = self.preserved.data.shape[:2]
        if self.pose.shape != (h, w, NUM_JOINTS):
            raise ValueError(
                f"pose stack must be (H, W, {NUM_JOINTS}), got {self.pose.shape}"
            )
        if self.coarse_mask.data.shape != (h, w):
            raise ValueError("coarse mask dims differ from preserved image")

    def channels(self):
        """Concatenate to a single (H, W, 29) stack."""
        return np.concatenate(
            [self.pose, self.preserved.data, self.coarse_mask.data[:, :, None]],
            axis=2,
        )


def load_keypoints(path):
    """Parse a 25-line 'name x y confidence' file; 'name absent' rows allowed."""
    pts = np.zeros((NUM_JOINTS, 2))
    conf = np.zeros(NUM_JOINTS)
    pres = np.zeros(NUM_JOINTS, dtype=bool)
    seen = set()
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            name = parts[0]
            if name not in JOINT_NAMES:
                raise ValueError(f"{path}:{lineno}: unknown joint {name!r}")
            if name in seen:
                raise ValueError(f"{path}:{lineno}: duplicate joint {name!r}")
            seen.add(name)
            idx = JOINT_NAMES.index(name)
            if len(parts) == 2 and parts[1] == "absent":
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'name x y confidence'")
            pts[idx] = (float(parts[1]), float(parts[2]))
            conf[idx] = float(parts[3])
            pres[idx] = True
    if len(seen) != NUM_JOINTS:
        missing = sorted(set(JOINT_NAMES) - seen)
        raise ValueError(f"{path}: missing joint rows: {', '.join(missing)}")
    return Keypoints(points=pts, confidence=conf, present=pres)


def save_keypoints(kp, path):
    """Inverse of load_keypoints."""
    with open(path, "w", encoding="ascii") as fh:
        for idx, name in enumerate(JOINT_NAMES):
            if kp.present[idx]:
                x, y = (float(v) for v in kp.points[idx])
                fh.write(f"{name} {x!r} {y!r} {float(kp.confidence[idx])!r}\n")
            else:
                fh.write(f"{name} absent\n")


def rasterize_pose(kp, width, height, sigma=DEFAULT_POSE_SIGMA):
    """One Gaussian heatmap channel per joint, (H, W, 25), peak value 1.

    Absent joints produce all-zero channels; present joints are clamped into
    the image bounds before rasterization.
    """
    if sigma <= 0:
        raise ValueError("rasterize_pose: sigma must be > 0")
    ys, xs = np.mgrid[0:height, 0:width]
    stack = np.zeros((height, width, NUM_JOINTS))
    inv = 1.0 / (2.0 * sigma * sigma)
    for idx in range(NUM_JOINTS):
        if not kp.present[idx]:
            continue
        jx = min(max(kp.points[idx, 0], 0.0), width - 1.0)
        jy = min(max(kp.points[idx, 1], 0.0), height - 1.0)
        d2 = (xs - jx) ** 2 + (ys - jy) ** 2
        stack[:, :, idx] = np.exp(-d2 * inv)
    return stack


def extract_preserved(image, labels):
    """Zero everything except identity regions (hair, face, lower body, shoes)."""
    if image.data.shape[:2] != labels.data.shape:
        raise ValueError(
            f"extract_preserved: image dims {image.data.shape[:2]}"
            f" != labels {labels.data.shape}"
        )
    keep = np.isin(labels.data, PRESERVED_LABELS)
    return RgbImage(np.where(keep[:, :, None], image.data, 0.0))


def coarse_person_mask(labels, radius=COARSE_MASK_RADIUS):
    """Dilated union of all non-background labels (Euclidean disk dilation)."""
    person = labels.data != LABEL_BACKGROUND
    if not person.any():
        return MaskImage(person)
    dist = ndimage.distance_transform_edt(~person)
    return MaskImage(dist <= radius)


def build_agnostic(image, labels, kp, sigma=DEFAULT_POSE_SIGMA):
    """Assemble the full clothing-agnostic representation for one person."""
    h, w = labels.data.shape
    return AgnosticRep(
        pose=rasterize_pose(kp, w, h, sigma),
        preserved=extract_preserved(image, labels),
        coarse_mask=coarse_person_mask(labels),
    )


def derive_fusion_mask(labels, warped_cloth_mask):
    """Blend weights for compositing: 1 on upper-clothes pixels covered by
    the warped garment, 0 elsewhere (arms always stay 0 since they occlude
    the clothing)."""
    if labels.data.shape != warped_cloth_mask.data.shape:
        raise ValueError(
            f"derive_fusion_mask: labels {labels.data.shape}"
            f" != cloth mask {warped_cloth_mask.data.shape}"
        )
    hard = (labels.data == LABEL_UPPER_CLOTHES) & warped_cloth_mask.data
    return GrayImage(hard.astype(np.float64))


def coarse_tryon(person, labels, radius):
    """Garment-free base image: inpaint the decloth region from its rim.

    Only the garment and exposed-skin labels are filled; identity regions and
    the background pass through untouched.
    """
    region = MaskImage(np.isin(labels.data, DECLOTH_LABELS))
    if not region.data.any():
        return RgbImage(person.data)
    return telea_inpaint(person, region, radius)


def fuse(warped_cloth, coarse, weights):
    """Per-pixel convex blend: cloth * w + coarse * (1 - w).

    ``weights`` is a GrayImage in [0, 1]; hard masks give exact selection
    (weight 1 returns the cloth pixel bit-exact, 0 the coarse pixel).
    """
    if warped_cloth.data.shape != coarse.data.shape:
        raise ValueError(
            f"fuse: image dims differ: {warped_cloth.data.shape} vs {coarse.data.shape}"
        )
    if weights.data.shape != warped_cloth.data.shape[:2]:
        raise ValueError(
            f"fuse: weight dims {weights.data.shape}"
            f" != image {warped_cloth.data.shape[:2]}"
        )
    w = weights.data
    if w.min() < 0.0 or w.max() > 1.0:
        raise ValueError("fuse: weights must lie in [0, 1]")
    w3 = w[:, :, None]
    return RgbImage(np.clip(warped_cloth.data * w3 + coarse.data * (1.0 - w3), 0.0, 1.0))


@dataclass(frozen=True)
class TfmLosses:
    """Non-perceptual texture-fusion losses and their sum."""

    l_tryon: float
    l_mask: float
    combined: float


def tfm_losses(tryon, person, mask_pred, mask_gt):
    """Mean-L1 try-on loss plus mean-L1 fusion-mask loss."""
    if tryon.data.shape != person.data.shape:
        raise ValueError(
            f"tfm_losses: image dims differ: {tryon.data.shape} vs {person.data.shape}"
        )
    if mask_pred.data.shape != mask_gt.data.shape:
        raise ValueError(
            f"tfm_losses: mask dims differ: {mask_pred.data.shape}"
            f" vs {mask_gt.data.shape}"
        )
    l_tryon = float(np.mean(np.abs(tryon.data - person.data)))
    l_mask = float(np.mean(np.abs(mask_pred.data - mask_gt.data.astype(np.float64))))
    return TfmLosses(l_tryon=l_tryon, l_mask=l_mask, combined=l_tryon + l_mask)


def perceptual_loss(a, b, features=None):
    """Feature-space mean-L1 distance with a pluggable feature transform.

    ``features`` maps an (H, W, 3) array to an arbitrary array; the default
    identity transform makes this coincide with the plain mean-L1 image loss.
    """
    fa = a.data if features is None else np.asarray(features(a.data))
    fb = b.data if features is None else np.asarray(features(b.data))
    if fa.shape != fb.shape:
        raise ValueError(f"perceptual_loss: feature shapes differ: {fa.shape} vs {fb.shape}")
    return float(np.mean(np.abs(fa - fb)))


def cross_entropy_seg(pred_probs, gt):
    """Mean pixelwise cross entropy against a label map (evaluation metric).

    ``pred_probs`` is (H, W, 9) with per-pixel distributions summing to 1
    (checked to 1e-6); probabilities are clamped at 1e-12 so a confidently
    wrong pixel stays finite.
    """
    probs = np.asarray(pred_probs, dtype=np.float64)
    h, w = gt.data.shape
    if probs.shape != (h, w, 9):
        raise ValueError(f"cross_entropy_seg: need (H, W, 9) probabilities, got {probs.shape}")
    sums = probs.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("cross_entropy_seg: per-pixel probabilities must sum to 1")
    picked = np.take_along_axis(probs, gt.data[:, :, None].astype(np.int64), axis=2)
    return float(np.mean(-np.log(np.maximum(picked[:, :, 0], 1e-12))))

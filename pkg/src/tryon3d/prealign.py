"""Self-adaptive pre-alignment of the in-shop clothing to the arm-torso region.

Before the non-rigid warp, the clothing item is rescaled and translated so
that its bounding box roughly covers the person's arm-torso region.  The
transform is isotropic scale + translation only (no rotation or shear): a
point p maps to ``R * p + t``, with the scale picked by comparing bounding
box aspect ratios so the scaled clothing encloses the target region, and the
translation chosen so the scaled clothing center lands on the target center.
"""

from dataclasses import dataclass

import numpy as np

from .imgcore import (
    LABEL_LEFT_ARM,
    LABEL_RIGHT_ARM,
    LABEL_TORSO_SKIN,
    LABEL_UPPER_CLOTHES,
    MaskImage,
    RgbImage,
    sample_bilinear_grid,
    sample_nearest_grid,
)

#: Segmentation labels forming the arm-torso target region.
ARM_TORSO_LABELS = (
    LABEL_UPPER_CLOTHES,
    LABEL_LEFT_ARM,
    LABEL_RIGHT_ARM,
    LABEL_TORSO_SKIN,
)


@dataclass(frozen=True)
class BBoxStats:
    """Tight bounding box of a mask: midpoint center and pixel extents."""

    center_x: float
    center_y: float
    width: float
    height: float

    @property
    def aspect(self):
        return self.width / self.height


@dataclass(frozen=True)
class AffineParams:
    """Isotropic scale + translation, applied as p -> scale * p + t."""

    scale: float
    translate_x: float
    translate_y: float

    def apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return self.scale * pts + np.array([self.translate_x, self.translate_y])


def mask_stats(mask):
    """Bounding-box statistics of a nonempty mask.

    The center is the midpoint of the tight axis-aligned bounding box (not
    the centroid), matching the statistic the rescale rule compares.
    """
    ys, xs = np.nonzero(mask.data)
    if xs.size == 0:
        raise ValueError("mask_stats: empty mask")
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return BBoxStats(
        center_x=(x0 + x1) / 2.0,
        center_y=(y0 + y1) / 2.0,
        width=float(x1 - x0 + 1),
        height=float(y1 - y0 + 1),
    )


def rescale_factor(cloth, arm_torso):
    """Scale making the clothing bbox enclose the arm-torso bbox.

    When the clothing box is relatively wider than the target
    (w_c/h_c >= w_at/h_at) the heights are matched, otherwise the widths;
    either way the non-binding axis ends up over-covered.
    """
    if min(cloth.width, cloth.height, arm_torso.width, arm_torso.height) < 1:
        raise ValueError("rescale_factor: bbox extents must be >= 1")
    if cloth.aspect >= arm_torso.aspect:
        return arm_torso.height / cloth.height
    return arm_torso.width / cloth.width


def compute_prealign(cloth_mask, arm_torso_mask):
    """Fit AffineParams centering the scaled clothing on the arm-torso region."""
    cloth = mask_stats(cloth_mask)
    target = mask_stats(arm_torso_mask)
    scale = rescale_factor(cloth, target)
    return AffineParams(
        scale=scale,
        translate_x=target.center_x - scale * cloth.center_x,
        translate_y=target.center_y - scale * cloth.center_y,
    )


def apply_affine(image, params, out_w, out_h, background=1.0):
    """Resample an RgbImage or MaskImage under forward map p -> R*p + t.

    The output grid is inverse-mapped into the source: RGB images sample
    bilinearly and fill out-of-source pixels with ``background`` (white by
    default, matching in-shop product photos); masks sample nearest and fill
    with False.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("apply_affine: output dimensions must be >= 1")
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    src_x = (xs - params.translate_x) / params.scale
    src_y = (ys - params.translate_y) / params.scale
    h, w = image.data.shape[:2]
    inside = (
        (src_x >= -0.5) & (src_x <= w - 0.5)
        & (src_y >= -0.5) & (src_y <= h - 0.5)
    )
    if isinstance(image, MaskImage):
        out = sample_nearest_grid(image.data, src_x, src_y)
        return MaskImage(out & inside)
    out = sample_bilinear_grid(image.data, src_x, src_y)
    out[~inside] = background
    return RgbImage(np.clip(out, 0.0, 1.0))

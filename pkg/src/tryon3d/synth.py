"""Deterministic synthetic clothes-person sample for demos and smoke tests.

Draws a simple front-facing figure (hair, face, striped garment, arms,
legs, shoes) plus the matching in-shop garment image on a white background,
the segmentation labels, BODY-25 keypoints, and paired ground truth (the
clothing-on-person region and its mask).  Everything is computed from
closed-form shapes, so two generations are byte-identical.
"""

import os

import numpy as np

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
    LabelMap,
    MaskImage,
    RgbImage,
    save_depth,
    save_image,
    save_labels,
    save_mask,
)
from .fusion import JOINT_NAMES, Keypoints, save_keypoints
from .recon import synth_depth

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 512

_SKIN = (0.87, 0.72, 0.60)
_HAIR = (0.25, 0.16, 0.10)
_STRIPE_A = (0.75, 0.15, 0.20)
_STRIPE_B = (0.95, 0.92, 0.88)
_JEANS = (0.15, 0.20, 0.35)
_SHOE = (0.10, 0.10, 0.10)
_PERSON_BG = 0.82


def _disk(xs, ys, cx, cy, r):
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


def _ellipse(xs, ys, cx, cy, rx, ry):
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _capsule(xs, ys, x0, y0, x1, y1, r):
    """Pixels within distance r of the segment (x0,y0)-(x1,y1)."""
    dx, dy = x1 - x0, y1 - y0
    len2 = dx * dx + dy * dy
    if len2 == 0:
        return _disk(xs, ys, x0, y0, r)
    t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / len2, 0.0, 1.0)
    px = x0 + t * dx
    py = y0 + t * dy
    return (xs - px) ** 2 + (ys - py) ** 2 <= r * r


def _garment_region(xs, ys, sx, sy, cx, shoulder_y, hem_y, half_width,
                    sleeve_drop, sleeve_reach, sleeve_r):
    """Torso block plus two sleeves; all shape constants are in 320x512 units."""
    torso = (
        (np.abs(xs - cx) <= half_width * sx)
        & (ys >= shoulder_y * sy)
        & (ys <= hem_y * sy)
    )
    l_sleeve = _capsule(
        xs, ys,
        (cx - half_width * sx), shoulder_y * sy + 10 * sy,
        (cx - (half_width + sleeve_reach) * sx), (shoulder_y + sleeve_drop) * sy,
        sleeve_r * min(sx, sy),
    )
    r_sleeve = _capsule(
        xs, ys,
        (cx + half_width * sx), shoulder_y * sy + 10 * sy,
        (cx + (half_width + sleeve_reach) * sx), (shoulder_y + sleeve_drop) * sy,
        sleeve_r * min(sx, sy),
    )
    return torso | l_sleeve | r_sleeve


def _stripes(shape_mask, ys, sy, phase=0.0):
    """Alternating stripe color field over a boolean region."""
    band = (np.floor((ys / sy + phase) / 14.0).astype(np.int64) % 2) == 0
    rgb = np.zeros(shape_mask.shape + (3,))
    for c in range(3):
        rgb[:, :, c] = np.where(band, _STRIPE_A[c], _STRIPE_B[c])
    return rgb


def make_person(width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT):
    """Synthesize (person image, label map, keypoints) for one figure."""
    sx, sy = width / 320.0, height / 512.0
    s = min(sx, sy)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx = 160.0 * sx

    labels = np.full((height, width), LABEL_BACKGROUND, dtype=np.uint8)
    hair = _disk(xs, ys, cx, 72 * sy, 38 * s)
    face = _ellipse(xs, ys, cx, 96 * sy, 24 * sx, 28 * sy)
    neck = (np.abs(xs - cx) <= 11 * sx) & (ys >= 118 * sy) & (ys <= 148 * sy)
    garment = _garment_region(
        xs, ys, sx, sy, cx,
        shoulder_y=145, hem_y=300, half_width=55,
        sleeve_drop=85, sleeve_reach=28, sleeve_r=16,
    )
    l_fore = _capsule(xs, ys, cx - 83 * sx, 230 * sy, cx - 95 * sx, 305 * sy, 11 * s)
    r_fore = _capsule(xs, ys, cx + 83 * sx, 230 * sy, cx + 95 * sx, 305 * sy, 11 * s)
    hips = (np.abs(xs - cx) <= 48 * sx) & (ys > 300 * sy) & (ys <= 330 * sy)
    l_leg = _capsule(xs, ys, cx - 28 * sx, 325 * sy, cx - 34 * sx, 455 * sy, 20 * s)
    r_leg = _capsule(xs, ys, cx + 28 * sx, 325 * sy, cx + 34 * sx, 455 * sy, 20 * s)
    l_shoe = _ellipse(xs, ys, cx - 36 * sx, 470 * sy, 26 * sx, 14 * sy)
    r_shoe = _ellipse(xs, ys, cx + 36 * sx, 470 * sy, 26 * sx, 14 * sy)

    labels[hair] = LABEL_HAIR
    labels[face] = LABEL_FACE
    labels[neck] = LABEL_TORSO_SKIN
    labels[hips | l_leg | r_leg] = LABEL_LOWER_BODY
    labels[garment] = LABEL_UPPER_CLOTHES
    labels[l_fore & ~garment] = LABEL_LEFT_ARM
    labels[r_fore & ~garment] = LABEL_RIGHT_ARM
    labels[l_shoe | r_shoe] = LABEL_SHOES

    img = np.full((height, width, 3), _PERSON_BG)
    shade = 0.88 + 0.12 * (1.0 - ys / height)  # gentle top light
    stripes = _stripes(garment, ys, sy)
    for c in range(3):
        ch = img[:, :, c]
        ch[hair] = _HAIR[c]
        ch[face] = _SKIN[c]
        ch[neck] = _SKIN[c]
        ch[hips | l_leg | r_leg] = _JEANS[c]
        ch[garment] = stripes[:, :, c][garment]
        ch[l_fore & (labels == LABEL_LEFT_ARM)] = _SKIN[c] * 0.96
        ch[r_fore & (labels == LABEL_RIGHT_ARM)] = _SKIN[c] * 0.96
        ch[l_shoe | r_shoe] = _SHOE[c]
    img *= shade[:, :, None]

    points = np.zeros((len(JOINT_NAMES), 2))
    conf = np.full(len(JOINT_NAMES), 0.9)
    present = np.ones(len(JOINT_NAMES), dtype=bool)

    def put(name, x320, y512):
        idx = JOINT_NAMES.index(name)
        points[idx] = (x320 * sx, y512 * sy)

    put("nose", 160, 96)
    put("neck", 160, 140)
    put("right_shoulder", 105, 152)
    put("right_elbow", 77, 232)
    put("right_wrist", 65, 303)
    put("left_shoulder", 215, 152)
    put("left_elbow", 243, 232)
    put("left_wrist", 255, 303)
    put("mid_hip", 160, 312)
    put("right_hip", 132, 315)
    put("right_knee", 128, 390)
    put("right_ankle", 126, 452)
    put("left_hip", 188, 315)
    put("left_knee", 192, 390)
    put("left_ankle", 194, 452)
    put("right_eye", 150, 88)
    put("left_eye", 170, 88)
    put("left_big_toe", 204, 474)
    put("left_small_toe", 212, 472)
    put("left_heel", 186, 468)
    put("right_big_toe", 116, 474)
    put("right_small_toe", 108, 472)
    put("right_heel", 134, 468)
    for absent in ("right_ear", "left_ear"):
        present[JOINT_NAMES.index(absent)] = False
    kp = Keypoints(points=points, confidence=conf, present=present)

    return RgbImage(np.clip(img, 0.0, 1.0)), LabelMap(labels), kp


def make_cloth(width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT):
    """Synthesize the in-shop garment image (white background, larger scale)."""
    sx, sy = width / 320.0, height / 512.0
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx = 160.0 * sx
    garment = _garment_region(
        xs, ys, sx, sy, cx,
        shoulder_y=150, hem_y=360, half_width=74,
        sleeve_drop=130, sleeve_reach=38, sleeve_r=21,
    )
    img = np.ones((height, width, 3))
    stripes = _stripes(garment, ys, sy, phase=4.0)
    for c in range(3):
        ch = img[:, :, c]
        ch[garment] = stripes[:, :, c][garment]
    return RgbImage(img)


def make_sample(width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT):
    """Full in-memory sample: person, labels, keypoints, cloth, gt pair."""
    person, labels, kp = make_person(width, height)
    cloth = make_cloth(width, height)
    gt_mask = MaskImage(labels.data == LABEL_UPPER_CLOTHES)
    # white background to match in-shop garment photos
    gt_tryon = RgbImage(np.where(gt_mask.data[:, :, None], person.data, 1.0))
    return {
        "person": person,
        "labels": labels,
        "keypoints": kp,
        "cloth": cloth,
        "gt_tryon": gt_tryon,
        "gt_mask": gt_mask,
    }


def write_sample(root, name="sample0", width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT,
                 depth_base=None, depth_amplitude=None):
    """Write one sample in the dataset layout; returns the written paths.

    Layout: cloth/, image/, parse/, pose/, depth-front/, depth-back/ share
    the basename, plus optional ground-truth dirs gt-tryon/ and gt-mask/.
    """
    from .recon import DEFAULT_SYNTH_AMPLITUDE, DEFAULT_SYNTH_BASE

    base = DEFAULT_SYNTH_BASE if depth_base is None else depth_base
    amplitude = DEFAULT_SYNTH_AMPLITUDE if depth_amplitude is None else depth_amplitude
    sample = make_sample(width, height)
    person_mask = MaskImage(sample["labels"].data != LABEL_BACKGROUND)
    front, back = synth_depth(person_mask, base, amplitude)

    paths = {}
    for sub in ("cloth", "image", "parse", "pose",
                "depth-front", "depth-back", "gt-tryon", "gt-mask"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    paths["cloth"] = os.path.join(root, "cloth", f"{name}.png")
    save_image(sample["cloth"], paths["cloth"])
    paths["image"] = os.path.join(root, "image", f"{name}.png")
    save_image(sample["person"], paths["image"])
    paths["parse"] = os.path.join(root, "parse", f"{name}.png")
    save_labels(sample["labels"], paths["parse"])
    paths["pose"] = os.path.join(root, "pose", f"{name}.txt")
    save_keypoints(sample["keypoints"], paths["pose"])
    paths["depth_front"] = os.path.join(root, "depth-front", f"{name}.pfm")
    save_depth(front, paths["depth_front"])
    paths["depth_back"] = os.path.join(root, "depth-back", f"{name}.pfm")
    save_depth(back, paths["depth_back"])
    paths["gt_tryon"] = os.path.join(root, "gt-tryon", f"{name}.png")
    save_image(sample["gt_tryon"], paths["gt_tryon"])
    paths["gt_mask"] = os.path.join(root, "gt-mask", f"{name}.png")
    save_mask(sample["gt_mask"], paths["gt_mask"])
    return paths

"""Depth-side numerics: Sobel gradients, depth losses, normals, error metrics.

Every loss returns its value together with the analytic gradient with
respect to the predicted depth (a field shaped like the prediction).  All
reductions are means over the masked pixel set, accumulated in fixed
row-major order, so results are bit-reproducible.

The gradient-matching loss compares Sobel responses of the per-pixel error
magnitude field; because the raw Sobel response of an error field can be
negative (where ``ln(g + 1)`` is undefined), the loss uses the magnitude
form ``ln(|g| + 1)``.  With replicate padding a constant error field has an
identically zero Sobel response, so a constant depth offset costs exactly
nothing here.
"""

from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage, to_gray

#: Loss weights for the refinement objective: depth term and gradient term.
DEFAULT_LAMBDA_DEPTH = 1.0
DEFAULT_LAMBDA_GRAD = 0.5

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
#: Interior response of SOBEL_X on a unit-slope horizontal ramp.
SOBEL_RAMP_GAIN = 8.0


@dataclass(frozen=True)
class GradPair:
    """Horizontal and vertical gradient images of one scalar field."""

    gx: GrayImage
    gy: GrayImage


@dataclass(frozen=True)
class LossResult:
    """Scalar loss value plus d(loss)/d(prediction) per pixel."""

    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class DepthMetrics:
    """Mean absolute, mean squared, and root-mean-squared depth errors."""

    abs_err: float
    sq_err: float
    rmse: float


def _sobel_x_apply(field):
    """Correlate with SOBEL_X, replicate padding.

    Written as weighted horizontal differences so a constant field yields
    exactly zero (each difference cancels bit-exactly).
    """
    h, w = field.shape
    padded = np.pad(field, 1, mode="edge")
    d = padded[:, 2:] - padded[:, :-2]
    return d[0:h, :] + 2.0 * d[1:h + 1, :] + d[2:h + 2, :]


def _sobel_y_apply(field):
    """Correlate with SOBEL_Y, replicate padding (see _sobel_x_apply)."""
    h, w = field.shape
    padded = np.pad(field, 1, mode="edge")
    d = padded[2:, :] - padded[:-2, :]
    return d[:, 0:w] + 2.0 * d[:, 1:w + 1] + d[:, 2:w + 2]


def _correlate3_adjoint(upstream, kernel):
    """Transpose of 3x3 correlation with replicate padding (edges fold back)."""
    h, w = upstream.shape
    gp = np.zeros((h + 2, w + 2))
    for u in range(3):
        for v in range(3):
            k = kernel[u, v]
            if k != 0.0:
                gp[u:u + h, v:v + w] += k * upstream
    grad = gp[1:h + 1, 1:w + 1].copy()
    grad[0, :] += gp[0, 1:w + 1]
    grad[-1, :] += gp[h + 1, 1:w + 1]
    grad[:, 0] += gp[1:h + 1, 0]
    grad[:, -1] += gp[1:h + 1, w + 1]
    grad[0, 0] += gp[0, 0]
    grad[0, -1] += gp[0, w + 1]
    grad[-1, 0] += gp[h + 1, 0]
    grad[-1, -1] += gp[h + 1, w + 1]
    return grad


def sobel(gray):
    """Sobel responses of a GrayImage: unnormalized 3x3 kernels, replicate padding.

    Interior response on a ramp a*x is 8a in gx (and symmetrically for gy).
    """
    gx = _sobel_x_apply(gray.data)
    gy = _sobel_y_apply(gray.data)
    return GradPair(gx=GrayImage(gx), gy=GrayImage(gy))


def gradient_image(warped_cloth, preserved):
    """Stack the Sobel responses of two RGB inputs into an (H, W, 4) field.

    Channels are [gx, gy] of the warped-clothing luminance followed by
    [gx, gy] of the preserved-person luminance; the stack summarizes the
    brightness changes both inputs contribute.
    """
    if warped_cloth.data.shape != preserved.data.shape:
        raise ValueError(
            f"gradient_image shape mismatch: {warped_cloth.data.shape}"
            f" vs {preserved.data.shape}"
        )
    a = sobel(to_gray(warped_cloth))
    b = sobel(to_gray(preserved))
    return np.stack([a.gx.data, a.gy.data, b.gx.data, b.gy.data], axis=2)


def _check_loss_inputs(pred, gt, mask):
    if pred.data.shape != gt.data.shape or pred.data.shape != mask.data.shape:
        raise ValueError(
            f"depth loss shape mismatch: pred {pred.data.shape},"
            f" gt {gt.data.shape}, mask {mask.data.shape}"
        )
    n = int(mask.data.sum())
    if n == 0:
        raise ValueError("depth loss: empty mask")
    return n


def log_l1_loss(pred, gt, mask):
    """Log-compressed L1 depth loss: mean of ln(|pred - gt| + 1) over the mask.

    The compression penalizes small errors relatively more heavily than a
    plain L1.  The subgradient uses sign(0) = 0.
    """
    n = _check_loss_inputs(pred, gt, mask)
    m = mask.data
    diff = pred.data - gt.data
    eps = np.abs(diff)
    value = float(np.log1p(eps[m]).sum() / n)
    gradient = np.where(m, np.sign(diff) / (n * (eps + 1.0)), 0.0)
    return LossResult(value=value, gradient=gradient)


def depth_gradient_loss(pred, gt, mask):
    """Penalize Sobel responses of the depth-error magnitude field.

    The error field is |pred - gt| inside the mask and 0 outside; the loss is
    the masked mean of ln(|gx| + 1) + ln(|gy| + 1) of that field.  A constant
    offset over a full-frame mask costs exactly 0.  The gradient chains
    through the Sobel operator via its exact adjoint.
    """
    n = _check_loss_inputs(pred, gt, mask)
    m = mask.data
    diff = pred.data - gt.data
    eps = np.where(m, np.abs(diff), 0.0)
    gx = _sobel_x_apply(eps)
    gy = _sobel_y_apply(eps)
    value = float((np.log1p(np.abs(gx[m])).sum() + np.log1p(np.abs(gy[m])).sum()) / n)
    ux = np.where(m, np.sign(gx) / (np.abs(gx) + 1.0), 0.0) / n
    uy = np.where(m, np.sign(gy) / (np.abs(gy) + 1.0), 0.0) / n
    d_eps = _correlate3_adjoint(ux, SOBEL_X) + _correlate3_adjoint(uy, SOBEL_Y)
    gradient = np.where(m, np.sign(diff) * d_eps, 0.0)
    return LossResult(value=value, gradient=gradient)


def drm_combine(l_depth, l_grad,
                lambda_depth=DEFAULT_LAMBDA_DEPTH,
                lambda_grad=DEFAULT_LAMBDA_GRAD):
    """Weighted sum of the depth and gradient loss values."""
    return lambda_depth * l_depth + lambda_grad * l_grad


def drm_loss(pred, gt, mask,
             lambda_depth=DEFAULT_LAMBDA_DEPTH,
             lambda_grad=DEFAULT_LAMBDA_GRAD):
    """Refinement loss: lambda_depth * log-L1 + lambda_grad * gradient loss."""
    if lambda_depth < 0 or lambda_grad < 0:
        raise ValueError("loss weights must be >= 0")
    depth_part = log_l1_loss(pred, gt, mask)
    grad_part = depth_gradient_loss(pred, gt, mask)
    return LossResult(
        value=drm_combine(depth_part.value, grad_part.value, lambda_depth, lambda_grad),
        gradient=lambda_depth * depth_part.gradient + lambda_grad * grad_part.gradient,
    )


def mpm_depth_loss(front, back, front_gt, back_gt, mask):
    """Masked mean-L1 on the front depth plus masked mean-L1 on the back depth."""
    n = _check_loss_inputs(front, front_gt, mask)
    if back.data.shape != front.data.shape or back_gt.data.shape != front.data.shape:
        raise ValueError("mpm_depth_loss: front/back shapes differ")
    m = mask.data
    front_term = np.abs(front.data - front_gt.data)[m].sum() / n
    back_term = np.abs(back.data - back_gt.data)[m].sum() / n
    return float(front_term + back_term)


def mpm_total_loss(l_warp, l_seg, l_depth):
    """Full multi-target objective: plain sum of the three branch losses."""
    total = float(l_warp) + float(l_seg) + float(l_depth)
    if not np.isfinite(total):
        raise ValueError("mpm_total_loss: inputs must be finite")
    return total


def normal_from_depth(depth, mask, step):
    """Unit surface normals from Sobel depth gradients, (H, W, 3), y in image rows.

    ``step`` is the world-unit length of one pixel; gradients are divided by
    the Sobel ramp gain (8) times ``step`` to convert responses to world
    slopes.  Pixels outside the mask are zero; all others have positive z.
    """
    if step <= 0:
        raise ValueError("normal_from_depth: step must be > 0")
    pair = sobel(GrayImage(depth.data))
    nx = -pair.gx.data / (SOBEL_RAMP_GAIN * step)
    ny = -pair.gy.data / (SOBEL_RAMP_GAIN * step)
    nz = np.ones_like(nx)
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    normals = np.stack([nx / norm, ny / norm, nz / norm], axis=2)
    normals[~mask.data] = 0.0
    return normals


def depth_metrics(pred, gt, mask, relative=False):
    """Masked Abs/Sq/RMSE depth errors.

    With ``relative=True`` the absolute and squared terms are divided by the
    reference depth per pixel (the RMSE stays unnormalized); reference depths
    of zero are rejected in that mode.
    """
    n = _check_loss_inputs(pred, gt, mask)
    diff = (pred.data - gt.data)[mask.data]
    sq = diff * diff
    rmse = float(np.sqrt(sq.sum() / n))
    if relative:
        ref = gt.data[mask.data]
        if np.any(ref == 0.0):
            raise ValueError("relative depth metrics undefined for zero reference depth")
        return DepthMetrics(
            abs_err=float((np.abs(diff) / ref).sum() / n),
            sq_err=float((sq / ref).sum() / n),
            rmse=rmse,
        )
    return DepthMetrics(
        abs_err=float(np.abs(diff).sum() / n),
        sq_err=float(sq.sum() / n),
        rmse=rmse,
    )

"""Thin-plate-spline fitting, point/image warping, and warping loss.

The warp is the classical 2-D TPS: an affine part plus radial terms with
kernel ``U(r) = r^2 ln(r^2)`` anchored at control points.  Fitting solves
the standard linear system

    [K + lam*I  P] [w]   [t]
    [P^T        0] [a] = [0],   P = [1 x y],

whose side conditions (zero sum and zero first moment of the radial
weights) make the far field purely affine.  ``lam`` (Tikhonov on the kernel
block only) trades interpolation exactness for smoothness; ``lam = 0``
interpolates the control points exactly.

Correspondences for mask-driven warping come from tracing the outer contour
of each mask and resampling it uniformly by arc length, replacing a learned
parameter regressor with deterministic classical machinery.  The module also
provides the normalized feature-correlation primitive used by geometric
matching and the L1 warping loss.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .imgcore import MaskImage, RgbImage, sample_bilinear_grid, sample_nearest_grid
from .prealign import mask_stats

#: Default Tikhonov regularization on the TPS kernel block.
DEFAULT_TPS_REG = 1e-4
#: Default number of contour samples for mask-driven fitting.
DEFAULT_CONTOUR_POINTS = 24

_WARP_CHUNK_ROWS = 32  # fixed partition so results never depend on thread count


class NumericalError(RuntimeError):
    """Raised when a linear system is singular or numerically unusable."""


@dataclass(frozen=True)
class Correspondences:
    """Paired 2-D source/target points (pixel coordinates)."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source, dtype=np.float64).reshape(-1, 2)
        tgt = np.asarray(self.target, dtype=np.float64).reshape(-1, 2)
        if src.shape != tgt.shape:
            raise ValueError(
                f"correspondence length mismatch: {src.shape[0]} vs {tgt.shape[0]}"
            )
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(tgt))):
            raise ValueError("correspondences must be finite")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)

    def __len__(self):
        return self.source.shape[0]

    def swapped(self):
        """Reverse the mapping direction (used to fit inverse warps)."""
        return Correspondences(self.target, self.source)


@dataclass(frozen=True)
class TpsParams:
    """Fitted TPS coefficients: control points, 2x3 affine, radial weights."""

    control_points: np.ndarray
    affine: np.ndarray
    weights: np.ndarray
    regularization: float = 0.0

    @classmethod
    def identity(cls):
        aff = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return cls(
            control_points=np.zeros((0, 2)),
            affine=aff,
            weights=np.zeros((0, 2)),
        )


@dataclass(frozen=True)
class CorrelationTensor:
    """Normalized matching scores between two feature grids.

    ``values[i, j, k*w + l]`` is the cosine similarity between the feature
    vector of grid A at (row i, col j) and grid B at (row k, col l).
    """

    height: int
    width: int
    values: np.ndarray = field(repr=False)


def _tps_kernel(r2):
    """U(r) = r^2 ln(r^2) evaluated from squared distances, with U(0) = 0."""
    out = np.zeros_like(r2)
    nz = r2 > 0.0
    out[nz] = r2[nz] * np.log(r2[nz])
    return out


def fit_tps(corr, regularization=DEFAULT_TPS_REG):
    """Fit TPS parameters mapping corr.source onto corr.target.

    ``regularization`` is added to the diagonal of the kernel block only, so
    exactly affine data still reproduces with (numerically) zero radial
    weights.  Raises NumericalError for degenerate geometry: fewer than 3
    points, duplicated source points, or an all-collinear source set.
    """
    src = corr.source
    tgt = corr.target
    n = src.shape[0]
    if n < 3:
        raise NumericalError(f"TPS needs at least 3 control points, got {n}")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    d = cdist(src, src)
    np.fill_diagonal(d, 1.0)
    if d.min() < 1e-9:
        raise NumericalError("duplicate control points make the TPS system singular")
    p = np.column_stack([np.ones(n), src])
    if np.linalg.matrix_rank(p) < 3:
        raise NumericalError("collinear control points make the TPS system singular")
    r2 = cdist(src, src, "sqeuclidean")
    k = _tps_kernel(r2) + regularization * np.eye(n)
    lmat = np.zeros((n + 3, n + 3))
    lmat[:n, :n] = k
    lmat[:n, n:] = p
    lmat[n:, :n] = p.T
    rhs = np.zeros((n + 3, 2))
    rhs[:n] = tgt
    try:
        sol = np.linalg.solve(lmat, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular TPS system: {exc}") from exc
    weights = sol[:n]
    affine = sol[n:].T  # rows: [a0, ax, ay] per output coordinate
    return TpsParams(
        control_points=src.copy(),
        affine=affine,
        weights=weights,
        regularization=regularization,
    )


def tps_apply_points(params, pts):
    """Evaluate the fitted map at an (M, 2) array of points."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    ones = np.ones((pts.shape[0], 1))
    out = np.hstack([ones, pts]) @ params.affine.T
    if params.control_points.shape[0]:
        r2 = cdist(pts, params.control_points, "sqeuclidean")
        out += _tps_kernel(r2) @ params.weights
    return out


def tps_warp_image(image, params_inverse, out_w, out_h, threads=1):
    """Warp an image with inverse-fitted TPS parameters.

    ``params_inverse`` must map output coordinates to source coordinates
    (fit with target->source correspondences); each output pixel then pulls
    its value by bilinear sampling (nearest for masks) with replicate
    padding, which keeps the output hole-free.  Work is partitioned into
    fixed row chunks so results are identical for any thread count.
    """
    is_mask = isinstance(image, MaskImage)
    data = image.data
    out = np.empty((out_h, out_w), dtype=bool) if is_mask else np.empty(
        (out_h, out_w, 3), dtype=np.float64
    )
    xs = np.arange(out_w, dtype=np.float64)

    def fill(y0):
        y1 = min(y0 + _WARP_CHUNK_ROWS, out_h)
        gx, gy = np.meshgrid(xs, np.arange(y0, y1, dtype=np.float64))
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        mapped = tps_apply_points(params_inverse, pts)
        sx = mapped[:, 0].reshape(y1 - y0, out_w)
        sy = mapped[:, 1].reshape(y1 - y0, out_w)
        if is_mask:
            out[y0:y1] = sample_nearest_grid(data, sx, sy)
        else:
            out[y0:y1] = sample_bilinear_grid(data, sx, sy)

    starts = range(0, out_h, _WARP_CHUNK_ROWS)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for y0 in starts:
            fill(y0)
    if is_mask:
        return MaskImage(out)
    return RgbImage(np.clip(out, 0.0, 1.0))


def trace_contour(mask):
    """Outer contour of a mask as an ordered (L, 2) array of (x, y) pixels.

    Moore-neighbor tracing, clockwise, starting at the topmost then leftmost
    foreground pixel; stops when the walk re-enters its exact starting state
    (start pixel with the same backtrack neighbor).  Raises on empty masks
    and single-pixel contours.
    """
    m = mask.data
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise ValueError("trace_contour: empty mask")
    start = (int(xs[ys == ys.min()].min()), int(ys.min()))
    h, w = m.shape

    def fg(p):
        x, y = p
        return 0 <= x < w and 0 <= y < h and m[y, x]

    # Clockwise Moore neighborhood in screen coords (x right, y down).
    moore = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
    offset_index = {d: i for i, d in enumerate(moore)}

    cur = start
    backtrack = (start[0] - 1, start[1])  # west of a topmost-leftmost pixel is bg
    seen = {(cur, backtrack)}
    contour = [start]
    for _ in range(8 * xs.size + 8):
        bdir = (backtrack[0] - cur[0], backtrack[1] - cur[1])
        base = offset_index[bdir]
        nxt = None
        for step in range(1, 9):
            d = moore[(base + step) % 8]
            cand = (cur[0] + d[0], cur[1] + d[1])
            if fg(cand):
                nxt = cand
                prev = moore[(base + step - 1) % 8]
                backtrack = (cur[0] + prev[0], cur[1] + prev[1])
                break
        if nxt is None:
            raise ValueError("trace_contour: degenerate single-pixel contour")
        cur = nxt
        state = (cur, backtrack)
        if state in seen:  # walk state repeats: the boundary cycle is closed
            break
        seen.add(state)
        contour.append(cur)
    if len(contour) < 2:
        raise ValueError("trace_contour: degenerate single-pixel contour")
    return np.array(contour, dtype=np.float64)


def _resample_closed(points, count):
    """Resample a closed polyline to ``count`` points uniform in arc length."""
    closed = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        raise ValueError("degenerate contour with zero length")
    targets = np.arange(count) * (total / count)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    frac = (targets - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    return closed[idx] + frac[:, None] * (closed[idx + 1] - closed[idx])


def contour_correspondences(src_mask, dst_mask, count=DEFAULT_CONTOUR_POINTS):
    """Pair K arc-length contour samples of two masks, plus their centers.

    Both contours start at the topmost-then-leftmost pixel and run clockwise,
    so roughly aligned shapes yield roughly corresponding pairs.  The bbox
    centers are appended as one extra pair, giving count+1 correspondences.
    """
    if count < 3:
        raise ValueError("contour_correspondences: need at least 3 points")
    src_pts = _resample_closed(trace_contour(src_mask), count)
    dst_pts = _resample_closed(trace_contour(dst_mask), count)
    src_c = mask_stats(src_mask)
    dst_c = mask_stats(dst_mask)
    src_all = np.vstack([src_pts, [[src_c.center_x, src_c.center_y]]])
    dst_all = np.vstack([dst_pts, [[dst_c.center_x, dst_c.center_y]]])
    return Correspondences(src_all, dst_all)


def grid_points(x0, y0, x1, y1, nx=5, ny=5):
    """Regular nx-by-ny point grid over a rectangle, row-major."""
    gx, gy = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    return np.column_stack([gx.ravel(), gy.ravel()])


def feature_correlation(fa, fb):
    """All-pairs cosine similarity between two (h, w, c) feature grids.

    Each feature vector is L2-normalized (zero vectors stay zero), so every
    entry lies in [-1, 1] and identical nonzero vectors correlate to 1.
    """
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    if fa.shape != fb.shape or fa.ndim != 3:
        raise ValueError(f"feature grids must share (h, w, c) dims: {fa.shape} vs {fb.shape}")
    if fa.shape[2] < 1:
        raise ValueError("feature grids need at least one channel")

    def normalize(f):
        norm = np.linalg.norm(f, axis=2, keepdims=True)
        return np.where(norm > 0, f / np.where(norm > 0, norm, 1.0), 0.0)

    na = normalize(fa)
    nb = normalize(fb)
    h, w, _ = fa.shape
    vals = np.einsum("ijc,klc->ijkl", na, nb).reshape(h, w, h * w)
    return CorrelationTensor(height=h, width=w, values=np.clip(vals, -1.0, 1.0))


def warping_loss(warped, target):
    """Mean absolute difference over all pixels and channels."""
    if warped.data.shape != target.data.shape:
        raise ValueError(
            f"warping_loss shape mismatch: {warped.data.shape} vs {target.data.shape}"
        )
    return float(np.mean(np.abs(warped.data - target.data)))


def save_correspondences(corr, path):
    """Write correspondences as plain-text 'sx sy tx ty' lines."""
    with open(path, "w", encoding="ascii") as fh:
        for (sx, sy), (tx, ty) in zip(corr.source, corr.target):
            fh.write(f"{float(sx)!r} {float(sy)!r} {float(tx)!r} {float(ty)!r}\n")


def load_correspondences(path):
    """Read correspondences written by save_correspondences."""
    src, tgt = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'sx sy tx ty'")
            sx, sy, tx, ty = (float(v) for v in parts)
            src.append((sx, sy))
            tgt.append((tx, ty))
    return Correspondences(np.array(src), np.array(tgt))

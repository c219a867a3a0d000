"""Image-space evaluation metrics: SSIM and mask IoU.

Depth error metrics live in depthtools; this module re-exports them so the
reporting layer has a single import point.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .depthtools import DepthMetrics, depth_metrics  # noqa: F401  (re-export)


@dataclass(frozen=True)
class SsimConfig:
    """Windowed-SSIM constants on [0, 1] data (the original parameterization)."""

    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def window_1d(self):
        """Normalized 1-D Gaussian taps (the 2-D window is their outer product)."""
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("SSIM constants k1, k2 must be > 0")
        half = (self.window_size - 1) / 2.0
        coords = np.arange(self.window_size) - half
        g = np.exp(-(coords ** 2) / (2.0 * self.sigma ** 2))
        return g / g.sum()

    def window(self):
        """Normalized 2-D Gaussian window (weights sum to 1)."""
        g = self.window_1d()
        return np.outer(g, g)


DEFAULT_SSIM = SsimConfig()


def _windowed(channel, taps):
    """Valid-region windowed means: separable correlation, border cropped."""
    m = taps.shape[0] // 2
    full = ndimage.correlate1d(channel, taps, axis=0, mode="constant", cval=0.0)
    full = ndimage.correlate1d(full, taps, axis=1, mode="constant", cval=0.0)
    return full[m:channel.shape[0] - m, m:channel.shape[1] - m]


def ssim(a, b, cfg=DEFAULT_SSIM):
    """Mean structural similarity between two RGB images.

    The standard luminance/contrast/structure product is evaluated per
    channel over every valid 11x11 window position and averaged across
    positions and channels.  Identical inputs score exactly 1.0.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"ssim: image dims differ: {a.data.shape} vs {b.data.shape}")
    h, w = a.data.shape[:2]
    if h < cfg.window_size or w < cfg.window_size:
        raise ValueError(
            f"ssim: images must be at least {cfg.window_size}x{cfg.window_size}, got {w}x{h}"
        )
    win = cfg.window_1d()
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    total = 0.0
    for ch in range(3):
        x = a.data[:, :, ch]
        y = b.data[:, :, ch]
        mu_x = _windowed(x, win)
        mu_y = _windowed(y, win)
        var_x = _windowed(x * x, win) - mu_x * mu_x
        var_y = _windowed(y * y, win) - mu_y * mu_y
        cov = _windowed(x * y, win) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        total += float(np.mean(num / den))
    return total / 3.0


def iou(a, b):
    """Intersection over union of two masks; 1.0 when both are empty."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"iou: mask dims differ: {a.data.shape} vs {b.data.shape}")
    union = int(np.logical_or(a.data, b.data).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a.data, b.data).sum())
    return inter / union

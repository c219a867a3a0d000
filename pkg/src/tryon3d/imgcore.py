"""Planar image containers and bit-exact file I/O.

All raster data lives in numpy arrays indexed ``[row, col]`` (y first), with
``x`` running along columns and ``y`` along rows.  Pixel values are normalized
scalars: RGB channels in [0, 1], depths in world units, masks as booleans.
Containers are immutable after construction (the backing array is marked
read-only), so they are safe to share across threads.

File formats:
  * PNG for images, masks, and label maps (8-bit; 16-bit grayscale accepted
    on load).
  * PFM (``Pf`` header, 32-bit little-endian floats, bottom-to-top rows) for
    depth maps.
"""

import numpy as np
from PIL import Image, UnidentifiedImageError

#: Valid segmentation labels: 0 background, 1 hair, 2 face, 3 upper-clothes,
#: 4 left-arm, 5 right-arm, 6 lower-body, 7 torso-skin, 8 shoes.
LABELS = tuple(range(9))
LABEL_BACKGROUND = 0
LABEL_HAIR = 1
LABEL_FACE = 2
LABEL_UPPER_CLOTHES = 3
LABEL_LEFT_ARM = 4
LABEL_RIGHT_ARM = 5
LABEL_LOWER_BODY = 6
LABEL_TORSO_SKIN = 7
LABEL_SHOES = 8


def _freeze(arr):
    if not arr.flags.c_contiguous or not arr.flags.owndata:
        arr = np.ascontiguousarray(arr).copy()
    arr.setflags(write=False)
    return arr


class RgbImage:
    """3-channel color image, values in [0, 1], shape (height, width, 3)."""

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"RgbImage needs (H, W, 3) data, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("RgbImage values must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("RgbImage values must lie in [0, 1]")
        self.data = _freeze(data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"RgbImage({self.width}x{self.height})"


class GrayImage:
    """Single-channel scalar field, shape (height, width).

    Values are unbounded (gradient fields) but must be finite; intensity
    images use [0, 1] by convention.
    """

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"GrayImage needs (H, W) data, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("GrayImage values must be finite")
        self.data = _freeze(data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class DepthMap:
    """Scalar depth field in normalized world units, shape (height, width).

    The sentinel value 0 marks pixels outside the person region.
    """

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"DepthMap needs (H, W) data, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("DepthMap values must be finite")
        self.data = _freeze(data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"DepthMap({self.width}x{self.height})"


class MaskImage:
    """Boolean mask, shape (height, width)."""

    def __init__(self, data):
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError(f"MaskImage needs (H, W) data, got {data.shape}")
        self.data = _freeze(data.astype(bool))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def count(self):
        return int(self.data.sum())

    def __repr__(self):
        return f"MaskImage({self.width}x{self.height}, {self.count()} set)"


class LabelMap:
    """Per-pixel small-integer segmentation labels, shape (height, width)."""

    def __init__(self, data):
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError(f"LabelMap needs (H, W) data, got {data.shape}")
        data = data.astype(np.uint8)
        if data.max(initial=0) > max(LABELS):
            raise ValueError(
                f"LabelMap values must lie in {list(LABELS)}, got max {data.max()}"
            )
        self.data = _freeze(data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def mask_for(self, labels):
        """Boolean mask of pixels whose label is in ``labels``."""
        return MaskImage(np.isin(self.data, list(labels)))

    def __repr__(self):
        return f"LabelMap({self.width}x{self.height})"


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------

def load_image(path):
    """Load an 8- or 16-bit PNG as an RgbImage with channels scaled to [0, 1].

    Grayscale files are replicated to three channels; an alpha channel, if
    present, is dropped.
    """
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValueError(f"malformed PNG: {path}: {exc}") from exc
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
        data = np.repeat(arr[:, :, None], 3, axis=2)
    elif img.mode in ("1", "L", "P", "RGB", "RGBA", "LA"):
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        data = arr
    else:
        raise ValueError(f"unsupported PNG bit depth/mode {img.mode!r}: {path}")
    return RgbImage(np.clip(data, 0.0, 1.0))


def save_image(image, path):
    """Write an RgbImage as an 8-bit RGB PNG (inverse of load_image)."""
    bytes8 = np.rint(image.data * 255.0).astype(np.uint8)
    Image.fromarray(bytes8, mode="RGB").save(path, format="PNG")


def load_gray(path):
    """Load a single-channel PNG as a GrayImage in [0, 1]."""
    rgb = load_image(path)
    return GrayImage(rgb.data[:, :, 0])


def save_gray(gray, path):
    """Write a GrayImage (values clamped to [0, 1]) as an 8-bit PNG."""
    bytes8 = np.rint(np.clip(gray.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(bytes8, mode="L").save(path, format="PNG")


def load_mask(path):
    """Load an 8-bit PNG as a MaskImage (any nonzero byte is True)."""
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValueError(f"malformed PNG: {path}: {exc}") from exc
    arr = np.asarray(img.convert("L"))
    return MaskImage(arr > 0)


def save_mask(mask, path):
    """Write a MaskImage as an 8-bit PNG with values 0/255."""
    bytes8 = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(bytes8, mode="L").save(path, format="PNG")


def load_labels(path):
    """Load an 8-bit PNG whose raw byte values are segmentation labels."""
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValueError(f"malformed PNG: {path}: {exc}") from exc
    if img.mode != "L":
        raise ValueError(f"label maps must be 8-bit single-channel PNG: {path}")
    return LabelMap(np.asarray(img))


def save_labels(labels, path):
    """Write a LabelMap as an 8-bit PNG storing raw label values."""
    Image.fromarray(labels.data, mode="L").save(path, format="PNG")


# ---------------------------------------------------------------------------
# PFM depth I/O
# ---------------------------------------------------------------------------

def load_depth(path):
    """Load a single-channel little-endian PFM file as a DepthMap.

    Raises ValueError on a bad magic string, malformed header, or non-finite
    values in the payload.
    """
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise ValueError(f"bad PFM magic {magic!r} in {path} (expected 'Pf')")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise ValueError(f"malformed PFM dimension line in {path}")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise ValueError(f"malformed PFM dimension line in {path}") from exc
        if width < 1 or height < 1:
            raise ValueError(f"invalid PFM dimensions {width}x{height} in {path}")
        scale = float(fh.readline().strip())
        if scale >= 0:
            raise ValueError(f"big-endian PFM not supported (scale {scale}) in {path}")
        payload = fh.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise ValueError(f"truncated PFM payload in {path}")
    flat = np.frombuffer(payload, dtype="<f4")
    if not np.all(np.isfinite(flat)):
        raise ValueError(f"non-finite depth values in {path}")
    # PFM stores rows bottom-to-top.
    rows = flat.reshape(height, width)[::-1]
    return DepthMap(rows.astype(np.float64))


def save_depth(depth, path):
    """Write a DepthMap as little-endian float32 PFM.

    Round trips are bit-exact at float32 precision.
    """
    as32 = depth.data.astype("<f4")
    if not np.all(np.isfinite(as32)):
        raise ValueError("cannot save non-finite depth values")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{depth.width} {depth.height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(as32[::-1].tobytes())


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_bilinear_grid(data, xs, ys):
    """Bilinearly sample array ``data`` at continuous pixel coords (vectorized).

    ``data`` is (H, W) or (H, W, C); ``xs``/``ys`` are broadcastable float
    arrays.  Out-of-bounds coordinates use replicate padding.  Returns an
    array shaped like ``xs`` (plus a trailing channel axis for 3-D data).
    """
    h, w = data.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    x1i = np.clip(x0i + 1, 0, w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    y1i = np.clip(y0i + 1, 0, h - 1)
    # Clamp fractions so samples beyond the edge replicate the border pixel.
    fx = np.clip(np.where(x0 < 0, 0.0, np.where(x0 > w - 1, 1.0, fx)), 0.0, 1.0)
    fy = np.clip(np.where(y0 < 0, 0.0, np.where(y0 > h - 1, 1.0, fy)), 0.0, 1.0)
    if data.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = data[y0i, x0i]
    v01 = data[y0i, x1i]
    v10 = data[y1i, x0i]
    v11 = data[y1i, x1i]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def sample_nearest_grid(data, xs, ys):
    """Nearest-neighbor companion of sample_bilinear_grid (replicate padding)."""
    h, w = data.shape[:2]
    xi = np.clip(np.floor(np.asarray(xs) + 0.5).astype(np.int64), 0, w - 1)
    yi = np.clip(np.floor(np.asarray(ys) + 0.5).astype(np.int64), 0, h - 1)
    return data[yi, xi]


def bilinear_sample(image, x, y):
    """Sample one continuous pixel location from an image container.

    Exact at integer coordinates, linear in between, replicate padding
    outside.  Returns a float for single-channel inputs and a (3,) vector
    for RgbImage.
    """
    data = image.data if hasattr(image, "data") else np.asarray(image)
    out = sample_bilinear_grid(data, np.float64(x), np.float64(y))
    if np.ndim(out) == 0:
        return float(out)
    return out


def to_gray(image):
    """Luminance of an RgbImage: 0.299 R + 0.587 G + 0.114 B."""
    r, g, b = image.data[:, :, 0], image.data[:, :, 1], image.data[:, :, 2]
    return GrayImage(0.299 * r + 0.587 * g + 0.114 * b)

"""Image and depth-map containers with file I/O, resizing, and normalization.

Images are held as float64 arrays normalized to [0, 1]; all synthesis
math happens in that space and 8-bit quantization occurs only when a
file is written.  Depth maps are unitless non-negative fields — the
scattering coefficient is interpreted relative to whatever units the
depth file carries, and :func:`normalize_depth` is the knob for
standardizing them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import InvariantViolation, IOFailure, UsageError

RAW_DEPTH_MAGIC = b"DAHZ"
RAW_DEPTH_VERSION = 1


@dataclass(frozen=True)
class Image:
    """An H×W×3 raster with float64 samples in [0, 1].

    Immutable after construction; the backing array is marked
    read-only so instances can be shared freely across workers.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvariantViolation(
                f"image data must have shape (height, width, 3), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("image samples must be finite")
        if float(arr.min(initial=0.0)) < 0.0 or float(arr.max(initial=0.0)) > 1.0:
            raise InvariantViolation("image samples must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3


@dataclass(frozen=True)
class DepthMap:
    """An H×W field of finite, non-negative float64 depth values."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise InvariantViolation(
                f"depth data must have shape (height, width), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvariantViolation("depth values must be finite")
        if float(arr.min(initial=0.0)) < 0.0:
            raise InvariantViolation("depth values must be non-negative")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def load_image(path) -> Image:
    """Load an 8-bit RGB PNG and map samples linearly to [0, 1].

    Missing files, undecodable streams, and unsupported color models
    are reported as distinct errors.

    Parameters
    ----------
    path : path-like
        Location of the PNG file.

    Returns
    -------
    Image
        Samples are pixel values divided by 255.
    """
    p = Path(path)
    if not p.is_file():
        raise IOFailure(f"image file not found: {p}")
    try:
        with PILImage.open(p) as im:
            im.load()
            mode = im.mode
            if mode != "RGB":
                raise IOFailure(
                    f"unsupported color model {mode!r} in {p} (expected 8-bit RGB)"
                )
            arr = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError:
        raise IOFailure(f"not a decodable image stream: {p}") from None
    except IOFailure:
        raise
    except OSError as exc:
        raise IOFailure(f"corrupt image stream: {p}: {exc}") from None
    return Image(arr / 255.0)


def save_image(img: Image, path) -> None:
    """Quantize an image to 8-bit RGB and write it as a PNG.

    Quantization rounds to the nearest code, so a load of the saved
    file differs from ``img`` by at most one 8-bit step per sample.
    """
    p = Path(path)
    arr = np.rint(img.data * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(arr, mode="RGB").save(p, format="PNG")
    except OSError as exc:
        raise IOFailure(f"cannot write image file: {p}: {exc}") from None


def _load_raw_depth(blob: bytes, path: Path) -> DepthMap:
    header = struct.calcsize("<4sHII")
    if len(blob) < header:
        raise IOFailure(f"truncated depth header: {path}")
    magic, version, width, height = struct.unpack_from("<4sHII", blob, 0)
    if magic != RAW_DEPTH_MAGIC:
        raise IOFailure(f"bad depth magic {magic!r}: {path}")
    if version != RAW_DEPTH_VERSION:
        raise IOFailure(f"unsupported depth format version {version}: {path}")
    count = width * height
    payload = blob[header:]
    if len(payload) < 4 * count:
        raise IOFailure(
            f"truncated depth payload: {path} "
            f"(expected {4 * count} bytes, found {len(payload)})"
        )
    values = np.frombuffer(payload, dtype="<f4", count=count).astype(np.float64)
    if not np.all(np.isfinite(values)) or (count and float(values.min()) < 0.0):
        raise IOFailure(f"negative or non-finite depth values: {path}")
    return DepthMap(values.reshape(height, width))


def load_depth(path, scale: float | None = None) -> DepthMap:
    """Load a depth map from the raw container or a 16-bit gray PNG.

    Raw files (magic ``DAHZ``) carry their values directly.  16-bit
    grayscale PNGs require an explicit ``scale``: the full-scale code
    65535 maps to ``scale`` and 0 maps to 0.  No unit guessing.

    Parameters
    ----------
    path : path-like
        Depth file location.
    scale : float, optional
        Linear scale for 16-bit PNG input.  Ignored for raw files.

    Returns
    -------
    DepthMap
    """
    p = Path(path)
    if not p.is_file():
        raise IOFailure(f"depth file not found: {p}")
    blob = p.read_bytes()
    if blob[:4] == RAW_DEPTH_MAGIC:
        return _load_raw_depth(blob, p)
    try:
        with PILImage.open(p) as im:
            im.load()
            mode = im.mode
            if mode not in ("I;16", "I"):
                raise IOFailure(
                    f"unsupported depth color model {mode!r} in {p} "
                    "(expected 16-bit grayscale PNG or raw DAHZ)"
                )
            arr = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError:
        raise IOFailure(f"not a decodable depth file: {p}") from None
    except IOFailure:
        raise
    except OSError as exc:
        raise IOFailure(f"corrupt depth stream: {p}: {exc}") from None
    if scale is None:
        raise UsageError(
            "16-bit grayscale depth import requires an explicit scale "
            "(value 65535 maps to the scale; units are never guessed)"
        )
    if not np.isfinite(scale) or scale <= 0:
        raise UsageError(f"depth scale must be a positive finite number, got {scale}")
    return DepthMap(arr / 65535.0 * scale)


def save_depth(dm: DepthMap, path) -> None:
    """Write a depth map in the raw container format.

    Layout: magic ``DAHZ``, u16 LE version (1), u32 LE width, u32 LE
    height, then width·height IEEE-754 32-bit LE floats in row-major
    order.  Values are stored at 32-bit precision.
    """
    p = Path(path)
    header = struct.pack("<4sHII", RAW_DEPTH_MAGIC, RAW_DEPTH_VERSION, dm.width, dm.height)
    try:
        p.write_bytes(header + dm.data.astype("<f4").tobytes())
    except OSError as exc:
        raise IOFailure(f"cannot write depth file: {p}: {exc}") from None


def resize_bilinear(dm: DepthMap, width: int, height: int) -> DepthMap:
    """Resample a depth map to (width, height) with bilinear weights.

    Sampling is center-aligned: output sample ``i`` maps to source
    coordinate ``(i + 0.5) * src / dst - 0.5``, clamped to the valid
    range.  Outputs are convex combinations of inputs, so the result
    never leaves the input's [min, max] interval.
    """
    if width < 1 or height < 1:
        raise UsageError(f"target dimensions must be >= 1, got {width}x{height}")
    if (width, height) == (dm.width, dm.height):
        return DepthMap(dm.data.copy())
    src = dm.data
    sh, sw = src.shape

    xs = np.clip((np.arange(width) + 0.5) * (sw / width) - 0.5, 0.0, sw - 1.0)
    ys = np.clip((np.arange(height) + 0.5) * (sh / height) - 0.5, 0.0, sh - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]

    out = (
        src[np.ix_(y0, x0)] * (1.0 - fx) * (1.0 - fy)
        + src[np.ix_(y0, x1)] * fx * (1.0 - fy)
        + src[np.ix_(y1, x0)] * (1.0 - fx) * fy
        + src[np.ix_(y1, x1)] * fx * fy
    )
    # Guard the convexity bound against last-ulp rounding.
    out = np.clip(out, float(src.min()), float(src.max()))
    return DepthMap(out)


def normalize_depth(dm: DepthMap, d_max: float) -> DepthMap:
    """Rescale a depth map linearly so its maximum equals ``d_max``.

    Zero depths stay exactly zero, maximal entries land exactly on
    ``d_max``, and a map already at ``d_max`` is returned unchanged —
    which makes the operation exactly idempotent.
    """
    if not np.isfinite(d_max) or d_max <= 0:
        raise UsageError(f"d_max must be a positive finite number, got {d_max}")
    peak = float(dm.data.max(initial=0.0))
    if peak <= 0.0:
        raise UsageError("all-zero depth map cannot be normalized")
    if peak == d_max:
        return DepthMap(dm.data.copy())
    scaled = np.minimum(dm.data * (d_max / peak), d_max)
    scaled[dm.data == peak] = d_max
    return DepthMap(scaled)


def diff_image(a: Image, b: Image) -> Image:
    """Per-sample absolute difference |a - b|, clamped to [0, 1].

    Symmetric by construction: diff(a, b) equals diff(b, a) sample for
    sample.
    """
    if a.data.shape != b.data.shape:
        raise UsageError(
            f"dimension mismatch: {a.data.shape} vs {b.data.shape}"
        )
    return Image(np.clip(np.abs(a.data - b.data), 0.0, 1.0))

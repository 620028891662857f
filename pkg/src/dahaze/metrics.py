"""Full-reference image quality metrics and multi-set aggregation.

PSNR and SSIM are computed in normalized [0, 1] space.  SSIM follows
the canonical settings of its reference formulation: an 11×11 Gaussian
window with sigma 1.5, constants C1 = 0.01² and C2 = 0.03², evaluated
on the luma plane 0.299 R + 0.587 G + 0.114 B over valid window
positions.

The discrepancy of a collection of per-set mean PSNRs is their
population variance (1/n): low discrepancy means a restoration method
performs consistently across differently-generated test sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import IOFailure, UsageError
from .imaging import Image, load_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class SetResult:
    """Aggregated metrics for one (restored, ground-truth) set.

    ``mean_psnr`` averages the finite per-pair values only; pairs whose
    PSNR is infinite (bit-identical content) are counted separately in
    ``infinite_psnr_count``.  If every pair is infinite, ``mean_psnr``
    is the infinity sentinel.
    """

    set_name: str
    mean_psnr: float
    mean_ssim: float
    count: int
    infinite_psnr_count: int = 0


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio, 10·log10(1/MSE), in dB.

    Returns positive infinity when the images are identical (MSE = 0);
    the sentinel serializes as ``inf``.
    """
    if a.data.shape != b.data.shape:
        raise UsageError(f"dimension mismatch: {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _local_means(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    views = sliding_window_view(plane, window.shape)
    return np.einsum("ijpq,pq->ij", views, window)


def ssim(a: Image, b: Image) -> float:
    """Mean local structural similarity over valid window positions.

    Result lies in [-1, 1]; identical images score exactly 1.
    """
    if a.data.shape != b.data.shape:
        raise UsageError(f"dimension mismatch: {a.data.shape} vs {b.data.shape}")
    if min(a.height, a.width) < SSIM_WINDOW:
        raise UsageError(
            f"image {a.width}x{a.height} is smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    x = a.data @ _LUMA_WEIGHTS
    y = b.data @ _LUMA_WEIGHTS
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    mu_x = _local_means(x, w)
    mu_y = _local_means(y, w)
    xx = _local_means(x * x, w)
    yy = _local_means(y * y, w)
    xy = _local_means(x * y, w)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y

    num = (2.0 * (mu_x * mu_y) + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def evaluate_set(restored_dir, gt_dir, set_name: str | None = None) -> SetResult:
    """Average PSNR/SSIM over filename-matched pairs of two directories.

    Pairs are PNG files present (by name) in both directories,
    processed in sorted order so the aggregation is reproducible.
    """
    rd = Path(restored_dir)
    gd = Path(gt_dir)
    if not rd.is_dir():
        raise IOFailure(f"restored directory not found: {rd}")
    if not gd.is_dir():
        raise IOFailure(f"ground-truth directory not found: {gd}")
    restored_names = {f.name for f in rd.iterdir() if f.suffix.lower() == ".png"}
    gt_names = {f.name for f in gd.iterdir() if f.suffix.lower() == ".png"}
    names = sorted(restored_names & gt_names)
    if not names:
        raise IOFailure(
            f"no matching image filenames between {rd} and {gd}"
        )

    psnr_values: list[float] = []
    ssim_values: list[float] = []
    infinite = 0
    for name in names:
        restored = load_image(rd / name)
        gt = load_image(gd / name)
        p = psnr(restored, gt)
        if math.isinf(p):
            infinite += 1
        else:
            psnr_values.append(p)
        ssim_values.append(ssim(restored, gt))

    mean_psnr = math.fsum(psnr_values) / len(psnr_values) if psnr_values else math.inf
    mean_ssim = math.fsum(ssim_values) / len(ssim_values)
    return SetResult(
        set_name=set_name if set_name is not None else rd.name,
        mean_psnr=mean_psnr,
        mean_ssim=mean_ssim,
        count=len(names),
        infinite_psnr_count=infinite,
    )


def discrepancy(set_means: list[float]) -> float:
    """Population variance (1/n) of per-set mean PSNRs, in dB².

    Translation-invariant and quadratic under scaling; zero when all
    sets agree.  Requires at least two finite set means.
    """
    if len(set_means) < 2:
        raise UsageError("discrepancy needs at least 2 set means")
    values = [float(v) for v in set_means]
    if not all(math.isfinite(v) for v in values):
        raise UsageError("discrepancy needs finite set means")
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values) / len(values)


def format_report(results: list[SetResult], with_discrepancy: bool = True) -> str:
    """Render set results in the tab-separated report format.

    One line per set — ``<set_name>\\tpsnr=<dB>\\tssim=<val>\\tcount=<n>``
    — followed by a final ``discrepancy=<dB²>`` line when two or more
    sets were evaluated.  Infinite PSNR prints as ``inf``.
    """
    lines = []
    for r in results:
        p = "inf" if math.isinf(r.mean_psnr) else repr(r.mean_psnr)
        lines.append(
            f"{r.set_name}\tpsnr={p}\tssim={r.mean_ssim!r}\tcount={r.count}"
        )
    if with_discrepancy and len(results) >= 2:
        var = discrepancy([r.mean_psnr for r in results])
        lines.append(f"discrepancy={var!r}")
    return "\n".join(lines) + "\n"

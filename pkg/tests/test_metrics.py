import math

import numpy as np
import pytest
from PIL import Image as PILImage

from dahaze.errors import IOFailure, UsageError
from dahaze.imaging import Image
from dahaze.metrics import discrepancy, evaluate_set, format_report, psnr, ssim
from dahaze.rng import Xoshiro256StarStar

# Mean-PSNR pairs and their published population-variance discrepancies.
DISCREPANCY_TABLE = [
    ((38.94, 32.74), 9.61),
    ((34.23, 35.82), 0.63),
    ((35.92, 37.19), 0.40),
    ((36.37, 37.52), 0.33),
    ((36.44, 31.67), 5.69),
    ((32.30, 33.52), 0.37),
    ((33.84, 34.80), 0.23),
    ((34.24, 35.11), 0.19),
]


def _const(v, size=16):
    return Image(np.full((size, size, 3), v))


def test_psnr_analytic_values():
    # uniform difference 0.1 -> MSE 0.01 -> 20 dB; 0.01 -> 40 dB
    assert psnr(_const(0.0), _const(0.1)) == pytest.approx(20.0, abs=1e-9)
    assert psnr(_const(0.0), _const(0.01)) == pytest.approx(40.0, abs=1e-9)
    assert math.isinf(psnr(_const(0.3), _const(0.3)))
    with pytest.raises(UsageError):
        psnr(_const(0.1), _const(0.1, size=8))


def test_psnr_properties():
    rng = Xoshiro256StarStar(5)
    a = Image(np.array([rng.random() for _ in range(16 * 16 * 3)]).reshape(16, 16, 3))
    b = Image(np.array([rng.random() for _ in range(16 * 16 * 3)]).reshape(16, 16, 3))
    assert psnr(a, b) == psnr(b, a)
    # shifting both images by the same constant leaves PSNR unchanged
    shifted_a = Image(np.clip(a.data * 0.5 + 0.2, 0, 1))
    shifted_b = Image(np.clip(b.data * 0.5 + 0.2, 0, 1))
    base = psnr(Image(a.data * 0.5), Image(b.data * 0.5))
    assert psnr(shifted_a, shifted_b) == pytest.approx(base, rel=1e-12)


def test_ssim_self_and_symmetry():
    rng = Xoshiro256StarStar(6)
    a = Image(np.array([rng.random() for _ in range(24 * 24 * 3)]).reshape(24, 24, 3))
    assert ssim(a, a) == 1.0
    inv = Image(1.0 - a.data)
    assert ssim(a, inv) < 1.0
    assert ssim(a, inv) == ssim(inv, a)
    assert -1.0 <= ssim(a, inv) <= 1.0


def test_ssim_constant_images_analytic():
    # zero variance everywhere: SSIM reduces to the luminance term
    # (2*0.5*0.6 + 1e-4) / (0.25 + 0.36 + 1e-4) = 0.6001/0.6101
    v = ssim(_const(0.5), _const(0.6))
    assert v == pytest.approx(0.6001 / 0.6101, abs=1e-9)


def test_ssim_window_size_guard():
    small = Image(np.zeros((8, 8, 3)))
    with pytest.raises(UsageError, match="window"):
        ssim(small, small)


def test_evaluate_set(tmp_path):
    rdir = tmp_path / "restored"
    gdir = tmp_path / "gt"
    rdir.mkdir()
    gdir.mkdir()

    # pair 1: difference 26/255 everywhere; pair 2: 3/255 everywhere
    for name, delta in (("a.png", 26), ("b.png", 3)):
        gt = np.full((16, 16, 3), 100, dtype=np.uint8)
        restored = gt + np.uint8(delta)
        PILImage.fromarray(gt, mode="RGB").save(gdir / name)
        PILImage.fromarray(restored, mode="RGB").save(rdir / name)

    result = evaluate_set(rdir, gdir)
    expected = (20 * math.log10(255 / 26) + 20 * math.log10(255 / 3)) / 2
    assert result.count == 2
    assert result.mean_psnr == pytest.approx(expected, abs=1e-9)
    assert result.infinite_psnr_count == 0
    assert result.set_name == "restored"


def test_evaluate_set_identical_pair(tmp_path):
    rdir = tmp_path / "restored"
    gdir = tmp_path / "gt"
    rdir.mkdir()
    gdir.mkdir()
    img = np.full((16, 16, 3), 55, dtype=np.uint8)
    PILImage.fromarray(img, mode="RGB").save(rdir / "x.png")
    PILImage.fromarray(img, mode="RGB").save(gdir / "x.png")
    result = evaluate_set(rdir, gdir)
    assert result.count == 1
    assert result.infinite_psnr_count == 1
    assert math.isinf(result.mean_psnr)
    assert result.mean_ssim == 1.0


def test_evaluate_set_requires_matching_names(tmp_path):
    rdir = tmp_path / "restored"
    gdir = tmp_path / "gt"
    rdir.mkdir()
    gdir.mkdir()
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    PILImage.fromarray(img, mode="RGB").save(rdir / "only-here.png")
    PILImage.fromarray(img, mode="RGB").save(gdir / "only-there.png")
    with pytest.raises(IOFailure, match="no matching"):
        evaluate_set(rdir, gdir)


def test_discrepancy_reproduces_published_values():
    for pair, expected in DISCREPANCY_TABLE:
        assert discrepancy(list(pair)) == pytest.approx(expected, abs=0.01), pair


def test_discrepancy_properties():
    assert discrepancy([31.5, 31.5]) == 0.0
    base = discrepancy([30.0, 32.0, 35.0])
    assert discrepancy([40.0, 42.0, 45.0]) == pytest.approx(base, abs=1e-12)
    assert discrepancy([60.0, 64.0, 70.0]) == pytest.approx(4 * base, rel=1e-12)
    with pytest.raises(UsageError):
        discrepancy([30.0])
    with pytest.raises(UsageError):
        discrepancy([30.0, math.inf])


def test_format_report_shape(tmp_path):
    from dahaze.metrics import SetResult

    results = [
        SetResult("setA", 38.94, 0.99, 10),
        SetResult("setB", 32.74, 0.97, 10),
    ]
    text = format_report(results)
    lines = text.strip().split("\n")
    assert lines[0].startswith("setA\tpsnr=38.94\tssim=")
    assert lines[0].endswith("count=10")
    assert lines[-1].startswith("discrepancy=")
    assert float(lines[-1].split("=")[1]) == pytest.approx(9.6100, abs=1e-9)

    solo = format_report([results[0]])
    assert "discrepancy" not in solo

    inf_result = SetResult("setC", math.inf, 1.0, 2, infinite_psnr_count=2)
    assert "psnr=inf" in format_report([inf_result])

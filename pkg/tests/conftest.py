import numpy as np
import pytest
from PIL import Image as PILImage

from dahaze.imaging import DepthMap, normalize_depth, resize_bilinear, save_depth
from dahaze.rng import Xoshiro256StarStar


def smooth_depth(seed, size=32, coarse=8, d_max=10.0):
    """A smooth random depth field: coarse noise upsampled bilinearly.

    Smooth fields make aligned haze-density/depth correlations strong
    while two independent fields stay nearly uncorrelated.
    """
    rng = Xoshiro256StarStar(seed)
    base = np.array([rng.random() for _ in range(coarse * coarse)])
    dm = resize_bilinear(DepthMap(base.reshape(coarse, coarse)), size, size)
    return normalize_depth(dm, d_max)


def random_image_u8(seed, size=32):
    rng = Xoshiro256StarStar(seed)
    flat = np.array([rng.randbelow(256) for _ in range(size * size * 3)], dtype=np.uint8)
    return flat.reshape(size, size, 3)


def write_corpus(root, count, size=32, seed=0):
    """Write a clear/depth corpus with matching stems; returns the two dirs."""
    clear_dir = root / "clear"
    depth_dir = root / "depth"
    clear_dir.mkdir(parents=True, exist_ok=True)
    depth_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        name = f"scene{i:03d}"
        img = random_image_u8(seed * 1000 + i, size)
        PILImage.fromarray(img, mode="RGB").save(clear_dir / f"{name}.png")
        save_depth(smooth_depth(seed * 1000 + 500 + i, size), depth_dir / f"{name}.dahz")
    return clear_dir, depth_dir


def read_dir_bytes(directory, suffix=".png"):
    return {
        f.name: f.read_bytes()
        for f in directory.iterdir()
        if f.suffix == suffix
    }


@pytest.fixture
def corpus(tmp_path):
    return write_corpus(tmp_path, 6, size=24, seed=3)

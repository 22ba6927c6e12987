import numpy as np
import pytest
from PIL import Image


def _structured_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth gradient + colored blobs; enough structure to learn from."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.stack(
        [
            0.5 + 0.5 * np.sin(2 * np.pi * (xx + rng.uniform())),
            yy,
            0.5 + 0.5 * np.cos(2 * np.pi * (yy + xx + rng.uniform())),
        ],
        axis=2,
    )
    cy, cx, r = rng.uniform(0.2, 0.8, 3)
    blob = ((yy - cy) ** 2 + (xx - cx) ** 2) < (0.1 + 0.2 * r) ** 2
    img[blob] = rng.uniform(0, 1, 3)
    return (img * 255).astype(np.uint8)


def write_images(root, count: int, size: int, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    for i in range(count):
        Image.fromarray(_structured_image(rng, size)).save(root / f"img_{i:03d}.png")


@pytest.fixture(scope="session")
def image_dir_64(tmp_path_factory):
    """8 structured 64x64 RGB images."""
    root = tmp_path_factory.mktemp("imgs64")
    write_images(root, 8, 64)
    return root


@pytest.fixture(scope="session")
def image_dir_32(tmp_path_factory):
    """64 structured 32x32 RGB images."""
    root = tmp_path_factory.mktemp("imgs32")
    write_images(root, 64, 32)
    return root

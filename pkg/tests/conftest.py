import io

import numpy as np
import pytest
from PIL import Image

from slidescore.imaging import SlideImage


def make_image(pixels) -> SlideImage:
    return SlideImage(np.asarray(pixels, dtype=np.float64))


def solid(height, width, rgb=(1.0, 1.0, 1.0)) -> SlideImage:
    px = np.tile(np.asarray(rgb, dtype=np.float64), (height, width, 1))
    return SlideImage(px)


def half_split(height=100, width=100, left=(0, 0, 0), right=(1, 1, 1)) -> SlideImage:
    px = np.tile(np.asarray(left, dtype=np.float64), (height, width, 1))
    px[:, width // 2:] = np.asarray(right, dtype=np.float64)
    return SlideImage(px)


def encode_png(img: SlideImage) -> bytes:
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def encode(img: SlideImage, fmt: str) -> bytes:
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format=fmt)
    return buf.getvalue()


def tidy_slide(rng, width=320, height=240) -> np.ndarray:
    """Clean synthetic slide: white canvas, dark title bar, body text lines."""
    px = np.ones((height, width, 3))
    y0 = int(rng.integers(10, 20))
    title_h = int(rng.integers(10, 16))
    x0 = int(rng.integers(16, 32))
    x1 = width - int(rng.integers(16, 48))
    px[y0:y0 + title_h, x0:x1] = float(rng.uniform(0.10, 0.25))
    y = y0 + title_h + int(rng.integers(14, 22))
    while y < height - 20:
        line_h = int(rng.integers(4, 7))
        x_end = int(rng.integers(width // 2, width - 24))
        px[y:y + line_h, 24:x_end] = float(rng.uniform(0.25, 0.45))
        y += line_h + int(rng.integers(8, 14))
    if rng.random() < 0.4:
        ay = int(rng.integers(height // 2, height - 40))
        ax = int(rng.integers(width // 2, width - 60))
        px[ay:ay + 24, ax:ax + 40] = [0.85, 0.88, 0.95]
    return px


def cluttered_slide(base: np.ndarray, rng) -> np.ndarray:
    """Corrupt a slide with random color blocks and salt-and-pepper noise."""
    px = base.copy()
    height, width = px.shape[:2]
    for _ in range(int(rng.integers(4, 8))):
        bw = int(rng.integers(30, 90))
        bh = int(rng.integers(20, 70))
        x = int(rng.integers(0, width - bw))
        y = int(rng.integers(0, height - bh))
        px[y:y + bh, x:x + bw] = rng.uniform(0.0, 1.0, size=3)
    mask = rng.random((height, width)) < 0.06
    px[mask] = rng.integers(0, 2, size=(int(mask.sum()), 1)).astype(float)
    return px


def write_deck(directory, images, prefix="slide"):
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(images):
        if isinstance(img, np.ndarray):
            img = SlideImage(img)
        path = directory / f"{prefix}-{i:03d}.png"
        path.write_bytes(encode_png(img))
        paths.append(path)
    return paths


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

import numpy as np
import pytest

from slidescore.errors import MalformedImage, UnsupportedFormat
from slidescore.imaging import (
    METRIC_NAMES,
    MetricVector,
    SlideImage,
    brightness_contrast,
    color_harmony,
    colorfulness,
    compute_metrics,
    decode_image,
    edge_density,
    layout_balance,
    luminance_map,
    normalize_size,
    text_density,
    whitespace,
)

from conftest import encode, encode_png, half_split, make_image, solid


# --- decoding -------------------------------------------------------------

def test_decode_single_white_pixel():
    img = decode_image(encode_png(solid(1, 1)))
    assert img.width == 1 and img.height == 1
    assert img.pixels[0, 0].tolist() == [1.0, 1.0, 1.0]


def test_decode_endpoint_mapping():
    px = np.zeros((1, 2, 3))
    px[0, 1] = [1.0, 0.0, 0.0]
    img = decode_image(encode_png(make_image(px)))
    assert img.pixels[0, 0].tolist() == [0.0, 0.0, 0.0]
    assert img.pixels[0, 1].tolist() == [1.0, 0.0, 0.0]


def test_decode_jpeg_roundtrip():
    img = decode_image(encode(solid(8, 8, (0.5, 0.5, 0.5)), "JPEG"))
    assert img.width == 8 and img.height == 8


def test_decode_truncated_stream_is_malformed():
    data = encode_png(solid(32, 32))
    with pytest.raises(MalformedImage):
        decode_image(data[:20])
    with pytest.raises(MalformedImage):
        decode_image(b"not an image at all")


def test_decode_rejects_other_containers():
    for fmt in ("GIF", "BMP"):
        with pytest.raises(UnsupportedFormat):
            decode_image(encode(solid(4, 4), fmt))


# --- normalize_size -------------------------------------------------------

def test_normalize_size_below_cap_unchanged():
    img = solid(600, 800)
    out = normalize_size(img)
    assert out is img


def test_normalize_size_exact_halving():
    out = normalize_size(solid(1024, 2048))
    assert (out.width, out.height) == (1024, 512)


def test_normalize_size_rounds_short_side():
    # round(1000 * 1024 / 3000) = 341
    out = normalize_size(solid(1000, 3000))
    assert (out.width, out.height) == (1024, 341)


def test_normalize_size_idempotent(rng):
    img = make_image(rng.uniform(size=(900, 2200, 3)))
    once = normalize_size(img)
    twice = normalize_size(once)
    assert twice is once


# --- luminance ------------------------------------------------------------

def test_luminance_endpoints():
    assert luminance_map(solid(1, 1))[0, 0] == 1.0
    assert luminance_map(solid(1, 1, (1.0, 0.0, 0.0)))[0, 0] == 0.299
    assert luminance_map(solid(1, 1, (0.5, 0.5, 0.5)))[0, 0] == 0.5


# --- whitespace -----------------------------------------------------------

def test_whitespace_all_white():
    assert whitespace(solid(20, 30)) == 1.0


def test_whitespace_half_and_half():
    assert whitespace(half_split()) == 0.5


def test_whitespace_all_black_dark_theme():
    assert whitespace(solid(20, 30, (0.0, 0.0, 0.0))) == 1.0


# --- text density ---------------------------------------------------------

def test_text_density_blank():
    assert text_density(solid(50, 50)) == 0.0


def test_text_density_giant_block_filtered():
    px = np.ones((200, 200, 3))
    px[20:180, 20:180] = 0.0
    assert text_density(make_image(px)) == 0.0


def _comb_bar(canvas=1000, bar_w=100, bar_h=10):
    # Text-like bar: vertical teeth joined by a baseline; fill ratio 0.55.
    px = np.ones((canvas, canvas, 3))
    y0 = (canvas - bar_h) // 2
    x0 = (canvas - bar_w) // 2
    for dy in range(bar_h):
        for dx in range(bar_w):
            if dy == bar_h - 1 or dx % 2 == 0:
                px[y0 + dy, x0 + dx] = 0.0
    return make_image(px)


def test_text_density_text_like_bar():
    # One 100x10 text-like component on a 1000x1000 canvas: union of kept
    # bboxes is 1000 px out of 10^6.
    assert text_density(_comb_bar()) == pytest.approx(0.001, abs=1e-12)


# --- colorfulness ---------------------------------------------------------

def test_colorfulness_grayscale_exactly_zero(rng):
    gray = rng.uniform(size=(50, 50))
    img = make_image(np.repeat(gray[:, :, None], 3, axis=2))
    assert colorfulness(img) == 0.0


def test_colorfulness_uniform_red():
    # sigma = 0; mu_rg = 255, mu_yb = 127.5 -> 0.3 * sqrt(255^2 + 127.5^2) / 150
    expected = 0.3 * np.sqrt(255.0**2 + 127.5**2) / 150.0
    assert colorfulness(solid(10, 10, (1.0, 0.0, 0.0))) == pytest.approx(expected, abs=1e-12)
    assert round(colorfulness(solid(10, 10, (1.0, 0.0, 0.0))), 3) == 0.570


def test_colorfulness_red_green_clipped():
    img = half_split(10, 10, left=(1, 0, 0), right=(0, 1, 0))
    assert colorfulness(img) == 1.0


# --- color harmony --------------------------------------------------------

def test_color_harmony_grayscale_is_one(rng):
    gray = rng.uniform(size=(30, 30))
    img = make_image(np.repeat(gray[:, :, None], 3, axis=2))
    assert color_harmony(img) == 1.0


def test_color_harmony_single_hue():
    assert color_harmony(solid(10, 10, (0.0, 1.0, 0.0))) == 1.0


def test_color_harmony_opposed_hues():
    img = half_split(10, 10, left=(1, 0, 0), right=(0, 1, 1))
    assert color_harmony(img) == 1.0


def test_color_harmony_many_hues_below_one(rng):
    hsv_like = rng.uniform(size=(64, 64, 3))
    img = make_image(hsv_like)
    assert 0.0 < color_harmony(img) < 1.0


# --- edge density ---------------------------------------------------------

def test_edge_density_uniform_zero():
    assert edge_density(solid(64, 64, (0.3, 0.5, 0.7))) == 0.0


def test_edge_density_half_split_single_column():
    # One surviving edge column (borders excluded): 98 / 10^4 pixels.
    # Frozen from direct pipeline evaluation with the stated kernels.
    value = edge_density(half_split(100, 100))
    assert value == pytest.approx(0.0098, abs=1e-12)
    assert value == pytest.approx(0.01, abs=2.5e-3)


def test_edge_density_noise_exceeds_step_edge(rng):
    noise = make_image(rng.uniform(size=(100, 100, 3)))
    assert edge_density(noise) > edge_density(half_split(100, 100))


# --- brightness contrast --------------------------------------------------

def test_brightness_contrast_uniform_zero():
    assert brightness_contrast(solid(16, 16, (0.42, 0.42, 0.42))) == 0.0


def test_brightness_contrast_half_split_exact_one():
    assert brightness_contrast(half_split()) == 1.0


def test_brightness_contrast_quarter_levels():
    px = np.full((40, 40, 3), 0.25)
    px[:, 20:] = 0.75
    assert brightness_contrast(make_image(px)) == 0.5


def test_brightness_contrast_luminance_inversion(rng):
    gray = rng.uniform(size=(32, 32))
    img = make_image(np.repeat(gray[:, :, None], 3, axis=2))
    inv = make_image(np.repeat((1.0 - gray)[:, :, None], 3, axis=2))
    assert brightness_contrast(img) == pytest.approx(brightness_contrast(inv), abs=1e-12)


# --- layout balance -------------------------------------------------------

def test_layout_balance_blank():
    assert layout_balance(solid(40, 40)) == 1.0


def test_layout_balance_centered_block():
    px = np.ones((51, 51, 3))
    px[24:27, 24:27] = 0.0
    assert layout_balance(make_image(px)) == 1.0


def test_layout_balance_corner_pixel_near_zero():
    px = np.ones((50, 50, 3))
    px[0, 0] = 0.0
    # Maximal offset up to the half-pixel quantization of the ink center.
    step = 1.0 / np.hypot(25.0, 25.0)
    assert 0.0 <= layout_balance(make_image(px)) <= step


# --- composition ----------------------------------------------------------

def test_compute_metrics_all_white_canonical_order():
    mv = compute_metrics(solid(60, 80))
    assert mv.as_array().tolist() == [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]
    assert METRIC_NAMES == (
        "whitespace",
        "text_density",
        "colorfulness",
        "color_harmony",
        "edge_density",
        "brightness_contrast",
        "layout_balance",
    )


def test_compute_metrics_half_split_composition():
    mv = compute_metrics(half_split())
    assert mv.whitespace == 0.5
    assert mv.brightness_contrast == 1.0
    assert mv.colorfulness == 0.0


def test_all_metrics_in_unit_range_fuzz(rng):
    shapes = [(1, 1), (1, 7), (9, 1), (2, 2), (37, 53), (64, 64)]
    for i, (h, w) in enumerate(shapes * 3):
        px = rng.uniform(size=(h, w, 3))
        if i % 3 == 1:
            px = np.round(px)  # binary extremes
        if i % 3 == 2:
            px = np.repeat(px[:, :, :1], 3, axis=2)  # grayscale
        values = compute_metrics(make_image(px)).as_array()
        assert np.all(values >= 0.0) and np.all(values <= 1.0), (h, w, values)


def test_compute_metrics_deterministic(rng):
    data = encode_png(make_image(rng.uniform(size=(48, 64, 3))))
    first = compute_metrics(decode_image(data)).as_array()
    second = compute_metrics(decode_image(data)).as_array()
    assert first.tolist() == second.tolist()


def test_metric_vector_array_roundtrip():
    mv = MetricVector(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    assert MetricVector.from_array(mv.as_array()) == mv
    with pytest.raises(ValueError):
        MetricVector.from_array([0.1, 0.2])


# --- flip invariance ------------------------------------------------------

def _flipped(img: SlideImage) -> SlideImage:
    return SlideImage(img.pixels[:, ::-1].copy())


def test_flip_invariant_metrics_exact(rng):
    images = [
        make_image(rng.uniform(size=(64, 96, 3))),
        half_split(100, 100),
        make_image(np.round(rng.uniform(size=(33, 47, 3)))),
    ]
    for img in images:
        mirror = _flipped(img)
        assert whitespace(img) == whitespace(mirror)
        assert colorfulness(img) == colorfulness(mirror)
        assert brightness_contrast(img) == brightness_contrast(mirror)
        assert edge_density(img) == edge_density(mirror)
        assert color_harmony(img) == color_harmony(mirror)


def test_flip_invariance_for_symmetric_ink():
    px = np.ones((60, 81, 3))
    px[20:30, 30:51] = 0.0  # centered block, mirror-symmetric
    img = make_image(px)
    mirror = _flipped(img)
    assert layout_balance(img) == pytest.approx(layout_balance(mirror), abs=1e-12)
    assert text_density(img) == pytest.approx(text_density(mirror), abs=1e-12)

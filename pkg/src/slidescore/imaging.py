"""Slide raster decoding and the seven design-cue metrics.

Every metric maps an RGB raster to a score in [0, 1] where a higher value
always means more of the named property, never "better" or "worse". All
operations are pure functions of their input: identical bytes in, bit
identical scores out.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import MalformedImage, UnsupportedFormat

# Metric raster is capped for runtime stability; embeddings use their own
# 224 px thumbnail and are unaffected by this cap.
MAX_RASTER_DIM = 1024

# Rec.601 luma weights, kept as integer thousandths so endpoint inputs
# (pure black/white/gray) produce exact luminance values.
LUMA_WEIGHTS = (299.0, 587.0, 114.0)
LUMA_DIVISOR = 1000.0

# Background detection: luminance histogram mode with a fixed tolerance band.
BACKGROUND_BINS = 64
BACKGROUND_TOL = 0.08

# Text-like connected components: bbox height as a fraction of image height,
# bbox aspect ratio (w/h), and foreground fill ratio inside the bbox.
TEXT_HEIGHT_FRAC = (0.005, 0.08)
TEXT_ASPECT = (0.1, 15.0)
TEXT_FILL = (0.1, 0.95)

# Hasler-Suesstrunk colorfulness, normalized by its empirical ceiling.
COLORFULNESS_SCALE = 150.0

# Hue harmony: histogram resolution and the chromatic-pixel gate.
HUE_BINS = 36
CHROMA_MIN_SAT = 0.2
CHROMA_MIN_VAL = 0.15

# Harmonic hue templates as (arc center offset, arc width) in degrees. The
# rotation search slides each template around the wheel in 10-degree steps.
HARMONY_TEMPLATES = {
    "i": ((0.0, 18.0),),
    "V": ((0.0, 93.6),),
    "I": ((0.0, 18.0), (180.0, 18.0)),
    "T": ((0.0, 180.0),),
    "Y": ((0.0, 93.6), (180.0, 18.0)),
    "X": ((0.0, 93.6), (180.0, 93.6)),
}

# Edge detection parameters: blur width, and hysteresis thresholds relative
# to the peak gradient magnitude.
CANNY_SIGMA = 1.4
CANNY_HIGH_FRAC = 0.2
CANNY_LOW_FRAC = 0.5

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])

METRIC_NAMES = (
    "whitespace",
    "text_density",
    "colorfulness",
    "color_harmony",
    "edge_density",
    "brightness_contrast",
    "layout_balance",
)


@dataclass(frozen=True)
class SlideImage:
    """Decoded RGB raster: shape (height, width, 3), channels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("pixels must be an array of shape (height, width, 3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.float64:
            raise ValueError("pixels must be float64")
        if float(px.min()) < 0.0 or float(px.max()) > 1.0:
            raise ValueError("channel values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class MetricVector:
    """The seven design-cue scores in canonical order, each in [0, 1]."""

    whitespace: float
    text_density: float
    colorfulness: float
    color_harmony: float
    edge_density: float
    brightness_contrast: float
    layout_balance: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in METRIC_NAMES])

    @classmethod
    def from_array(cls, values) -> "MetricVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(METRIC_NAMES),):
            raise ValueError("expected exactly seven metric values")
        return cls(*(float(v) for v in values))


def decode_image(data: bytes) -> SlideImage:
    """Decode a PNG or JPEG byte stream into a SlideImage.

    8-bit channels map to [0, 1] as v/255. Any other container type raises
    UnsupportedFormat; undecodable streams raise MalformedImage.
    """
    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise MalformedImage("could not identify image stream") from exc
    except OSError as exc:
        raise MalformedImage(str(exc)) from exc
    if img.format not in ("PNG", "JPEG"):
        raise UnsupportedFormat(f"unsupported container: {img.format}")
    try:
        img = img.convert("RGB")
        img.load()
    except OSError as exc:
        raise MalformedImage(f"truncated or corrupt stream: {exc}") from exc
    pixels = np.asarray(img, dtype=np.float64) / 255.0
    return SlideImage(pixels)


def _resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resample with half-pixel center alignment."""
    src_h, src_w = pixels.shape[:2]
    if (src_h, src_w) == (out_h, out_w):
        return pixels.copy()

    def axis(n_out, n_src):
        pos = (np.arange(n_out) + 0.5) * (n_src / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    ylo, yhi, wy = axis(out_h, src_h)
    xlo, xhi, wx = axis(out_w, src_w)
    rows = pixels[ylo] * (1.0 - wy)[:, None, None] + pixels[yhi] * wy[:, None, None]
    out = rows[:, xlo] * (1.0 - wx)[None, :, None] + rows[:, xhi] * wx[None, :, None]
    return out


def normalize_size(img: SlideImage) -> SlideImage:
    """Cap the raster at MAX_RASTER_DIM on its longest side.

    Larger images are bilinearly downscaled with the aspect ratio preserved
    (short side rounded); smaller images pass through unchanged, which makes
    the operation idempotent.
    """
    longest = max(img.width, img.height)
    if longest <= MAX_RASTER_DIM:
        return img
    scale = MAX_RASTER_DIM / longest
    out_w = MAX_RASTER_DIM if img.width == longest else int(round(img.width * scale))
    out_h = MAX_RASTER_DIM if img.height == longest else int(round(img.height * scale))
    out_w = max(out_w, 1)
    out_h = max(out_h, 1)
    resized = np.clip(_resize_bilinear(img.pixels, out_h, out_w), 0.0, 1.0)
    return SlideImage(resized)


def luminance_map(img: SlideImage) -> np.ndarray:
    """Per-pixel Rec.601 luminance Y = 0.299 R + 0.587 G + 0.114 B."""
    r, g, b = LUMA_WEIGHTS
    px = img.pixels
    return (r * px[:, :, 0] + g * px[:, :, 1] + b * px[:, :, 2]) / LUMA_DIVISOR


def _background(luma: np.ndarray) -> tuple[np.ndarray, float]:
    """Locate the dominant background luminance.

    Returns the mask of pixels within BACKGROUND_TOL of the modal histogram
    bin center, plus that center. Histogram ties break toward the brighter
    bin so light and dark themes behave symmetrically.
    """
    counts, _ = np.histogram(luma, bins=BACKGROUND_BINS, range=(0.0, 1.0))
    mode = BACKGROUND_BINS - 1 - int(np.argmax(counts[::-1]))
    center = (mode + 0.5) / BACKGROUND_BINS
    mask = np.abs(luma - center) <= BACKGROUND_TOL
    return mask, center


def _exact_mean_var(values: np.ndarray) -> tuple[float, float]:
    """Population mean and variance via exact summation.

    fsum is correctly rounded, so the result depends only on the pixel
    multiset, not on traversal order; that is what makes the moment-based
    metrics exactly invariant under image mirroring.
    """
    flat = values.ravel().tolist()
    mean = math.fsum(flat) / len(flat)
    var = math.fsum((v - mean) ** 2 for v in flat) / len(flat)
    return mean, var


def whitespace(img: SlideImage) -> float:
    """Fraction of pixels at the dominant background luminance.

    Theme agnostic: an all-black slide is just as "empty" as an all-white
    one, so both score 1.0.
    """
    mask, _ = _background(luminance_map(img))
    return float(mask.mean())


def _otsu_threshold(values: np.ndarray, bins: int = 256) -> float | None:
    """Otsu threshold over [0, 1]; None when there is nothing to separate."""
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    p = counts / values.size
    centers = (edges[:-1] + edges[1:]) / 2.0
    omega = np.cumsum(p)
    mu = np.cumsum(p * centers)
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b2 = np.where(denom > 0.0, (mu_t * omega - mu) ** 2 / denom, 0.0)
    if not np.any(sigma_b2 > 0.0):
        return None
    k = int(np.argmax(sigma_b2))
    return float(edges[k + 1])


def text_density(img: SlideImage) -> float:
    """Fraction of the canvas covered by text-like component boxes.

    Foreground is the Otsu split of |Y - background|; 8-connected components
    survive when their bbox height, aspect ratio, and fill ratio fall in the
    text-shaped ranges, and the union area of surviving bboxes is reported.
    No OCR is involved.
    """
    luma = luminance_map(img)
    _, bg_center = _background(luma)
    distance = np.abs(luma - bg_center)
    threshold = _otsu_threshold(distance)
    if threshold is None:
        return 0.0
    foreground = distance > threshold
    if not foreground.any():
        return 0.0

    labels, count = ndimage.label(foreground, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return 0.0
    h, w = luma.shape
    min_h = TEXT_HEIGHT_FRAC[0] * h
    max_h = TEXT_HEIGHT_FRAC[1] * h
    areas = ndimage.sum_labels(foreground, labels, index=np.arange(1, count + 1))
    union = np.zeros((h, w), dtype=bool)
    for idx, slc in enumerate(ndimage.find_objects(labels)):
        if slc is None:
            continue
        box_h = slc[0].stop - slc[0].start
        box_w = slc[1].stop - slc[1].start
        if not (min_h <= box_h <= max_h):
            continue
        aspect = box_w / box_h
        if not (TEXT_ASPECT[0] <= aspect <= TEXT_ASPECT[1]):
            continue
        fill = areas[idx] / (box_h * box_w)
        if not (TEXT_FILL[0] <= fill <= TEXT_FILL[1]):
            continue
        union[slc] = True
    return float(union.sum() / (h * w))


def colorfulness(img: SlideImage) -> float:
    """Hasler-Suesstrunk colorfulness on 8-bit-scaled channels, clipped to [0, 1].

    M = sqrt(var(rg) + var(yb)) + 0.3 sqrt(mean(rg)^2 + mean(yb)^2) with
    rg = R - G and yb = (R + G)/2 - B; the score is M / 150 clipped. Exactly
    zero iff R = G = B at every pixel.
    """
    px = img.pixels * 255.0
    rg = px[:, :, 0] - px[:, :, 1]
    yb = 0.5 * (px[:, :, 0] + px[:, :, 1]) - px[:, :, 2]
    rg_mean, rg_var = _exact_mean_var(rg)
    yb_mean, yb_var = _exact_mean_var(yb)
    sigma = math.sqrt(rg_var + yb_var)
    mu = math.sqrt(rg_mean**2 + yb_mean**2)
    return float(np.clip((sigma + 0.3 * mu) / COLORFULNESS_SCALE, 0.0, 1.0))


def _rgb_to_hsv(px: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB -> (hue degrees, saturation, value)."""
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    cmax = px.max(axis=2)
    cmin = px.min(axis=2)
    delta = cmax - cmin
    hue = np.zeros_like(cmax)
    nz = delta > 0.0
    rmax = nz & (cmax == r)
    gmax = nz & ~rmax & (cmax == g)
    bmax = nz & ~rmax & ~gmax
    with np.errstate(divide="ignore", invalid="ignore"):
        hue[rmax] = (60.0 * (g[rmax] - b[rmax]) / delta[rmax]) % 360.0
        hue[gmax] = 60.0 * (b[gmax] - r[gmax]) / delta[gmax] + 120.0
        hue[bmax] = 60.0 * (r[bmax] - g[bmax]) / delta[bmax] + 240.0
        sat = np.where(cmax > 0.0, delta / np.where(cmax > 0.0, cmax, 1.0), 0.0)
    return hue, sat, cmax


def _template_coverage() -> dict[str, np.ndarray]:
    """Boolean bin-offset coverage for each harmonic template."""
    offsets = np.arange(HUE_BINS) * (360.0 / HUE_BINS)
    coverage = {}
    for name, arcs in HARMONY_TEMPLATES.items():
        covered = np.zeros(HUE_BINS, dtype=bool)
        for arc_center, width in arcs:
            diff = np.abs(offsets - arc_center)
            dist = np.minimum(diff, 360.0 - diff)
            covered |= dist <= width / 2.0
        coverage[name] = covered
    return coverage


_TEMPLATE_COVERAGE = _template_coverage()


def color_harmony(img: SlideImage) -> float:
    """Best harmonic-template fit of the chromatic hue distribution.

    Chromatic pixels (S >= 0.2, V >= 0.15) are binned into a 36-bin hue
    histogram weighted by S*V; the score is the largest mass fraction any
    template captures over all 36 rotations. Achromatic images carry no
    chromatic mass and count as fully harmonious.
    """
    hue, sat, val = _rgb_to_hsv(img.pixels)
    chromatic = (sat >= CHROMA_MIN_SAT) & (val >= CHROMA_MIN_VAL)
    if not chromatic.any():
        return 1.0
    weights = (sat * val)[chromatic]
    bins = np.minimum((hue[chromatic] / (360.0 / HUE_BINS)).astype(np.intp), HUE_BINS - 1)
    # Exact per-bin sums keep the histogram independent of pixel order.
    order = np.argsort(bins, kind="stable")
    sorted_bins = bins[order]
    sorted_weights = weights[order].tolist()
    bounds = np.searchsorted(sorted_bins, np.arange(HUE_BINS + 1))
    mass = np.zeros(HUE_BINS)
    for b in range(HUE_BINS):
        lo, hi = int(bounds[b]), int(bounds[b + 1])
        if hi > lo:
            mass[b] = math.fsum(sorted_weights[lo:hi])
    total = math.fsum(mass.tolist())
    if total <= 0.0:
        return 1.0
    best = 0.0
    for covered in _TEMPLATE_COVERAGE.values():
        for rot in range(HUE_BINS):
            inside = float(mass[np.roll(covered, rot)].sum())
            if inside > best:
                best = inside
    return float(min(best / total, 1.0))


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin gradient ridges to local maxima along the gradient direction.

    A pixel survives when its magnitude is >= both directional neighbors;
    the symmetric comparison keeps the survivor count exactly invariant
    under image mirroring. Border pixels never survive.
    """
    keep = np.zeros_like(mag, dtype=bool)
    if mag.shape[0] < 3 or mag.shape[1] < 3:
        return keep
    c = mag[1:-1, 1:-1]
    left, right = mag[1:-1, :-2], mag[1:-1, 2:]
    up, down = mag[:-2, 1:-1], mag[2:, 1:-1]
    ul, dr = mag[:-2, :-2], mag[2:, 2:]
    ur, dl = mag[:-2, 2:], mag[2:, :-2]

    angle = np.degrees(np.arctan2(gy[1:-1, 1:-1], gx[1:-1, 1:-1])) % 180.0
    horiz = (angle < 22.5) | (angle >= 157.5)
    diag1 = (angle >= 22.5) & (angle < 67.5)
    vert = (angle >= 67.5) & (angle < 112.5)

    n1 = np.where(horiz, left, np.where(diag1, ul, np.where(vert, up, ur)))
    n2 = np.where(horiz, right, np.where(diag1, dr, np.where(vert, down, dl)))
    keep[1:-1, 1:-1] = (c > 0.0) & (c >= n1) & (c >= n2)
    return keep


def _gaussian_kernel5(sigma: float) -> np.ndarray:
    ax = np.arange(-2.0, 3.0)
    kernel = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def edge_density(img: SlideImage) -> float:
    """Fraction of pixels on Canny edges of the luminance map.

    Pipeline: 5x5 Gaussian blur (sigma 1.4), Sobel gradients, non-maximum
    suppression, hysteresis at high = 0.2 * peak magnitude and low = half
    of high. A proxy for visual clutter.
    """
    luma = luminance_map(img)
    blurred = ndimage.convolve(luma, _gaussian_kernel5(CANNY_SIGMA), mode="reflect")
    gx = ndimage.convolve(blurred, _SOBEL_X, mode="reflect")
    gy = ndimage.convolve(blurred, _SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak < 1e-12:
        # Numerically flat image: relative thresholds would promote
        # floating-point dust to edges.
        return 0.0
    ridge = _nonmax_suppress(mag, gx, gy)
    high = CANNY_HIGH_FRAC * peak
    low = CANNY_LOW_FRAC * high
    candidates = ridge & (mag >= low)
    strong = ridge & (mag >= high)
    if not strong.any():
        return 0.0
    labels, count = ndimage.label(candidates, structure=np.ones((3, 3), dtype=int))
    anchored = np.zeros(count + 1, dtype=bool)
    anchored[labels[strong]] = True
    anchored[0] = False
    edges = anchored[labels]
    return float(edges.sum() / mag.size)


def brightness_contrast(img: SlideImage) -> float:
    """RMS luminance contrast: 2 * population stddev of Y, clipped to [0, 1].

    The factor 2 makes the half-black/half-white extreme reach exactly 1.
    Invariant under luminance inversion.
    """
    _, var = _exact_mean_var(luminance_map(img))
    return float(np.clip(2.0 * math.sqrt(var), 0.0, 1.0))


def layout_balance(img: SlideImage) -> float:
    """How centered the ink mass sits on the canvas.

    Ink is the complement of the background-luminance pixel set; the score
    is 1 minus the center-of-mass offset normalized by the center-to-corner
    distance. A blank slide balances perfectly by convention.
    """
    luma = luminance_map(img)
    mask, _ = _background(luma)
    ink = ~mask
    if not ink.any():
        return 1.0
    ys, xs = np.nonzero(ink)
    com_x = xs.mean() + 0.5
    com_y = ys.mean() + 0.5
    cx = img.width / 2.0
    cy = img.height / 2.0
    offset = float(np.hypot(com_x - cx, com_y - cy))
    corner = float(np.hypot(cx, cy))
    return float(1.0 - offset / corner)


def compute_metrics(img: SlideImage) -> MetricVector:
    """All seven metrics on one size-normalized raster, in canonical order."""
    img = normalize_size(img)
    return MetricVector(
        whitespace=whitespace(img),
        text_density=text_density(img),
        colorfulness=colorfulness(img),
        color_harmony=color_harmony(img),
        edge_density=edge_density(img),
        brightness_contrast=brightness_contrast(img),
        layout_balance=layout_balance(img),
    )

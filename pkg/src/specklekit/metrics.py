"""Quality metrics for despeckling results.

Two families live here. Reference metrics (PSNR, SSIM) compare against a
clean image and only make sense on synthetic experiments. No-reference
metrics (ENL, EPI, EPD-ROA, SQI, mean intensity) compare the filtered image
against the observed noisy one, or inspect it alone, and work on real data.

EPI, EPD-ROA and SQI have no universally agreed formulas, so the definitions
below are fixed by this package and calibrated by their identity cases: each
scores exactly 1.0 when the filtered image equals the noisy input. Absolute
values are comparable across runs of this toolkit, not across publications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .errors import ConfigError, DomainError
from .raster import Raster

__all__ = [
    "RegionSpec",
    "MetricReport",
    "parse_region_file",
    "psnr",
    "ssim",
    "enl",
    "epi",
    "epd_roa",
    "sqi",
    "mean_intensity",
]

PSNR_CAP_DB = 99.0
ENL_MIN_AREA = 64
SQI_TILE = 8
RATIO_FLOOR = 1e-6

_LAPLACIAN = np.array(
    [[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]]
)


@dataclass(frozen=True)
class RegionSpec:
    """Rectangles of interest, each given as (row, col, height, width)."""

    rectangles: list[tuple[int, int, int, int]]


@dataclass
class MetricReport:
    """Bundle of metric values; fields stay ``None`` when not evaluated."""

    psnr: float | None = None
    ssim: float | None = None
    enl: float | None = None
    epi: float | None = None
    epd_h: float | None = None
    epd_v: float | None = None
    sqi: float | None = None
    mean_intensity: float | None = None

    def to_dict(self) -> dict:
        """Serialize present fields, adding SSIM on the 0-100 scale."""
        data: dict = {}
        if self.psnr is not None:
            data["psnr"] = self.psnr
        if self.ssim is not None:
            data["ssim"] = self.ssim
            data["ssim_pct"] = 100.0 * self.ssim
        for key in ("enl", "epi", "epd_h", "epd_v", "sqi", "mean_intensity"):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        return data


def _image(obj) -> np.ndarray:
    if isinstance(obj, Raster):
        return obj.data
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError("expected a 2-D image")
    return arr


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x, y = _image(a), _image(b)
    if x.shape != y.shape:
        raise DomainError(f"image dimensions differ: {x.shape} vs {y.shape}")
    return x, y


def parse_region_file(path) -> RegionSpec:
    """Read rectangles from a text file, one ``row col height width`` line
    each, with ``#`` starting a comment. Raises ConfigError naming the
    offending line on any malformed entry, and when no rectangle remains."""
    rectangles = []
    text = Path(path).read_text()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise ConfigError(
                f"line {number}: expected 4 fields (row col height width), "
                f"got {len(tokens)}"
            )
        try:
            row, col, height, width = (int(t) for t in tokens)
        except ValueError:
            raise ConfigError(f"line {number}: fields must be integers") from None
        if row < 0 or col < 0:
            raise ConfigError(f"line {number}: row and col must be non-negative")
        if height <= 0 or width <= 0:
            raise ConfigError(f"line {number}: height and width must be positive")
        rectangles.append((row, col, height, width))
    if not rectangles:
        raise ConfigError(f"no rectangles found in {path}")
    return RegionSpec(rectangles)


def psnr(ref, test, peak: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99.0.

    When ``peak`` is omitted it defaults to the maximum over both images,
    which keeps the metric symmetric in its arguments.
    """
    x, y = _pair(ref, test)
    if peak is None:
        peak = float(max(x.max(), y.max()))
    if peak <= 0:
        raise DomainError("peak must be positive")
    diff = x - y
    mse = float((diff * diff).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak * peak / mse), PSNR_CAP_DB)


def _ssim_window() -> np.ndarray:
    offsets = np.arange(11) - 5.0
    profile = np.exp(-(offsets**2) / (2.0 * 1.5**2))
    window = np.outer(profile, profile)
    return window / window.sum()


def ssim(ref, test, dynamic_range: float | None = None) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local statistics are weighted by the window and evaluated only where the
    window fits entirely inside the image, so both sides must be at least 11
    pixels. Stabilizers use K1 = 0.01 and K2 = 0.03 of the dynamic range,
    which defaults to the maximum over both images.
    """
    x, y = _pair(ref, test)
    if min(x.shape) < 11:
        raise DomainError("images must be at least 11 pixels on each side")
    if dynamic_range is None:
        dynamic_range = float(max(x.max(), y.max()))
    if dynamic_range <= 0:
        raise DomainError("dynamic range must be positive; pass one explicitly")

    window = _ssim_window()
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mx = convolve2d(x, window, mode="valid")
    my = convolve2d(y, window, mode="valid")
    vx = convolve2d(x * x, window, mode="valid") - mx * mx
    vy = convolve2d(y * y, window, mode="valid") - my * my
    cxy = convolve2d(x * y, window, mode="valid") - mx * my
    scores = ((2 * mx * my + c1) * (2 * cxy + c2)) / (
        (mx * mx + my * my + c1) * (vx + vy + c2)
    )
    return float(scores.mean())


def _region_pixels(img: np.ndarray, region: RegionSpec | None) -> np.ndarray:
    if region is None:
        return img.ravel()
    if not region.rectangles:
        raise DomainError("region holds no rectangles")
    height, width = img.shape
    blocks = []
    for row, col, h, w in region.rectangles:
        if row < 0 or col < 0 or h <= 0 or w <= 0:
            raise DomainError(f"malformed rectangle {(row, col, h, w)}")
        if row + h > height or col + w > width:
            raise DomainError(
                f"rectangle {(row, col, h, w)} exceeds image {img.shape}"
            )
        blocks.append(img[row : row + h, col : col + w].ravel())
    return np.concatenate(blocks)


def enl(img, region: RegionSpec | None = None) -> float:
    """Equivalent number of looks: mean squared over variance.

    Evaluated over the whole image by default, or over the pooled pixels of
    the supplied rectangles, which should cover homogeneous areas. At least
    64 pixels are required; a constant region returns infinity.
    """
    pixels = _region_pixels(_image(img), region)
    if pixels.size < ENL_MIN_AREA:
        raise DomainError(
            f"need at least {ENL_MIN_AREA} pixels, got {pixels.size}"
        )
    mean = float(pixels.mean())
    variance = float(pixels.var())
    if variance == 0.0:
        return math.inf
    return mean * mean / variance


def _laplacian_energy(img: np.ndarray) -> float:
    return float(np.abs(convolve2d(img, _LAPLACIAN, mode="valid")).sum())


def epi(test, noisy) -> float:
    """Edge preservation index: high-pass energy kept relative to the input.

    Both images pass through a 3x3 Laplacian (borders excluded) and the
    absolute responses are summed; the score is the ratio. Two flat images
    calibrate to 1.0.
    """
    x, y = _pair(test, noisy)
    num = _laplacian_energy(x)
    den = _laplacian_energy(y)
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def epd_roa(test, noisy, direction: str) -> float:
    """Edge preservation degree from ratios of adjacent pixels.

    For every horizontally or vertically adjacent pair the ratio of the
    leading pixel to its neighbour (floored at 1e-6) is accumulated; the
    score divides the filtered sum by the noisy sum.
    """
    x, y = _pair(test, noisy)
    axis = {"h": 1, "v": 0}.get(str(direction).lower())
    if axis is None:
        raise DomainError(f"direction must be 'h' or 'v', got {direction!r}")

    def ratio_sum(img: np.ndarray) -> float:
        if axis == 1:
            lead, adj = img[:, :-1], img[:, 1:]
        else:
            lead, adj = img[:-1, :], img[1:, :]
        return float(np.abs(lead / np.maximum(adj, RATIO_FLOOR)).sum())

    num = ratio_sum(x)
    den = ratio_sum(y)
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def sqi(test, noisy) -> float:
    """Structural quality index over non-overlapping 8x8 tiles.

    Each tile contributes a luminance-and-covariance similarity term, with a
    stabilizer scaled to the joint peak; the score is the tile mean. An
    all-zero pair scores 1.0 by convention, and images smaller than one tile
    are rejected.
    """
    x, y = _pair(test, noisy)
    rows, cols = x.shape[0] // SQI_TILE, x.shape[1] // SQI_TILE
    if rows == 0 or cols == 0:
        raise DomainError(
            f"images must contain at least one {SQI_TILE}x{SQI_TILE} tile"
        )
    peak = float(max(x.max(), y.max()))
    if peak == 0.0:
        return 1.0
    eps = (0.01 * peak) ** 2

    scores = []
    for r in range(rows):
        for c in range(cols):
            tx = x[r * SQI_TILE : (r + 1) * SQI_TILE, c * SQI_TILE : (c + 1) * SQI_TILE]
            ty = y[r * SQI_TILE : (r + 1) * SQI_TILE, c * SQI_TILE : (c + 1) * SQI_TILE]
            mx, my = float(tx.mean()), float(ty.mean())
            vx, vy = float(tx.var()), float(ty.var())
            cov = float(((tx - mx) * (ty - my)).mean())
            scores.append(
                (2 * mx * my + eps)
                * (2 * cov + eps)
                / ((mx * mx + my * my + eps) * (vx + vy + eps))
            )
    return float(np.mean(scores))


def mean_intensity(img) -> float:
    """Arithmetic mean of all pixels."""
    return float(_image(img).mean())

"""Log and power transforms that turn multiplicative speckle into roughly
additive Gaussian noise, plus automatic shape-parameter selection.

The chain is: take the logarithm (multiplicative noise becomes additive),
then apply the Yeo-Johnson power transform with a shape parameter chosen to
minimize the squared skewness plus squared excess kurtosis of the result.
Both steps invert exactly, which is what makes the round trip usable inside
a denoising pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError
from .raster import Raster


@dataclass(frozen=True)
class MomentStats:
    """First four standardized sample moments."""

    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


def log_forward(y: Raster, epsilon: float) -> Raster:
    """Elementwise ln(y + epsilon); epsilon guards zero-valued pixels."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if y.kind != "intensity":
        raise DomainError("log_forward expects an intensity raster")
    return Raster(np.log(y.data + epsilon), kind="transformed")


def log_inverse(v: Raster, epsilon: float) -> Raster:
    """Elementwise exp(v) - epsilon, clamped at zero."""
    return Raster(np.maximum(np.exp(v.data) - epsilon, 0.0), kind="intensity")


def yeo_johnson(x, lam: float):
    """Yeo-Johnson power transform, elementwise.

    Piecewise in x with the power branch parameterized by `lam`:
    for x >= 0 it is ((x+1)^lam - 1)/lam (log1p(x) when lam is 0), and for
    x < 0 it is -((1-x)^(2-lam) - 1)/(2-lam) (-log1p(-x) when lam is 2).
    Strictly increasing and continuous in both arguments; implemented with
    expm1/log1p so values stay accurate near the branch switches.

    Accepts scalars, arrays, or a Raster (returned as a transformed Raster).
    """
    if isinstance(x, Raster):
        return Raster(yeo_johnson(x.data, lam), kind="transformed")
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    if lam == 0.0:
        out[pos] = np.log1p(arr[pos])
    else:
        out[pos] = np.expm1(lam * np.log1p(arr[pos])) / lam
    neg = ~pos
    if lam == 2.0:
        out[neg] = -np.log1p(-arr[neg])
    else:
        out[neg] = -np.expm1((2.0 - lam) * np.log1p(-arr[neg])) / (2.0 - lam)
    return out if arr.ndim else float(out)


def yeo_johnson_inverse(v, lam: float):
    """Exact algebraic inverse of `yeo_johnson`.

    For v >= 0 the inverse is (lam*v + 1)^(1/lam) - 1, and for v < 0 it is
    1 - ((lam-2)*v + 1)^(1/(2-lam)), with the matching log branches at
    lam = 0 and lam = 2. Values outside the attainable range of the forward
    transform (possible when lam < 0 or lam > 2) raise a DomainError.
    """
    if isinstance(v, Raster):
        return Raster(yeo_johnson_inverse(v.data, lam), kind="transformed")
    arr = np.asarray(v, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    if lam == 0.0:
        out[pos] = np.expm1(arr[pos])
    else:
        arg = lam * arr[pos]
        if np.any(arg <= -1.0):
            raise DomainError(
                f"value outside the attainable range for lambda={lam} "
                f"(requires v < {-1.0 / lam:.6g})"
            )
        out[pos] = np.expm1(np.log1p(arg) / lam)
    neg = ~pos
    if lam == 2.0:
        out[neg] = -np.expm1(-arr[neg])
    else:
        arg = (lam - 2.0) * arr[neg]
        if np.any(arg <= -1.0):
            raise DomainError(
                f"value outside the attainable range for lambda={lam} "
                f"(requires v > {1.0 / (2.0 - lam):.6g})"
            )
        out[neg] = -np.expm1(np.log1p(arg) / (2.0 - lam))
    return out if arr.ndim else float(out)


def moments(samples) -> MomentStats:
    """Mean, unbiased variance, and variance-normalized skewness and kurtosis."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 4:
        raise DegenerateInputError(f"moments need at least 4 samples, got {x.size}")
    mean = x.mean()
    d = x - mean
    d2 = d * d
    ss = d2.sum()
    if ss == 0.0:
        raise DegenerateInputError("zero variance sample set")
    var = ss / (x.size - 1)
    skew = (d2 * d).mean() / var**1.5
    exkurt = (d2 * d2).mean() / (var * var) - 3.0
    return MomentStats(float(mean), float(var), float(skew), float(exkurt))


def select_lambda(samples, grid) -> float:
    """Pick the transform shape that makes the samples most Gaussian.

    Evaluates J(lam) = skewness^2 + excess_kurtosis^2 of the transformed
    samples at every grid point and returns the minimizer. Exact ties are
    broken toward the value closest to 1 (the identity), then toward the
    smaller value, so the result is a deterministic function of the inputs.

    Parameters
    ----------
    samples : array_like
        At least 100 finite values; constant input raises.
    grid : array_like
        Non-empty sequence of candidate shape parameters.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise DegenerateInputError(
            f"shape selection needs at least 100 samples, got {x.size}"
        )
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise DomainError("empty search grid")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("constant sample set, shape selection undefined")

    best: tuple[float, float, float] | None = None
    for lam in grid:
        lam = float(lam)
        stats = moments(yeo_johnson(x, lam))
        j = stats.skewness**2 + stats.excess_kurtosis**2
        if not np.isfinite(j):
            continue
        key = (j, abs(lam - 1.0), lam)
        if best is None or key < best:
            best = key
    if best is None:
        raise DegenerateInputError("objective was non-finite on the whole grid")
    return best[2]

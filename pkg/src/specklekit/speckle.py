"""Multiplicative speckle simulation and per-patch noise scale estimation.

Speckle is modeled as a unit-mean gamma field: an L-look intensity image is
the clean image multiplied pixelwise by Gamma(shape=L, rate=L) noise, whose
variance is 1/L. Higher L means smoother speckle.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DomainError
from .raster import Raster

SIGMA_FLOOR = 1e-6
MAD_TO_SIGMA = 1.4826


def sample_gamma_noise(looks: float, n_samples: int, seed: int) -> np.ndarray:
    """Draw i.i.d. unit-mean gamma speckle samples.

    Parameters
    ----------
    looks : float
        Equivalent number of looks L > 0. The draws follow
        Gamma(shape=L, rate=L), so mean is 1 and variance is 1/L.
    n_samples : int
        Number of samples, at least 1.
    seed : int
        Seed for the counter-based generator; fixed seeds reproduce bit-exactly.
    """
    if looks <= 0:
        raise DomainError(f"looks must be positive, got {looks}")
    if n_samples < 1:
        raise DomainError(f"n_samples must be at least 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    return rng.gamma(shape=looks, scale=1.0 / looks, size=n_samples)


def apply_speckle(clean: Raster, looks: float, seed: int) -> Raster:
    """Multiply an intensity image by simulated L-look speckle."""
    clean.require_intensity()
    noise = sample_gamma_noise(looks, clean.data.size, seed)
    return Raster(clean.data * noise.reshape(clean.data.shape), kind="intensity")


def estimate_patch_sigma(patches: np.ndarray) -> np.ndarray:
    """Robust per-patch noise scale relative to the group's median patch.

    Each column of `patches` is one vectorized patch. The shared content is
    removed by subtracting the elementwise median patch of the group; each
    residual column is then summarized by its scaled median absolute
    deviation, floored at 1e-6 so downstream reciprocals stay finite.

    Parameters
    ----------
    patches : ndarray
        (p*p, k) matrix with k >= 2 patches as columns.

    Returns
    -------
    ndarray
        Length-k array of positive noise scales.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2:
        raise DomainError("patches must be a 2-D (pixels, k) matrix")
    if patches.shape[1] < 2:
        raise DegenerateInputError(
            f"noise scale needs at least 2 patches, got {patches.shape[1]}"
        )
    residual = patches - np.median(patches, axis=1, keepdims=True)
    center = np.median(residual, axis=0)
    sigma = MAD_TO_SIGMA * np.median(np.abs(residual - center[None, :]), axis=0)
    return np.maximum(sigma, SIGMA_FLOOR)

"""Non-local patch grouping and group-wise aggregation.

Similar patches are collected across a search window around each reference
position, stacked as columns of a matrix, processed as a group, and finally
averaged back into the image. Matching order is fully deterministic: the
reference patch always occupies the first column, and remaining candidates
sort by squared Euclidean distance with row-major position breaking ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateInputError, DomainError

__all__ = ["PatchGroup", "extract_references", "block_match", "aggregate"]


@dataclass
class PatchGroup:
    """A stack of similar patches drawn from one search window.

    ``patches`` has one raveled patch per column, so its shape is
    ``(p * p, k)``. ``coords`` holds the top-left corner of every column in
    image coordinates; when the window contains fewer than ``k`` candidates
    the reference patch is repeated and ``padded`` counts those copies.
    ``sigmas`` is filled in later by the noise estimator when per-column
    weighting is enabled.
    """

    p: int
    patches: np.ndarray
    coords: list[tuple[int, int]]
    padded: int
    sigmas: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.patches.shape[1]


def extract_references(img: np.ndarray, p: int, stride: int) -> list[tuple[int, int]]:
    """Return reference corners on a stride grid covering the whole image.

    The grid starts at the origin and advances by ``stride``; a final row and
    column of references is appended when the stride does not land exactly on
    the last valid position, so every pixel belongs to at least one reference
    patch.
    """
    height, width = img.shape
    if p < 1 or p > min(height, width):
        raise DomainError(f"patch size {p} does not fit a {height}x{width} image")
    if stride < 1:
        raise DomainError("stride must be at least 1")

    def axis_positions(limit: int) -> list[int]:
        positions = list(range(0, limit + 1, stride))
        if positions[-1] != limit:
            positions.append(limit)
        return positions

    rows = axis_positions(height - p)
    cols = axis_positions(width - p)
    return [(r, c) for r in rows for c in cols]


def block_match(
    img: np.ndarray,
    ref: tuple[int, int],
    p: int,
    k: int,
    window: int,
) -> PatchGroup:
    """Collect the ``k`` patches most similar to the reference patch.

    Candidates are every patch position inside a ``window``-sized square
    centred on the reference corner, clipped to the image. The reference is
    rank 0 by construction; the rest rank by squared distance, then by
    row-major position within the window. If fewer than ``k`` candidates
    exist, the reference is repeated to fill the group.
    """
    height, width = img.shape
    rr, cc = ref
    if p < 1 or p > min(height, width):
        raise DomainError(f"patch size {p} does not fit a {height}x{width} image")
    if k < 1:
        raise DomainError("group size must be at least 1")
    if window < p:
        raise DomainError(f"search window {window} is smaller than patch size {p}")
    if not (0 <= rr <= height - p and 0 <= cc <= width - p):
        raise DomainError(f"reference corner {ref} is out of bounds")

    half = (window - p) // 2
    r0, r1 = max(0, rr - half), min(height - p, rr + half)
    c0, c1 = max(0, cc - half), min(width - p, cc + half)
    cols_count = c1 - c0 + 1

    windows = sliding_window_view(img, (p, p))[r0 : r1 + 1, c0 : c1 + 1]
    ref_patch = img[rr : rr + p, cc : cc + p]
    diff = windows - ref_patch
    distances = (diff * diff).sum(axis=(2, 3)).ravel()

    order = np.argsort(distances, kind="stable")
    ref_flat = (rr - r0) * cols_count + (cc - c0)
    coords = [(rr, cc)]
    for flat in order:
        if len(coords) == k:
            break
        if flat == ref_flat:
            continue
        coords.append((r0 + int(flat) // cols_count, c0 + int(flat) % cols_count))

    padded = k - len(coords)
    coords.extend([(rr, cc)] * padded)

    patches = np.empty((p * p, k), dtype=np.float64)
    for j, (r, c) in enumerate(coords):
        patches[:, j] = img[r : r + p, c : c + p].ravel()
    return PatchGroup(p=p, patches=patches, coords=coords, padded=padded)


def aggregate(
    estimates: list[tuple[PatchGroup, np.ndarray]],
    shape: tuple[int, int],
    fallback: np.ndarray,
) -> tuple[np.ndarray, dict]:
    """Average overlapping patch estimates back into an image.

    Every column of every group contributes its estimate with unit weight to
    the pixels it covers; the output is the per-pixel mean. Groups are
    processed in a canonical order (sorted by reference corner) so the result
    does not depend on the order in which estimates arrive. Pixels covered by
    no patch are copied from ``fallback`` and counted in the coverage report.
    """
    pairs = sorted(estimates, key=lambda pair: pair[0].coords[0])
    if not pairs:
        raise DegenerateInputError("no patch groups to aggregate")
    fallback = np.asarray(fallback, dtype=np.float64)
    if fallback.shape != tuple(shape):
        raise DomainError("fallback image shape does not match the output shape")

    numerator = np.zeros(shape, dtype=np.float64)
    weight = np.zeros(shape, dtype=np.float64)
    for group, values in pairs:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != group.patches.shape:
            raise DomainError("estimate matrix shape does not match its group")
        p = group.p
        for j, (r, c) in enumerate(group.coords):
            numerator[r : r + p, c : c + p] += values[:, j].reshape(p, p)
            weight[r : r + p, c : c + p] += 1.0

    covered = weight > 0
    out = fallback.copy()
    out[covered] = numerator[covered] / weight[covered]

    total = int(out.size)
    uncovered = total - int(covered.sum())
    coverage = {
        "total_pixels": total,
        "covered_pixels": total - uncovered,
        "uncovered_pixels": uncovered,
        "coverage_fraction": (total - uncovered) / total,
    }
    return out, coverage

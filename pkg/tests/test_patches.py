"""Grouping and aggregation tests. Block matching is verified against a
naive exhaustive search written with plain loops, using the same tie policy:
the reference patch is always rank 0, everything else sorts by squared
distance with row-major candidate order breaking ties."""

import numpy as np
import pytest

from specklekit.errors import DegenerateInputError, DomainError
from specklekit.patches import PatchGroup, aggregate, block_match, extract_references


def brute_force_match(img, ref, p, k, window):
    """Exhaustive reference implementation of the matching contract."""
    H, W = img.shape
    rr, cc = ref
    half = (window - p) // 2
    r0, r1 = max(0, rr - half), min(H - p, rr + half)
    c0, c1 = max(0, cc - half), min(W - p, cc + half)
    ref_patch = img[rr : rr + p, cc : cc + p]
    scored = []
    index = 0
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if (r, c) != (rr, cc):
                d = 0.0
                for i in range(p):
                    for j in range(p):
                        diff = img[r + i, c + j] - ref_patch[i, j]
                        d += diff * diff
                scored.append((d, index, (r, c)))
            index += 1
    scored.sort(key=lambda t: (t[0], t[1]))
    coords = [(rr, cc)] + [t[2] for t in scored[: k - 1]]
    padded = k - len(coords)
    coords.extend([(rr, cc)] * padded)
    return coords, padded


def test_reference_grid_examples():
    img16 = np.zeros((16, 16))
    assert extract_references(img16, p=16, stride=4) == [(0, 0)]

    img20 = np.zeros((20, 20))
    assert extract_references(img20, p=16, stride=4) == [
        (0, 0),
        (0, 4),
        (4, 0),
        (4, 4),
    ]

    img256 = np.zeros((256, 256))
    refs = extract_references(img256, p=16, stride=4)
    assert len(refs) == 61 * 61
    assert refs[0] == (0, 0) and refs[-1] == (240, 240)


def test_reference_grid_includes_last_row_and_column():
    img = np.zeros((23, 30))
    refs = extract_references(img, p=8, stride=6)
    rows = sorted({r for r, _ in refs})
    cols = sorted({c for _, c in refs})
    assert rows == [0, 6, 12, 15]
    assert cols == [0, 6, 12, 18, 22]


def test_reference_grid_validates():
    with pytest.raises(DomainError):
        extract_references(np.zeros((8, 8)), p=9, stride=1)
    with pytest.raises(DomainError):
        extract_references(np.zeros((8, 8)), p=4, stride=0)


def test_block_match_reference_first_distances_sorted():
    rng = np.random.default_rng(0)
    img = rng.normal(size=(40, 40))
    group = block_match(img, ref=(12, 20), p=8, k=6, window=24)
    assert group.coords[0] == (12, 20)
    assert np.array_equal(group.patches[:, 0], img[12:20, 20:28].ravel())

    ref_col = group.patches[:, 0]
    dists = [float(((group.patches[:, j] - ref_col) ** 2).sum()) for j in range(group.k)]
    assert dists[0] == 0.0
    assert all(dists[j] <= dists[j + 1] + 1e-12 for j in range(1, group.k - 1))


def test_block_match_agrees_with_brute_force():
    rng = np.random.default_rng(42)
    for trial in range(12):
        H = int(rng.integers(12, 33))
        W = int(rng.integers(12, 33))
        p = int(rng.choice([4, 6]))
        k = int(rng.choice([3, 5, 8]))
        window = int(rng.choice([p, p + 4, 3 * p]))
        img = rng.normal(size=(H, W))
        for ref in [(0, 0), (H - p, W - p), ((H - p) // 2, (W - p) // 3)]:
            expected, exp_pad = brute_force_match(img, ref, p, k, window)
            group = block_match(img, ref, p, k, window)
            assert group.coords == expected, (trial, ref)
            assert group.padded == exp_pad


def test_block_match_constant_image_row_major_ties():
    img = np.zeros((12, 12))
    group = block_match(img, ref=(0, 0), p=4, k=5, window=12)
    # corner reference is also the row-major first candidate, so the group
    # is exactly the first k candidates in row-major order
    assert group.coords == [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)]

    interior = block_match(img, ref=(5, 5), p=4, k=4, window=8)
    assert interior.coords[0] == (5, 5)
    assert interior.coords[1:] == [(3, 3), (3, 4), (3, 5)]


def test_block_match_exact_duplicate_ranks_next():
    rng = np.random.default_rng(1)
    img = rng.uniform(size=(30, 30))
    img[20:24, 10:14] = img[2:6, 4:8]
    group = block_match(img, ref=(2, 4), p=4, k=3, window=60)
    assert group.coords[0] == (2, 4)
    assert group.coords[1] == (20, 10)


def test_block_match_pads_when_window_is_small():
    img = np.arange(64, dtype=np.float64).reshape(8, 8)
    group = block_match(img, ref=(0, 0), p=8, k=5, window=8)
    assert group.padded == 4
    assert group.coords == [(0, 0)] * 5
    assert np.all(group.patches == group.patches[:, :1])


def test_block_match_validates():
    img = np.zeros((16, 16))
    with pytest.raises(DomainError):
        block_match(img, ref=(0, 0), p=4, k=0, window=8)
    with pytest.raises(DomainError):
        block_match(img, ref=(0, 0), p=8, k=2, window=4)
    with pytest.raises(DomainError):
        block_match(img, ref=(13, 0), p=4, k=2, window=8)


def _single_patch_group(coord, patch):
    return PatchGroup(
        p=patch.shape[0],
        patches=patch.reshape(-1, 1),
        coords=[coord],
        padded=0,
    )


def test_aggregate_single_patch_pastes_verbatim():
    patch = np.arange(16, dtype=np.float64).reshape(4, 4)
    fallback = np.full((6, 6), -1.0)
    group = _single_patch_group((1, 1), patch)
    out, coverage = aggregate([(group, group.patches.copy())], (6, 6), fallback)
    assert np.array_equal(out[1:5, 1:5], patch)
    assert coverage["uncovered_pixels"] == 20
    assert out[0, 0] == -1.0


def test_aggregate_weighted_mean_arithmetic():
    fallback = np.zeros((2, 2))
    one = np.full((2, 2), 1.0)
    three = np.full((2, 2), 3.0)
    groups = [(_single_patch_group((0, 0), one), one.reshape(-1, 1))]
    groups += [(_single_patch_group((0, 0), three), three.reshape(-1, 1))] * 3
    out, _ = aggregate(groups, (2, 2), fallback)
    assert np.allclose(out, 2.5)

    dup = [(_single_patch_group((0, 0), three), three.reshape(-1, 1))] * 2
    out, _ = aggregate(dup, (2, 2), fallback)
    assert np.allclose(out, 3.0)


def test_aggregate_order_invariant():
    rng = np.random.default_rng(6)
    img = rng.normal(size=(20, 20))
    groups = []
    for ref in extract_references(img, p=4, stride=3):
        g = block_match(img, ref, p=4, k=3, window=8)
        groups.append((g, g.patches + rng.normal(size=g.patches.shape)))
    out1, cov1 = aggregate(groups, img.shape, img)
    shuffled = [groups[i] for i in rng.permutation(len(groups))]
    out2, cov2 = aggregate(shuffled, img.shape, img)
    assert np.array_equal(out1, out2)
    assert cov1 == cov2
    assert cov1["uncovered_pixels"] == 0


def test_aggregate_rejects_empty():
    with pytest.raises(DegenerateInputError):
        aggregate([], (4, 4), np.zeros((4, 4)))

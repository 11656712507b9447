import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from styleswap.compositing import (DENSE_LIMIT, SolverError, composite_swap,
                                   poisson_clone)
from styleswap.geometry import AffineTransform, invert_affine


def _smooth(rng, h, w, lo=0.2, hi=0.8):
    img = gaussian_filter(rng.uniform(size=(h, w, 3)), (2, 2, 0))
    img -= img.min()
    img /= max(img.max(), 1e-9)
    return lo + (hi - lo) * img


def _blob_mask(h, w, cy, cx, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 < r * r


def test_identity_clone_reproduces_destination():
    rng = np.random.default_rng(0)
    dst = _smooth(rng, 24, 24)
    mask = _blob_mask(24, 24, 12, 12, 7)
    out = poisson_clone(dst.copy(), dst, mask)
    assert np.abs(out - dst).max() < 1e-6


def test_unmasked_pixels_bit_identical():
    rng = np.random.default_rng(1)
    src, dst = _smooth(rng, 20, 20), _smooth(rng, 20, 20)
    mask = _blob_mask(20, 20, 10, 10, 5)
    out = poisson_clone(src, dst, mask)
    assert np.array_equal(out[~mask], dst[~mask])


def test_interior_laplacian_matches_source():
    # the defining property: inside the mask, the solution's 4-neighbour
    # laplacian equals the source laplacian (checked away from the boundary)
    rng = np.random.default_rng(2)
    src, dst = _smooth(rng, 24, 24), _smooth(rng, 24, 24)
    mask = _blob_mask(24, 24, 12, 12, 8)
    out = poisson_clone(src, dst, mask)
    interior = mask.copy()
    interior[1:-1, 1:-1] = (mask[1:-1, 1:-1] & mask[:-2, 1:-1] & mask[2:, 1:-1]
                            & mask[1:-1, :-2] & mask[1:-1, 2:])
    worst = 0.0
    for ch in range(3):
        for y in range(1, 23):
            for x in range(1, 23):
                if not interior[y, x]:
                    continue
                lap_out = (4 * out[y, x, ch] - out[y - 1, x, ch] - out[y + 1, x, ch]
                           - out[y, x - 1, ch] - out[y, x + 1, ch])
                lap_src = (4 * src[y, x, ch] - src[y - 1, x, ch] - src[y + 1, x, ch]
                           - src[y, x - 1, ch] - src[y, x + 1, ch])
                worst = max(worst, abs(lap_out - lap_src))
    assert worst < 1e-6


def test_constant_offset_fades_toward_boundary():
    rng = np.random.default_rng(3)
    dst = _smooth(rng, 24, 24)
    src = np.clip(dst + 0.1, 0.0, 1.0)  # same gradients, shifted level
    mask = _blob_mask(24, 24, 12, 12, 7)
    out = poisson_clone(src, dst, mask)
    # gradients of src match dst, so the membrane must reproduce dst
    assert np.abs(out - dst).max() < 1e-6


def test_dense_and_iterative_agree_on_16x16_mask():
    rng = np.random.default_rng(4)
    src, dst = _smooth(rng, 24, 24), _smooth(rng, 24, 24)
    mask = np.zeros((24, 24), dtype=bool)
    mask[4:20, 4:20] = True
    a = poisson_clone(src, dst, mask, solver="dense")
    b = poisson_clone(src, dst, mask, solver="cg")
    assert np.abs(a - b).max() < 1e-8


def test_auto_solver_picks_dense_below_limit_and_cg_above():
    rng = np.random.default_rng(40)
    h = w = 72
    src, dst = _smooth(rng, h, w), _smooth(rng, h, w)
    big = np.zeros((h, w), dtype=bool)
    big[1:-1, 1:-1] = True
    assert big.sum() > DENSE_LIMIT
    out_big = poisson_clone(src, dst, big)
    assert np.isfinite(out_big).all()
    assert np.array_equal(out_big[~big], dst[~big])
    with pytest.raises(ValueError):
        poisson_clone(src, dst, big, solver="jacobi")


def test_empty_mask_raises():
    rng = np.random.default_rng(5)
    img = _smooth(rng, 10, 10)
    with pytest.raises(ValueError):
        poisson_clone(img, img, np.zeros((10, 10), dtype=bool))


def test_border_touching_mask_raises():
    rng = np.random.default_rng(6)
    img = _smooth(rng, 10, 10)
    mask = np.zeros((10, 10), dtype=bool)
    mask[0, 3:6] = True
    mask[3:6, 3:6] = True
    with pytest.raises(ValueError):
        poisson_clone(img, img, mask)


def test_shape_mismatch_raises():
    rng = np.random.default_rng(7)
    with pytest.raises(ValueError):
        poisson_clone(_smooth(rng, 10, 10), _smooth(rng, 12, 12),
                      np.ones((10, 10), dtype=bool))


def test_output_stays_in_unit_range():
    rng = np.random.default_rng(8)
    src = _smooth(rng, 20, 20, lo=0.0, hi=1.0)
    dst = _smooth(rng, 20, 20, lo=0.0, hi=1.0)
    mask = _blob_mask(20, 20, 10, 10, 6)
    out = poisson_clone(src, dst, mask)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_composite_swap_outside_mask_untouched():
    rng = np.random.default_rng(9)
    original = _smooth(rng, 32, 32)
    generated = _smooth(rng, 16, 16)
    # paste the 16px generated patch back near the centre
    to_original = AffineTransform(matrix=np.eye(2), offset=np.array([8.0, 8.0]))
    mask = _blob_mask(32, 32, 16, 16, 5)
    out = composite_swap(original, generated, to_original, mask)
    assert out.shape == original.shape
    assert np.array_equal(out[~mask], original[~mask])
    assert not np.array_equal(out[mask], original[mask])

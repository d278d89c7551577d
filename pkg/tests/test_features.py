import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulse.errors import DomainError, ShapeError
from pulse.features import (cell_spectra, doppler_spectrum, doppler_volume,
                            normalize_frame, reconstruct_rad, resample_ra,
                            spatial_magnitude)


def rand_rad(seed, r=4, a=5, d=6):
    rng = np.random.default_rng(seed)
    return rng.random((r, a, d))


# ---------------------------------------------------------------------------
# spatial_magnitude

def test_spatial_magnitude_ones():
    np.testing.assert_array_equal(spatial_magnitude(np.ones((3, 4, 5))),
                                  np.ones((3, 4)))


def test_spatial_magnitude_zero():
    np.testing.assert_array_equal(spatial_magnitude(np.zeros((3, 4, 5))),
                                  np.zeros((3, 4)))


def test_spatial_magnitude_single_cell_mean():
    h = np.zeros((3, 4, 5))
    h[1, 2, 0] = 5.0  # mean over D=5 gives 1
    s = spatial_magnitude(h)
    assert s[1, 2] == 1.0
    s[1, 2] = 0.0
    assert np.all(s == 0.0)


def test_spatial_magnitude_commutes_with_scaling():
    h = rand_rad(0)
    np.testing.assert_allclose(spatial_magnitude(3.5 * h),
                               3.5 * spatial_magnitude(h), atol=1e-12)


def test_negative_entries_rejected():
    h = np.ones((2, 2, 2))
    h[0, 0, 0] = -1.0
    with pytest.raises(DomainError):
        spatial_magnitude(h)


# ---------------------------------------------------------------------------
# doppler volume / spectrum

def test_doppler_volume_identity_on_magnitudes():
    h = rand_rad(1)
    np.testing.assert_array_equal(doppler_volume(h), h)


def test_doppler_spectrum_zero_tensor():
    v = doppler_volume(np.zeros((2, 3, 4)))
    np.testing.assert_array_equal(doppler_spectrum(v, 1, 2), np.zeros(4))


def test_doppler_spectrum_matches_direct_indexing():
    h = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
    np.testing.assert_array_equal(doppler_spectrum(doppler_volume(h), 1, 2),
                                  h[1, 2, :])


def test_doppler_spectrum_bounds():
    with pytest.raises(ShapeError):
        doppler_spectrum(np.zeros((2, 3, 4)), 2, 0)


def test_cell_spectra_row_major_and_count():
    h = rand_rad(2, r=3, a=4, d=5)
    m = cell_spectra(h)
    assert m.shape == (12, 5)
    np.testing.assert_array_equal(m[1 * 4 + 2], h[1, 2, :])


# ---------------------------------------------------------------------------
# reconstruct_rad

def test_reconstruct_zero_ra_row_near_zero_output():
    ra = np.array([[0.0, 0.0], [1.0, 1.0]])
    rd = np.array([[4.0, 2.0], [4.0, 2.0]])
    h = reconstruct_rad(ra, rd, eps=1e-8)
    assert np.all(h[0] == 0.0)


def test_reconstruct_hand_weights():
    ra = np.array([[1.0, 3.0]])
    rd = np.array([[0.0, 8.0, 0.0]])
    h = reconstruct_rad(ra, rd, eps=1e-12)
    np.testing.assert_allclose(h[0, :, 1], [2.0, 6.0], atol=1e-9)


def test_reconstruct_marginalization_bound():
    rng = np.random.default_rng(3)
    eps = 1e-8
    for _ in range(100):
        ra = rng.uniform(0.1, 2.0, size=(6, 7))   # row mass >= 0.7 >> 1e3*eps
        rd = rng.uniform(0.0, 5.0, size=(6, 4))
        h = reconstruct_rad(ra, rd, eps=eps)
        marg = h.sum(axis=1)
        assert np.max(np.abs(marg - rd)) <= 1e-6 * rd.max()


def test_reconstruct_eps_positive_required():
    with pytest.raises(DomainError):
        reconstruct_rad(np.ones((2, 2)), np.ones((2, 2)), eps=0.0)


# ---------------------------------------------------------------------------
# normalize_frame

def test_normalize_zero_frame_unchanged():
    z = np.zeros((2, 3, 4))
    np.testing.assert_array_equal(normalize_frame(z), z)


def test_normalize_scale_invariance():
    h = rand_rad(4)
    np.testing.assert_allclose(normalize_frame(10.0 * h), normalize_frame(h),
                               atol=1e-12)


def test_normalize_max_is_one():
    h = rand_rad(5) * 4.0
    out = normalize_frame(h)
    assert out.max() == 1.0


def test_normalize_idempotent_on_nonzero():
    h = rand_rad(6)
    once = normalize_frame(h)
    np.testing.assert_array_equal(normalize_frame(once), once)


# ---------------------------------------------------------------------------
# resample_ra

def test_resample_identity():
    h = rand_rad(7)
    np.testing.assert_allclose(resample_ra(h, h.shape[0], h.shape[1]), h,
                               atol=1e-12)


def test_resample_constant_stays_constant():
    h = np.full((4, 4, 3), 2.5)
    out = resample_ra(h, 7, 5)
    np.testing.assert_allclose(out, 2.5, atol=1e-12)


def test_resample_hand_bilinear_center():
    h = np.array([[0.0, 2.0], [4.0, 6.0]])[:, :, None]
    out = resample_ra(h, 3, 3)
    assert out[1, 1, 0] == pytest.approx(3.0, abs=1e-12)
    # corner alignment
    assert out[0, 0, 0] == 0.0 and out[2, 2, 0] == 6.0


def test_resample_targets_validated():
    with pytest.raises(DomainError):
        resample_ra(rand_rad(8), 1, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6), st.integers(2, 6))
def test_resample_preserves_bounds(seed, r_out, a_out):
    h = rand_rad(seed, r=3, a=4, d=2)
    out = resample_ra(h, r_out, a_out)
    assert out.min() >= h.min() - 1e-12
    assert out.max() <= h.max() + 1e-12


def test_resample_leaves_doppler_axis_alone():
    h = rand_rad(9, r=3, a=3, d=5)
    out = resample_ra(h, 5, 5)
    # each Doppler slab resampled independently: slab-wise check
    for d in range(5):
        np.testing.assert_allclose(out[:, :, d],
                                   resample_ra(h[:, :, d:d + 1], 5, 5)[:, :, 0],
                                   atol=1e-12)

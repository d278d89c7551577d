"""Dual-domain feature math on range-angle-Doppler magnitude tensors.

A RadTensor here is a plain nonnegative float array of shape (R, A, D) with
axes (range, angle, doppler). The spatial map averages it over Doppler; the
Doppler volume keeps the per-cell spectra intact. Also houses the RA/RD to
RAD reconstruction used for datasets that only release 2-D maps, per-frame
max normalization, and bilinear range-angle resampling.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError


def _check_rad(h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 3:
        raise ShapeError(f"expected an (R, A, D) tensor, got shape {h.shape}")
    if not np.isfinite(h).all() or (h < 0).any():
        raise DomainError("RAD tensor entries must be finite and nonnegative")
    return h


def spatial_magnitude(h):
    """(R, A) map: mean of the magnitudes along the Doppler axis."""
    return _check_rad(h).mean(axis=2)


def doppler_volume(h):
    """Magnitude volume; the input is already magnitudes, so identity."""
    return _check_rad(h)


def doppler_spectrum(v, r, a):
    """Length-D spectrum at one range-angle cell."""
    v = np.asarray(v)
    if not (0 <= r < v.shape[0] and 0 <= a < v.shape[1]):
        raise ShapeError(f"cell ({r}, {a}) outside grid {v.shape[:2]}")
    return v[r, a, :]


def cell_spectra(h):
    """All Doppler spectra as an (R*A, D) matrix, cells in row-major order."""
    h = _check_rad(h)
    r, a, d = h.shape
    return h.reshape(r * a, d)


def reconstruct_rad(ra, rd, eps=1e-8):
    """Distribute a per-range Doppler profile over angles using RA weights.

    weights[r, a] = RA[r, a] / (sum_a' RA[r, a'] + eps)
    H[r, a, d]    = weights[r, a] * RD[r, d]

    Marginalizing H over angle recovers RD up to the eps dilution, so rows
    with RA mass well above eps preserve the released Doppler distribution.
    RD values are used as given (normalized or not).
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    ra = np.asarray(ra, dtype=np.float64)
    rd = np.asarray(rd, dtype=np.float64)
    if ra.ndim != 2 or rd.ndim != 2 or ra.shape[0] != rd.shape[0]:
        raise ShapeError(f"incompatible RA {ra.shape} / RD {rd.shape}")
    weights = ra / (ra.sum(axis=1, keepdims=True) + eps)
    return weights[:, :, None] * rd[:, None, :]


def normalize_frame(h):
    """Divide by the frame's max magnitude; zero frames pass through.

    Uses only the frame's own statistics, so scaling a frame by any positive
    constant yields the same output and the op is idempotent on nonzero
    frames.
    """
    h = _check_rad(h)
    peak = h.max()
    if peak == 0.0:
        return h
    return h / peak


def resample_ra(h, r_out, a_out):
    """Bilinear resampling of each Doppler slab on the range-angle plane.

    Corner-aligned: output corners sample input corners exactly. The Doppler
    axis is untouched. Output values are convex combinations of inputs, so
    min/max bounds are preserved.
    """
    h = _check_rad(h)
    r_in, a_in, _ = h.shape
    if r_out < 2 or a_out < 2:
        raise DomainError(f"targets must be >= 2, got ({r_out}, {a_out})")

    def axis_coords(n_in, n_out):
        pos = np.arange(n_out) * (n_in - 1) / (n_out - 1)
        lo = np.minimum(np.floor(pos).astype(int), n_in - 2)
        return lo, pos - lo

    r_lo, r_frac = axis_coords(r_in, r_out)
    a_lo, a_frac = axis_coords(a_in, a_out)
    rf = r_frac[:, None, None]
    af = a_frac[None, :, None]
    top = (1 - af) * h[np.ix_(r_lo, a_lo)] + af * h[np.ix_(r_lo, a_lo + 1)]
    bot = (1 - af) * h[np.ix_(r_lo + 1, a_lo)] + af * h[np.ix_(r_lo + 1, a_lo + 1)]
    return (1 - rf) * top + rf * bot

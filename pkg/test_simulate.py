#!/usr/bin/env python3
"""
Tests for phantoms, coil maps, masks and zero-filled reconstruction.
"""

import numpy as np
import pytest

from kspace_lab.fourier import fft2c, rss
from kspace_lab.models import SamplingMask
from kspace_lab.simulate import (
    SHEPP_LOGAN_ELLIPSES, _ellipse_image, apply_mask, build_mask, forward_acquire,
    make_sensitivities, random_phantom, shepp_logan, undersample, zero_filled_recon
)
from kspace_lab.utils.validators import InvalidMaskSpec, ShapeMismatch, TooSmall


def test_mask_kept_line_counts():
    assert build_mask(320, 4, 16).kept_count == 92
    assert build_mask(8, 1, 0).keep.all()
    assert set(np.flatnonzero(build_mask(8, 4, 2).keep)) == {0, 3, 4}


def test_mask_invariants():
    mask = build_mask(64, 4, 16)
    lines = np.arange(64)
    assert mask.keep[lines % 4 == 0].all()
    assert mask.keep[mask.acs_rows].all()
    assert mask.kept_count >= mask.n_acs
    assert mask.acs_start == 24


@pytest.mark.parametrize('n_pe, accel, n_acs', [(0, 1, 0), (8, 0, 0), (8, 9, 0), (8, 2, -1), (8, 2, 9)])
def test_mask_rejects_bad_specs(n_pe, accel, n_acs):
    with pytest.raises(InvalidMaskSpec):
        build_mask(n_pe, accel, n_acs)


def test_mask_survives_container_entries():
    mask = build_mask(32, 4, 8)
    assert SamplingMask.from_dict(mask.to_dict()) == mask


def test_shepp_logan_basic_properties():
    img = shepp_logan(64, 64)
    assert img[0, 0] == 0
    assert img.min() >= 0 and img.max() <= 1
    assert img.sum() > 0
    assert np.array_equal(img, shepp_logan(64, 64))
    # Support strictly inside the border.
    assert not img[0].any() and not img[-1].any() and not img[:, 0].any() and not img[:, -1].any()


def test_shepp_logan_mirror_symmetry_where_ellipses_are_symmetric():
    outer = _ellipse_image(64, 64, SHEPP_LOGAN_ELLIPSES[:2])
    assert np.array_equal(outer, outer[:, ::-1])

    img = shepp_logan(64, 64)
    ys = (31.5 - np.arange(64)) / 31.5
    top = ys > 0.45
    assert np.array_equal(img[top], img[top][:, ::-1])


def test_shepp_logan_too_small():
    with pytest.raises(TooSmall):
        shepp_logan(7, 16)


def test_random_phantom_is_seeded():
    a = random_phantom(32, 32, np.random.default_rng(5))
    b = random_phantom(32, 32, np.random.default_rng(5))
    c = random_phantom(32, 32, np.random.default_rng(6))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.min() >= 0 and a.max() <= 1


def test_single_coil_map_has_unit_magnitude():
    sens = make_sensitivities(1, 16, 16)
    assert np.allclose(np.abs(sens), 1.0)


def test_sensitivities_unit_rss_and_smooth():
    sens = make_sensitivities(8, 64, 64)
    assert np.allclose(np.sum(np.abs(sens) ** 2, axis=0), 1.0, atol=1e-6)
    magnitude = np.abs(sens)
    assert np.max(np.abs(np.diff(magnitude, axis=1))) < 0.1
    assert np.max(np.abs(np.diff(magnitude, axis=2))) < 0.1


def test_forward_acquire(rng):
    img = shepp_logan(16, 16)
    single = make_sensitivities(1, 16, 16)
    assert np.allclose(forward_acquire(img, single)[0], fft2c(single[0] * img))
    assert np.allclose(forward_acquire(np.zeros((16, 16)), single), 0)

    sens = make_sensitivities(8, 16, 16)
    ksp = forward_acquire(img, sens)
    assert np.sum(np.abs(ksp) ** 2) == pytest.approx(np.sum(img ** 2), rel=1e-9)

    with pytest.raises(ShapeMismatch):
        forward_acquire(np.zeros((8, 16)), sens)


def test_apply_mask_zeroes_dropped_rows(rng):
    ksp = rng.standard_normal((2, 8, 8)) + 1j * rng.standard_normal((2, 8, 8))
    mask = build_mask(8, 4, 2)
    masked = apply_mask(ksp, mask)
    assert not masked[:, [1, 2, 5, 6, 7]].any()
    assert np.array_equal(masked[:, [0, 3, 4]], ksp[:, [0, 3, 4]])
    assert np.array_equal(apply_mask(masked, mask), masked)
    assert np.array_equal(apply_mask(ksp, build_mask(8, 1, 0)), ksp)

    with pytest.raises(ShapeMismatch):
        apply_mask(ksp, build_mask(16, 4, 2))


def test_acs_only_mask_keeps_acs_rows(rng):
    keep = np.zeros(16, dtype=bool)
    keep[6:10] = True
    mask = SamplingMask(keep=keep, accel=16, n_acs=4)
    ksp = rng.standard_normal((1, 16, 4)) + 0j
    masked = apply_mask(ksp, mask)
    assert np.flatnonzero(np.abs(masked).sum(axis=(0, 2))).tolist() == [6, 7, 8, 9]


def test_zero_filled_round_trip():
    img = shepp_logan(32, 32)
    sens = make_sensitivities(8, 32, 32)
    assert np.allclose(zero_filled_recon(forward_acquire(img, sens)), img, atol=1e-6)
    assert not zero_filled_recon(np.zeros((2, 8, 8), dtype=complex)).any()


def test_uniform_undersampling_aliasing_replicas():
    img = shepp_logan(32, 32)
    sens = make_sensitivities(1, 32, 32)
    mask = build_mask(32, 4, 0)
    zf = zero_filled_recon(apply_mask(forward_acquire(img, sens), mask))

    weighted = sens[0] * img
    replicas = sum(np.roll(weighted, k * 8, axis=0) for k in range(4)) / 4
    assert np.allclose(zf, np.abs(replicas), atol=1e-6)
    assert zf.min() >= 0


def test_undersample_returns_masked_zero_filled_and_full():
    img = shepp_logan(16, 16)
    sens = make_sensitivities(4, 16, 16)
    masked, zf, full = undersample(img, sens, build_mask(16, 1, 0))
    assert masked.shape == (4, 16, 16)
    assert np.allclose(zf, img, atol=1e-6)
    assert np.allclose(full, rss(sens * img[None]), atol=1e-9)

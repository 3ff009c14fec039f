#!/usr/bin/env python3
"""
Tests for GRAPPA calibration and k-space completion.
"""

import numpy as np
import pytest

from kspace_lab.fourier import ifft2c
from kspace_lab.grappa import (
    calibrate, calibration_rows, extract_acs, fill_kspace, gather_sources, gather_targets,
    grappa_recon, reconstruct, solve_weights, source_rows
)
from kspace_lab.metrics import mse
from kspace_lab.simulate import (
    apply_mask, build_mask, forward_acquire, make_sensitivities, random_phantom, shepp_logan,
    zero_filled_recon
)
from kspace_lab.train import normalize
from kspace_lab.utils.validators import (
    InsufficientCalibration, KernelMismatch, NeedMultipleCoils, SingularCalibration
)


def phantom_kspace(size=64, coils=8, seed=None):
    img = shepp_logan(size, size) if seed is None else random_phantom(size, size, np.random.default_rng(seed))
    return img, forward_acquire(img, make_sensitivities(coils, size, size))


def test_solve_recovers_known_kernel(rng):
    a = rng.standard_normal((200, 12)) + 1j * rng.standard_normal((200, 12))
    w_true = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    w, lam = solve_weights(a, a @ w_true, lam=0.0)
    assert lam == 0.0
    assert np.linalg.norm(w - w_true) <= 1e-6 * np.linalg.norm(w_true)


def test_ridge_shrinks_weights(rng):
    a = rng.standard_normal((100, 8)) + 1j * rng.standard_normal((100, 8))
    b = rng.standard_normal((100, 2)) + 1j * rng.standard_normal((100, 2))
    norms = [np.linalg.norm(solve_weights(a, b, lam)[0]) for lam in (1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e12)]
    assert all(later <= earlier for earlier, later in zip(norms, norms[1:]))
    assert norms[-1] < 1e-8


def test_rank_deficient_without_ridge_is_singular(rng):
    a = rng.standard_normal((50, 4)) + 0j
    a[:, 3] = a[:, 2]
    with pytest.raises(SingularCalibration):
        solve_weights(a, rng.standard_normal((50, 1)) + 0j, lam=0.0)


def test_duplicate_coil_with_ridge_is_finite():
    _, ksp = phantom_kspace(32, 4)
    ksp[1] = ksp[0]
    mask = build_mask(32, 2, 16)
    kernel = calibrate(extract_acs(ksp, mask), 2, lam=None)
    assert np.all(np.isfinite(kernel.weights))
    assert kernel.lam > 0


def test_calibrate_on_consistent_synthetic_data(rng):
    # ACS block whose missing rows are an exact linear function of the sources.
    nc, rows, nx, accel, n_src, kx = 2, 20, 16, 2, 2, 3
    acs = rng.standard_normal((nc, rows, nx)) + 1j * rng.standard_normal((nc, rows, nx))
    w_true = 0.1 * (rng.standard_normal((nc * n_src * kx, nc)) + 1j * rng.standard_normal((nc * n_src * kx, nc)))
    target_rows = calibration_rows(rows, 1, accel, n_src)
    sources = gather_sources(acs, target_rows, 1, accel, n_src, kx)
    assert sources.shape == (target_rows.size * nx, nc * n_src * kx)
    w, _ = solve_weights(sources, sources @ w_true, lam=0.0)
    assert np.linalg.norm(w - w_true) <= 1e-6 * np.linalg.norm(w_true)


def test_gather_targets_layout(rng):
    data = rng.standard_normal((3, 8, 4)) + 0j
    targets = gather_targets(data, np.array([2, 5]))
    assert targets.shape == (8, 3)
    assert targets[4 + 1, 2] == data[2, 5, 1]


def test_calibrate_preconditions():
    _, ksp = phantom_kspace(32, 1)
    with pytest.raises(NeedMultipleCoils):
        calibrate(ksp[:, 8:24], 4)

    _, ksp = phantom_kspace(32, 4)
    with pytest.raises(InsufficientCalibration):
        calibrate(ksp[:, 14:18], 4)


def test_acceleration_one_needs_no_weights():
    _, ksp = phantom_kspace(16, 2)
    kernel = calibrate(ksp[:, 4:12], 1)
    assert kernel.weights.shape[0] == 0


def test_fully_sampled_input_is_unchanged():
    _, ksp = phantom_kspace(32, 4)
    mask = build_mask(32, 1, 8)
    kernel = calibrate(extract_acs(ksp, mask), 1)
    assert np.array_equal(reconstruct(ksp, mask, kernel), zero_filled_recon(ksp))


def test_acquired_rows_stay_bit_identical():
    _, ksp = phantom_kspace(64, 8)
    mask = build_mask(64, 4, 16)
    under = apply_mask(ksp, mask)
    kernel = calibrate(extract_acs(under, mask), 4)
    filled = fill_kspace(under, mask, kernel)
    assert np.array_equal(filled[:, mask.keep], under[:, mask.keep])
    assert np.abs(filled[:, ~mask.keep]).sum() > 0


def test_kernel_mismatch():
    _, ksp = phantom_kspace(64, 8)
    mask = build_mask(64, 4, 16)
    under = apply_mask(ksp, mask)
    kernel = calibrate(extract_acs(under, mask), 4)
    with pytest.raises(KernelMismatch):
        fill_kspace(under[:4], mask, kernel)
    with pytest.raises(KernelMismatch):
        fill_kspace(under, build_mask(64, 2, 16), kernel)


def test_grappa_beats_zero_fill_on_phantom():
    img, ksp = phantom_kspace(64, 8)
    mask = build_mask(64, 4, 16)
    under = apply_mask(ksp, mask)
    truth = normalize(zero_filled_recon(ksp))

    zf_error = mse(truth, normalize(zero_filled_recon(under)))
    grappa_error = mse(truth, normalize(grappa_recon(under, mask)))
    assert grappa_error < zf_error


def test_grappa_improvement_over_seeds():
    mask = build_mask(64, 4, 16)
    zf_errors, grappa_errors = [], []
    for seed in range(5):
        _, ksp = phantom_kspace(64, 8, seed=seed)
        under = apply_mask(ksp, mask)
        truth = normalize(zero_filled_recon(ksp))
        zf_errors.append(mse(truth, normalize(zero_filled_recon(under))))
        grappa_errors.append(mse(truth, normalize(grappa_recon(under, mask))))
    assert np.mean(grappa_errors) <= 0.7 * np.mean(zf_errors)


def test_filled_kspace_images_match_coil_count():
    _, ksp = phantom_kspace(32, 4)
    mask = build_mask(32, 2, 12)
    filled = fill_kspace(apply_mask(ksp, mask), mask, calibrate(extract_acs(ksp, mask), 2))
    assert ifft2c(filled).shape == (4, 32, 32)


@pytest.mark.parametrize('ny, accel', [(30, 4), (62, 4), (33, 2), (64, 4)])
def test_fill_sources_are_acquired_lines(ny, accel):
    mask = build_mask(ny, accel, 8)
    acquired = set(np.flatnonzero(mask.keep).tolist())
    missing = mask.missing_rows
    for offset in range(1, accel):
        rows = missing[missing % accel == offset]
        used = source_rows(rows, offset, accel, 4, ny, lattice=True)
        assert set(used.ravel().tolist()) <= acquired


def test_lattice_wrap_matches_modulo_when_accel_divides():
    rows = np.arange(1, 64, 4)
    assert np.array_equal(source_rows(rows, 1, 4, 4, 64, lattice=True), source_rows(rows, 1, 4, 4, 64))


def test_grappa_on_indivisible_line_count():
    img = shepp_logan(62, 64)
    ksp = forward_acquire(img, make_sensitivities(8, 62, 64))
    mask = build_mask(62, 4, 16)
    under = apply_mask(ksp, mask)
    truth = normalize(zero_filled_recon(ksp))

    zf_error = mse(truth, normalize(zero_filled_recon(under)))
    grappa_error = mse(truth, normalize(grappa_recon(under, mask)))
    assert grappa_error < zf_error

#!/usr/bin/env python3
"""
Tests for the centred unitary Fourier transforms.
"""

import numpy as np
import pytest

from kspace_lab.fourier import fft2c, ifft2c, rss
from kspace_lab.utils.validators import NonFiniteInput


def naive_centered_dft(img):
    """O(n^4) oracle: DC at (ny // 2, nx // 2), 1/sqrt(ny * nx) scaling."""
    ny, nx = img.shape
    ys = np.arange(ny) - ny // 2
    xs = np.arange(nx) - nx // 2
    out = np.zeros((ny, nx), dtype=complex)
    for u, ku in enumerate(ys):
        for v, kv in enumerate(xs):
            phase = np.exp(-2j * np.pi * (ku * ys[:, None] / ny + kv * xs[None, :] / nx))
            out[u, v] = np.sum(img * phase)
    return out / np.sqrt(ny * nx)


def test_constant_image_concentrates_in_dc():
    img = np.full((8, 8), 3.0)
    ksp = fft2c(img)
    assert ksp[4, 4] == pytest.approx(3.0 * 8)
    ksp[4, 4] = 0
    assert np.max(np.abs(ksp)) < 1e-12


def test_single_corner_pixel_has_flat_spectrum():
    img = np.zeros((4, 4))
    img[0, 0] = 1.0
    assert np.allclose(np.abs(fft2c(img)), 0.25, atol=1e-12)


def test_round_trip_both_directions(rng):
    x = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
    assert np.linalg.norm(ifft2c(fft2c(x)) - x) <= 1e-10 * np.linalg.norm(x)
    assert np.linalg.norm(fft2c(ifft2c(x)) - x) <= 1e-10 * np.linalg.norm(x)


def test_parseval(rng):
    for shape in [(8, 8), (7, 9), (3, 5, 16)]:
        x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        assert abs(np.linalg.norm(fft2c(x)) - np.linalg.norm(x)) <= 1e-6 * np.linalg.norm(x)


def test_matches_naive_dft(rng):
    x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.allclose(fft2c(x), naive_centered_dft(x), atol=1e-10, rtol=0)

    ksp = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    # Inverse of the oracle is its conjugate transpose.
    img = ifft2c(ksp)
    assert np.allclose(naive_centered_dft(img), ksp, atol=1e-10, rtol=0)


def test_linearity(rng):
    x = rng.standard_normal((8, 8))
    y = rng.standard_normal((8, 8))
    a, b = 2.5, -1.25 + 0.5j
    lhs = fft2c(a * x + b * y)
    rhs = a * fft2c(x) + b * fft2c(y)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_dc_only_kspace_gives_constant_image():
    ksp = np.zeros((6, 6), dtype=complex)
    ksp[3, 3] = 6.0
    assert np.allclose(ifft2c(ksp), 1.0, atol=1e-12)


def test_coil_stack_transforms_per_coil(rng):
    stack = rng.standard_normal((3, 8, 8))
    ksp = fft2c(stack)
    for c in range(3):
        assert np.allclose(ksp[c], fft2c(stack[c]))


def test_non_finite_input_rejected():
    img = np.zeros((4, 4))
    img[1, 2] = np.nan
    with pytest.raises(NonFiniteInput):
        fft2c(img)
    with pytest.raises(NonFiniteInput):
        ifft2c(np.full((4, 4), np.inf))


def test_rss_combines_coils():
    coils = np.array([np.full((2, 2), 3.0), np.full((2, 2), 4j)])
    assert np.allclose(rss(coils), 5.0)

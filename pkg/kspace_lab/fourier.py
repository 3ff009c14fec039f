"""
Centered, unitary 2D Fourier transforms.

The transforms act on the last two axes, so a single image (ny, nx) and a
coil stack (nc, ny, nx) go through the same code path. The DC component sits
at (ny // 2, nx // 2) and both directions are scaled by 1/sqrt(ny * nx), which
makes them exact inverses and preserves the 2-norm.
"""

import numpy as np

from kspace_lab.utils.validators import require_finite, ShapeMismatch

AXES = (-2, -1)


def _check(data: np.ndarray, what: str) -> np.ndarray:
    data = np.asarray(data)
    if data.ndim < 2 or data.shape[-1] < 1 or data.shape[-2] < 1:
        raise ShapeMismatch(f"{what} must have at least two non-empty axes, got {data.shape}")
    require_finite(data, what)
    return data


def fft2c(img: np.ndarray) -> np.ndarray:
    """Image domain -> centered k-space."""
    img = _check(img, "image")
    shifted = np.fft.ifftshift(img, axes=AXES)
    return np.fft.fftshift(np.fft.fft2(shifted, axes=AXES, norm="ortho"), axes=AXES)


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Centered k-space -> image domain."""
    ksp = _check(ksp, "k-space")
    shifted = np.fft.ifftshift(ksp, axes=AXES)
    return np.fft.fftshift(np.fft.ifft2(shifted, axes=AXES, norm="ortho"), axes=AXES)


def rss(coil_images: np.ndarray, coil_axis: int = 0) -> np.ndarray:
    """Root-sum-of-squares coil combination."""
    return np.sqrt(np.sum(np.abs(coil_images) ** 2, axis=coil_axis))

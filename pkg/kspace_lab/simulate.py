"""
Synthetic acquisition: phantoms, coil sensitivities, retrospective
undersampling and zero-filled reconstruction.

Array conventions: images are (ny, nx) with rows along the phase-encode
direction; coil data are (nc, ny, nx). Undersampling removes whole rows.
"""

import logging

import numpy as np

from kspace_lab.fourier import fft2c, ifft2c, rss
from kspace_lab.models.sampling import SamplingMask
from kspace_lab.utils.validators import (
    InvalidMaskSpec, ShapeMismatch, TooSmall, ValidationError,
    validate_image_size, validate_mask_spec
)

logger = logging.getLogger(__name__)

# Modified Shepp-Logan table (intensities chosen so the image lies in [0, 1]).
# Columns: intensity, semi-axis a (x), semi-axis b (y), centre x0, centre y0, angle (degrees)
SHEPP_LOGAN_ELLIPSES = np.array([
    [1.0, 0.6900, 0.9200, 0.00, 0.0000, 0.0],
    [-0.8, 0.6624, 0.8740, 0.00, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0000, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0000, 18.0],
    [0.1, 0.2100, 0.2500, 0.00, 0.3500, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, 0.1000, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, -0.1000, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.6050, 0.0],
    [0.1, 0.0230, 0.0230, 0.00, -0.6060, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.6050, 0.0],
])


def build_mask(n_pe: int, accel: int, n_acs: int) -> SamplingMask:
    """Uniform every-R-th line pattern united with a centred ACS block."""
    error = validate_mask_spec(n_pe, accel, n_acs)
    if error:
        raise InvalidMaskSpec(error)

    lines = np.arange(n_pe)
    start = n_pe // 2 - n_acs // 2
    keep = (lines % accel == 0) | ((lines >= start) & (lines < start + n_acs))

    mask = SamplingMask(keep=keep, accel=accel, n_acs=n_acs)
    logger.debug(f"Mask R={accel} ACS={n_acs}: kept {mask.kept_count}/{n_pe} lines")
    return mask


def _ellipse_image(ny: int, nx: int, ellipses: np.ndarray) -> np.ndarray:
    # Symmetric grids: column j and nx-1-j are exact mirrors, row 0 is the top (y = +1).
    xs = (np.arange(nx) - (nx - 1) / 2.0) / ((nx - 1) / 2.0)
    ys = ((ny - 1) / 2.0 - np.arange(ny)) / ((ny - 1) / 2.0)
    x, y = np.meshgrid(xs, ys)

    img = np.zeros((ny, nx))
    for intensity, a, b, x0, y0, angle in ellipses:
        phi = np.deg2rad(angle)
        cosp, sinp = np.cos(phi), np.sin(phi)
        dx, dy = x - x0, y - y0
        inside = ((dx * cosp + dy * sinp) ** 2 / a ** 2
                  + (dy * cosp - dx * sinp) ** 2 / b ** 2) <= 1.0
        img[inside] += intensity

    return np.clip(img, 0.0, 1.0)


def shepp_logan(ny: int, nx: int) -> np.ndarray:
    """Deterministic Shepp-Logan phantom with values in [0, 1]."""
    error = validate_image_size(ny, nx)
    if error:
        raise TooSmall(error)
    return _ellipse_image(ny, nx, SHEPP_LOGAN_ELLIPSES)


def random_phantom(ny: int, nx: int, rng: np.random.Generator) -> np.ndarray:
    """Shepp-Logan variant with jittered ellipses, for building datasets."""
    error = validate_image_size(ny, nx)
    if error:
        raise TooSmall(error)

    table = SHEPP_LOGAN_ELLIPSES.copy()
    inner = slice(2, None)
    n_inner = table.shape[0] - 2

    table[inner, 0] += rng.uniform(-0.05, 0.05, n_inner)
    table[inner, 1:3] *= rng.uniform(0.85, 1.15, (n_inner, 2))
    table[inner, 3:5] += rng.uniform(-0.03, 0.03, (n_inner, 2))
    table[inner, 5] += rng.uniform(-10.0, 10.0, n_inner)

    # Global shrink and rotation keep the head inside the field of view.
    scale = rng.uniform(0.85, 1.0)
    theta = rng.uniform(-15.0, 15.0)
    t = np.deg2rad(theta)
    x0, y0 = table[:, 3].copy(), table[:, 4].copy()
    table[:, 3] = scale * (x0 * np.cos(t) - y0 * np.sin(t))
    table[:, 4] = scale * (x0 * np.sin(t) + y0 * np.cos(t))
    table[:, 1:3] *= scale
    table[:, 5] += theta

    return _ellipse_image(ny, nx, table)


def make_sensitivities(nc: int, ny: int, nx: int, width: float = 0.4) -> np.ndarray:
    """Smooth complex coil maps normalised to unit root-sum-of-squares.

    Coil c has a Gaussian magnitude centred at angle 2*pi*c/nc on a circle of
    radius 0.5 * min(ny, nx) around the image centre (standard deviation
    `width * min(ny, nx)` pixels) and a linear phase ramp pointing the same way.
    """
    if nc < 1:
        raise ValidationError("Coil count must be at least 1")

    yy, xx = np.meshgrid(np.arange(ny) - ny / 2.0, np.arange(nx) - nx / 2.0, indexing='ij')
    radius = 0.5 * min(ny, nx)
    sigma = width * min(ny, nx)

    maps = np.empty((nc, ny, nx), dtype=np.complex128)
    for c in range(nc):
        angle = 2.0 * np.pi * c / nc
        cy, cx = radius * np.sin(angle), radius * np.cos(angle)
        magnitude = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma ** 2))
        phase = angle + np.pi * (np.cos(angle) * xx / nx + np.sin(angle) * yy / ny)
        maps[c] = magnitude * np.exp(1j * phase)

    return maps / rss(maps)


def forward_acquire(img: np.ndarray, sens: np.ndarray) -> np.ndarray:
    """Coil-weight the image and transform each coil to centred k-space."""
    img = np.asarray(img)
    sens = np.asarray(sens)
    if sens.ndim != 3 or img.shape != sens.shape[1:]:
        raise ShapeMismatch(f"Image {img.shape} does not match sensitivity maps {sens.shape}")
    return fft2c(sens * img[None])


def apply_mask(ksp: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Zero every phase-encode row the mask drops; kept rows are untouched."""
    ksp = np.asarray(ksp)
    if ksp.ndim < 2 or ksp.shape[-2] != mask.n_pe:
        raise ShapeMismatch(f"Mask of {mask.n_pe} lines does not fit k-space {ksp.shape}")
    return np.where(mask.keep[:, None], ksp, 0)


def zero_filled_recon(ksp: np.ndarray) -> np.ndarray:
    """Per-coil inverse transform followed by root-sum-of-squares."""
    ksp = np.asarray(ksp)
    if ksp.ndim < 3:
        raise ShapeMismatch(f"Coil k-space must be (nc, ny, nx), got {ksp.shape}")
    return rss(ifft2c(ksp), coil_axis=-3)


def undersample(img: np.ndarray, sens: np.ndarray, mask: SamplingMask):
    """Simulate one slice: (masked coil k-space, zero-filled image, fully sampled image)."""
    full = forward_acquire(img, sens)
    masked = apply_mask(full, mask)
    return masked, zero_filled_recon(masked), zero_filled_recon(full)

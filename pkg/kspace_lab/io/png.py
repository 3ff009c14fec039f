import io
import logging
import os

import numpy as np
from PIL import Image

from kspace_lab.io.container import sha256_hex
from kspace_lab.utils.validators import IoError, ShapeMismatch, require_finite, require_same_shape

logger = logging.getLogger(__name__)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..255; a constant image maps to 0 everywhere."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeMismatch(f"PNG export needs a 2D image, got shape {img.shape}")
    require_finite(img, "image")

    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.round((img - lo) / (hi - lo) * 255.0).astype(np.uint8)


def difference_to_uint8(recon: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Symmetric scaling of recon - truth: zero is mid-gray (128), +/- max|diff| are 255/1."""
    recon = np.asarray(recon, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    require_same_shape(recon, truth, "reconstruction and ground truth")
    if recon.ndim != 2:
        raise ShapeMismatch(f"PNG export needs a 2D image, got shape {recon.shape}")

    diff = recon - truth
    require_finite(diff, "difference image")
    extent = float(np.max(np.abs(diff)))
    if extent == 0:
        return np.full(diff.shape, 128, dtype=np.uint8)
    return np.clip(np.round(128.0 + 127.0 * diff / extent), 0, 255).astype(np.uint8)


def encode_png(pixels: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buffer, format='PNG', optimize=False)
    return buffer.getvalue()


def write_png(path: str, pixels: np.ndarray) -> str:
    """Write an 8-bit grayscale PNG and return its SHA-256 checksum."""
    blob = encode_png(pixels)
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as handle:
            handle.write(blob)
    except OSError as error:
        raise IoError(f"Cannot write {path}: {error}") from None

    checksum = sha256_hex(blob)
    logger.info(f"Wrote {path} (sha256 {checksum})")
    return checksum

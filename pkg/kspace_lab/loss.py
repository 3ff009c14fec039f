"""
Training objective: mean squared image error plus an alpha-weighted L1
penalty on the difference of the centred unitary spectra.

Both terms are normalised by the total number of pixels in the batch (B * N),
so alpha keeps its meaning across resolutions. The L1 norm of a complex
difference is taken separably as |Re| + |Im|, with sign(0) = 0 as the
subgradient.
"""

import numpy as np

from kspace_lab.fourier import fft2c, ifft2c
from kspace_lab.models.reports import LossReport
from kspace_lab.utils.validators import ShapeMismatch, ValidationError, require_same_shape


def _prepare(pred: np.ndarray, target: np.ndarray, alpha: float):
    pred = np.asarray(pred)
    target = np.asarray(target)
    require_same_shape(pred, target, "prediction and target")
    if pred.ndim == 4 and pred.shape[1] != 1:
        raise ShapeMismatch(f"Loss expects single-channel images, got {pred.shape[1]} channels")
    if pred.ndim < 2:
        raise ShapeMismatch(f"Loss needs images, got shape {pred.shape}")
    if alpha < 0:
        raise ValidationError("Fourier weight alpha must not be negative")
    return pred, target


def loss_forward(pred: np.ndarray, target: np.ndarray, alpha: float) -> LossReport:
    pred, target = _prepare(pred, target, alpha)
    count = pred.size

    diff = target - pred
    l2_term = float(np.sum(diff.astype(np.float64) ** 2) / count)

    if alpha == 0:
        return LossReport(total=l2_term, l2_term=l2_term, fourier_term=0.0, alpha=0.0)

    delta = fft2c(target) - fft2c(pred)
    fourier_term = float((np.sum(np.abs(delta.real)) + np.sum(np.abs(delta.imag))) / count)
    return LossReport(total=l2_term + alpha * fourier_term, l2_term=l2_term,
                      fourier_term=fourier_term, alpha=float(alpha))


def loss_backward(pred: np.ndarray, target: np.ndarray, alpha: float) -> np.ndarray:
    """Gradient of the objective w.r.t. `pred`, same shape and dtype as `pred`."""
    pred, target = _prepare(pred, target, alpha)
    count = pred.size

    grad = (2.0 / count) * (pred - target)
    if alpha != 0:
        delta = fft2c(target) - fft2c(pred)
        sign = np.sign(delta.real) + 1j * np.sign(delta.imag)
        # d|Re D|/d pred = -Re(F^H sign), same for the imaginary part; F^H = F^-1.
        grad = grad - (alpha / count) * np.real(ifft2c(sign))

    return grad.astype(pred.dtype, copy=False)

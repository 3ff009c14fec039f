from typing import Optional, Sequence

import numpy as np


class LabError(Exception):
    """Base class for every error raised by the lab."""
    pass


class ValidationError(LabError):
    """Input violates a documented precondition."""
    pass


class NonFiniteInput(ValidationError):
    pass


class InvalidMaskSpec(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class NeedMultipleCoils(ValidationError):
    pass


class InsufficientCalibration(ValidationError):
    pass


class KernelMismatch(ValidationError):
    pass


class DegenerateBatch(ValidationError):
    pass


class ConfigError(ValidationError):
    """Run configuration could not be parsed or validated."""
    pass


class SingularCalibration(LabError):
    pass


class BackwardBeforeForward(LabError):
    pass


class NoGradient(LabError):
    pass


class MissingModel(LabError):
    pass


class IoError(LabError):
    pass


class DivergedTraining(LabError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: Optional[str] = None):
        self.epoch = epoch
        super().__init__(message or f"Training diverged at epoch {epoch}")


def validate_mask_spec(n_pe: int, accel: int, n_acs: int) -> Optional[str]:
    """Validate a uniform-plus-ACS sampling specification."""
    if n_pe < 1:
        return "Number of phase-encode lines must be at least 1"

    if not (1 <= accel <= n_pe):
        return f"Acceleration must be between 1 and {n_pe}, got {accel}"

    if not (0 <= n_acs <= n_pe):
        return f"ACS line count must be between 0 and {n_pe}, got {n_acs}"

    return None


def validate_image_size(ny: int, nx: int, minimum: int = 8) -> Optional[str]:
    """Validate phantom dimensions."""
    if ny < minimum or nx < minimum:
        return f"Image must be at least {minimum}x{minimum}, got {ny}x{nx}"

    return None


def validate_spatial_divisibility(shape: Sequence[int], depth: int) -> Optional[str]:
    """Height and width must survive `depth` 2x2 poolings."""
    factor = 2 ** depth
    h, w = shape[-2], shape[-1]

    if h % factor or w % factor:
        return f"Spatial size {h}x{w} is not divisible by 2^{depth} = {factor}"

    return None


def require_finite(array: np.ndarray, what: str = "input") -> None:
    """Raise NonFiniteInput unless every element is finite."""
    if not np.all(np.isfinite(array)):
        raise NonFiniteInput(f"{what} contains non-finite values")


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what} differ in shape: {a.shape} vs {b.shape}")


def require_tensor4(x: np.ndarray, what: str = "tensor") -> None:
    """Tensor4 invariant: (batch, channels, height, width), all >= 1."""
    if x.ndim != 4 or min(x.shape) < 1:
        raise ShapeMismatch(f"{what} must be a non-empty 4D array, got shape {x.shape}")


def validate_train_settings(epochs: int, batch_size: int, lr0: float, momentum: float,
                            lr_halve_every: int) -> Optional[str]:
    """Validate the knobs of the SGD training protocol."""
    if epochs < 0:
        return "Epochs must not be negative"

    if batch_size < 1:
        return "Batch size must be at least 1"

    if lr0 < 0:
        return "Initial learning rate must not be negative"

    if not (0 <= momentum < 1):
        return "Momentum must lie in [0, 1)"

    if lr_halve_every < 1:
        return "Learning-rate halving period must be at least 1 epoch"

    return None


def validate_net_settings(depth: int, base_channels: int, polu_order: float) -> Optional[str]:
    if depth < 1:
        return "Network depth must be at least 1"

    if base_channels < 1:
        return "Base channel count must be at least 1"

    if polu_order < 0:
        return "PoLU order must be positive (or 0 to select ReLU)"

    return None

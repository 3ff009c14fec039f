"""
GRAPPA parallel-imaging baseline.

A kernel maps a neighbourhood of acquired samples (all coils, `n_src_lines`
sampled rows spaced R apart, `kx` adjacent columns) to the missing sample of
every coil at row offset r = 1..R-1 after the first source line of the gap.
Weights are fitted on the fully sampled ACS block by Tikhonov-regularised
least squares and applied with circular wrap in both k-space directions.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from kspace_lab.models.sampling import SamplingMask
from kspace_lab.simulate import zero_filled_recon
from kspace_lab.utils.validators import (
    InsufficientCalibration, KernelMismatch, NeedMultipleCoils, ShapeMismatch,
    SingularCalibration, ValidationError, require_finite
)

logger = logging.getLogger(__name__)

MIN_CALIBRATION_WINDOWS = 16
DEFAULT_RELATIVE_LAMBDA = 1e-4


@dataclass(frozen=True, eq=False)
class GrappaKernel:
    """Fitted weights: weights[r - 1] has shape (nc targets, nc * n_src_lines * kx)."""

    weights: np.ndarray
    accel: int
    n_coils: int
    n_src_lines: int
    kx: int
    lam: float

    @property
    def n_features(self) -> int:
        return self.n_coils * self.n_src_lines * self.kx

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.weights))


def source_line_offsets(n_src_lines: int) -> np.ndarray:
    """Sampled-line indices of the source rows relative to the line before the gap."""
    return np.arange(n_src_lines) - (n_src_lines - 1) // 2


def _column_offsets(kx: int) -> np.ndarray:
    return np.arange(kx) - kx // 2


def source_rows(target_rows: np.ndarray, offset: int, accel: int, n_src_lines: int, ny: int,
                lattice: bool = False) -> np.ndarray:
    """Source row indices (len(target_rows), n_src_lines), wrapped into [0, ny).

    With `lattice`, rows wrap over the uniformly sampled lines 0, R, 2R, ...
    instead of modulo ny, so every source row is an acquired line even when
    R does not divide ny.
    """
    rows = target_rows[:, None] - offset + accel * source_line_offsets(n_src_lines)[None, :]
    if not lattice:
        return rows % ny
    n_lines = -(-ny // accel)
    return (rows // accel % n_lines) * accel


def gather_sources(data: np.ndarray, target_rows: np.ndarray, offset: int, accel: int,
                   n_src_lines: int, kx: int, lattice: bool = False) -> np.ndarray:
    """Stack source neighbourhoods of every (target row, column) as rows of a matrix.

    Returns an array (len(target_rows) * nx, nc * n_src_lines * kx) with feature
    order (coil, source line, column tap). Row and column indices wrap.
    """
    nc, ny, nx = data.shape
    src_rows = source_rows(target_rows, offset, accel, n_src_lines, ny, lattice)
    cols = (np.arange(nx)[:, None] + _column_offsets(kx)[None, :]) % nx

    # (nc, n_targets, n_src_lines, nx, kx)
    patches = data[:, src_rows[:, :, None, None], cols[None, None, :, :]]
    patches = patches.transpose(1, 3, 0, 2, 4)
    return patches.reshape(len(target_rows) * nx, nc * n_src_lines * kx)


def gather_targets(data: np.ndarray, target_rows: np.ndarray) -> np.ndarray:
    """Target samples as an array (len(target_rows) * nx, nc)."""
    nc, _, nx = data.shape
    return data[:, target_rows, :].transpose(1, 2, 0).reshape(len(target_rows) * nx, nc)


def default_lambda(gram: np.ndarray) -> float:
    """Scale-invariant ridge weight: a small fraction of the mean diagonal of A^H A."""
    return DEFAULT_RELATIVE_LAMBDA * float(np.mean(np.real(np.diag(gram))))


def solve_weights(sources: np.ndarray, targets: np.ndarray, lam: Optional[float] = None):
    """Minimise ||A w - b||^2 + lam ||w||^2 for every target column of b.

    Returns (w, lam) with w of shape (n_features, n_targets).
    """
    gram = sources.conj().T @ sources
    rhs = sources.conj().T @ targets
    if lam is None:
        lam = default_lambda(gram)
    if lam < 0:
        raise ValidationError("Tikhonov weight must not be negative")

    n = gram.shape[0]
    if lam == 0 and np.linalg.matrix_rank(sources) < n:
        raise SingularCalibration(f"Calibration matrix is rank deficient ({n} unknowns) and lambda is 0")

    try:
        weights = scipy.linalg.solve(gram + lam * np.eye(n), rhs, assume_a='her')
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as error:
        raise SingularCalibration(f"Normal equations could not be solved: {error}") from None

    if not np.all(np.isfinite(weights)):
        raise SingularCalibration("Calibration produced non-finite weights")
    return weights, lam


def calibration_rows(n_acs_rows: int, offset: int, accel: int, n_src_lines: int) -> np.ndarray:
    """ACS rows whose full source neighbourhood lies inside the block."""
    offsets = source_line_offsets(n_src_lines)
    first = offset - accel * offsets[0]
    last = n_acs_rows - 1 + offset - accel * offsets[-1]
    return np.arange(first, last + 1)


def calibrate(acs: np.ndarray, accel: int, n_src_lines: int = 4, kx: int = 5,
              lam: Optional[float] = None) -> GrappaKernel:
    """Fit one weight set per missing-line offset on a fully sampled ACS block (nc, rows, nx).

    `lam=None` selects the default ridge weight per offset; an explicit value
    is used as is.
    """
    acs = np.asarray(acs)
    if acs.ndim != 3:
        raise ShapeMismatch(f"ACS block must be (nc, rows, nx), got {acs.shape}")
    require_finite(acs, "ACS block")

    nc, n_rows, nx = acs.shape
    if nc < 2:
        raise NeedMultipleCoils("GRAPPA needs at least two receive coils")
    if accel < 1 or n_src_lines < 1 or kx < 1 or kx % 2 == 0:
        raise ValidationError("Kernel needs R >= 1, at least one source line and an odd kx")

    n_features = nc * n_src_lines * kx
    if accel == 1:
        return GrappaKernel(np.zeros((0, nc, n_features), dtype=np.complex128),
                            accel, nc, n_src_lines, kx, 0.0 if lam is None else lam)

    blocks = []
    used_lam = 0.0
    for offset in range(1, accel):
        rows = calibration_rows(n_rows, offset, accel, n_src_lines)
        n_windows = rows.size * nx
        if rows.size < 1 or n_windows < MIN_CALIBRATION_WINDOWS:
            raise InsufficientCalibration(
                f"ACS block of {n_rows} rows gives {max(n_windows, 0)} calibration windows for offset "
                f"{offset}; need at least {MIN_CALIBRATION_WINDOWS} (rows >= {(n_src_lines - 1) * accel + 1})"
            )
        sources = gather_sources(acs, rows, offset, accel, n_src_lines, kx)
        targets = gather_targets(acs, rows)
        weights, used_lam = solve_weights(sources, targets, lam)
        residual = np.linalg.norm(sources @ weights - targets) / max(np.linalg.norm(targets), 1e-30)
        logger.debug(f"GRAPPA offset {offset}: {n_windows} windows, lambda={used_lam:.3e}, "
                     f"relative residual={residual:.3e}")
        blocks.append(weights.T)

    return GrappaKernel(np.stack(blocks), accel, nc, n_src_lines, kx, used_lam)


def extract_acs(ksp: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """The centred ACS rows of coil k-space."""
    if mask.n_acs < 1:
        raise InsufficientCalibration("Mask carries no ACS lines")
    return np.asarray(ksp)[..., mask.acs_rows, :]


def fill_kspace(ksp_under: np.ndarray, mask: SamplingMask, kernel: GrappaKernel) -> np.ndarray:
    """Complete the missing rows of coil k-space; acquired rows are returned unchanged."""
    ksp_under = np.asarray(ksp_under)
    if ksp_under.ndim != 3 or ksp_under.shape[1] != mask.n_pe:
        raise ShapeMismatch(f"Coil k-space {ksp_under.shape} does not fit a {mask.n_pe}-line mask")
    if kernel.accel != mask.accel or kernel.n_coils != ksp_under.shape[0]:
        raise KernelMismatch(
            f"Kernel (R={kernel.accel}, nc={kernel.n_coils}) does not match data "
            f"(R={mask.accel}, nc={ksp_under.shape[0]})"
        )

    filled = ksp_under.astype(np.complex128, copy=True)
    missing = mask.missing_rows
    for offset in range(1, kernel.accel):
        rows = missing[missing % kernel.accel == offset]
        if rows.size == 0:
            continue
        sources = gather_sources(ksp_under, rows, offset, kernel.accel, kernel.n_src_lines, kernel.kx,
                                 lattice=True)
        values = sources @ kernel.weights[offset - 1].T
        nx = ksp_under.shape[2]
        filled[:, rows, :] = values.reshape(rows.size, nx, kernel.n_coils).transpose(2, 0, 1)

    return filled


def reconstruct(ksp_under: np.ndarray, mask: SamplingMask, kernel: GrappaKernel) -> np.ndarray:
    """Fill missing lines with the kernel and coil-combine by root-sum-of-squares."""
    return zero_filled_recon(fill_kspace(ksp_under, mask, kernel))


def grappa_recon(ksp_under: np.ndarray, mask: SamplingMask, n_src_lines: int = 4, kx: int = 5,
                 lam: Optional[float] = None) -> np.ndarray:
    """Calibrate on the data's own ACS block, then reconstruct."""
    kernel = calibrate(extract_acs(ksp_under, mask), mask.accel, n_src_lines, kx, lam)
    return reconstruct(ksp_under, mask, kernel)

"""
Container layouts used by the command-line pipeline.

phantom file      'image'          real64 (ny, nx)
acquisition file  'kspace'         complex128 (slices, coils, ny, nx), masked
                  'mask', 'mask.accel', 'mask.n_acs'
                  'zero_filled'    real64 (slices, ny, nx)
                  'truth'          real64 (slices, ny, nx), optional
external volume   'kspace'         complex64/complex128 (slices, coils, ny, nx), fully sampled
reconstruction    'recon'          real64 (slices, ny, nx), optional 'mse'
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from kspace_lab.io.container import load_container, save_container
from kspace_lab.models.sampling import SamplingMask
from kspace_lab.utils.validators import IoError, ShapeMismatch


def save_phantom(path: str, img: np.ndarray) -> str:
    return save_container(path, {'image': np.asarray(img, dtype=np.float64)})


def load_image(path: str, entry: str = 'image') -> np.ndarray:
    entries = load_container(path)
    if entry not in entries:
        raise IoError(f"{path} has no '{entry}' entry")
    return entries[entry]


def load_images(paths: Sequence[str]) -> List[np.ndarray]:
    images = [load_image(path) for path in paths]
    for path, img in zip(paths, images):
        if img.ndim != 2:
            raise ShapeMismatch(f"{path}: expected a 2D image, got shape {img.shape}")
    return images


def kspace_volume(entries: Dict[str, np.ndarray], source: str = 'container') -> np.ndarray:
    """The (slices, coils, ny, nx) complex k-space of an acquisition or external volume."""
    if 'kspace' not in entries:
        raise IoError(f"{source} has no 'kspace' entry")
    volume = entries['kspace']
    if not np.iscomplexobj(volume):
        raise IoError(f"{source}: k-space must be complex64 or complex128, got {volume.dtype}")
    if volume.ndim != 4:
        raise ShapeMismatch(f"{source}: k-space must be (slices, coils, ny, nx), got {volume.shape}")
    return volume.astype(np.complex128, copy=False)


@dataclass(frozen=True, eq=False)
class Acquisition:
    kspace: np.ndarray
    mask: Optional[SamplingMask]
    zero_filled: Optional[np.ndarray]
    truth: Optional[np.ndarray]

    @property
    def n_slices(self) -> int:
        return self.kspace.shape[0]


def save_acquisition(path: str, acquisition: Acquisition) -> str:
    entries = {'kspace': acquisition.kspace.astype(np.complex128, copy=False)}
    if acquisition.mask is not None:
        entries.update(acquisition.mask.to_dict())
    if acquisition.zero_filled is not None:
        entries['zero_filled'] = np.asarray(acquisition.zero_filled, dtype=np.float64)
    if acquisition.truth is not None:
        entries['truth'] = np.asarray(acquisition.truth, dtype=np.float64)
    return save_container(path, entries)


def load_acquisition(path: str) -> Acquisition:
    """Read an acquisition; an external volume comes back without mask or images."""
    entries = load_container(path)
    volume = kspace_volume(entries, path)
    mask = SamplingMask.from_dict(entries) if 'mask' in entries else None
    if mask is not None and mask.n_pe != volume.shape[2]:
        raise ShapeMismatch(f"{path}: mask of {mask.n_pe} lines does not fit k-space {volume.shape}")
    return Acquisition(kspace=volume, mask=mask,
                       zero_filled=entries.get('zero_filled'), truth=entries.get('truth'))

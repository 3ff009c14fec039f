from dataclasses import dataclass

import numpy as np

from kspace_lab.utils.validators import InvalidMaskSpec


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Per phase-encode line sampling pattern: uniform lines plus a centred ACS block."""

    keep: np.ndarray
    accel: int
    n_acs: int

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool)
        if keep.ndim != 1 or keep.size < 1:
            raise InvalidMaskSpec(f"Mask must be a non-empty 1D vector, got shape {keep.shape}")
        object.__setattr__(self, 'keep', keep)

    def __eq__(self, other):
        if not isinstance(other, SamplingMask):
            return NotImplemented
        return (self.accel == other.accel and self.n_acs == other.n_acs
                and np.array_equal(self.keep, other.keep))

    @property
    def n_pe(self) -> int:
        return int(self.keep.size)

    @property
    def kept_count(self) -> int:
        return int(np.count_nonzero(self.keep))

    @property
    def acs_start(self) -> int:
        return self.n_pe // 2 - self.n_acs // 2

    @property
    def acs_rows(self) -> slice:
        """Row slice of the ACS block."""
        return slice(self.acs_start, self.acs_start + self.n_acs)

    @property
    def missing_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.keep)

    @property
    def effective_acceleration(self) -> float:
        return self.n_pe / self.kept_count

    def to_dict(self):
        """Container entries describing this mask."""
        return {
            'mask': self.keep,
            'mask.accel': np.array(float(self.accel)),
            'mask.n_acs': np.array(float(self.n_acs)),
        }

    @classmethod
    def from_dict(cls, entries):
        try:
            return cls(
                keep=entries['mask'],
                accel=int(entries['mask.accel']),
                n_acs=int(entries['mask.n_acs']),
            )
        except KeyError as missing:
            raise InvalidMaskSpec(f"Container has no mask entry {missing}") from None

from dataclasses import dataclass, asdict, replace
from typing import Optional

import numpy as np

from kspace_lab.utils.validators import (
    ValidationError, validate_net_settings, validate_train_settings
)


@dataclass(frozen=True)
class NetConfig:
    """Architecture knobs of the encoder-decoder network.

    `polu_order` selects the activation: a positive value n is PoLU(n),
    0 selects ReLU. `dense_skips=False` turns every residual dense block on
    the skip path into a plain copy, giving the reference U-Net.
    """

    depth: int = 2
    base_channels: int = 16
    polu_order: float = 1.0
    dense_skips: bool = True
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        error = validate_net_settings(self.depth, self.base_channels, self.polu_order)
        if error:
            raise ValidationError(error)
        if self.in_channels != 1 or self.out_channels != 1:
            raise ValidationError("Network maps a single channel to a single channel")

    @property
    def activation(self) -> str:
        return f"polu({self.polu_order:g})" if self.polu_order > 0 else "relu"

    def channels_at(self, level: int) -> int:
        """Channel count of encoder level `level` (level == depth is the bottleneck)."""
        return self.base_channels * 2 ** level

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_settings(cls, settings, **overrides):
        values = dict(
            depth=settings.NET_DEPTH,
            base_channels=settings.NET_BASE_CHANNELS,
            polu_order=settings.POLU_ORDER,
            dense_skips=settings.DENSE_SKIPS,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class TrainConfig:
    """SGD training protocol."""

    epochs: int = 200
    batch_size: int = 3
    lr0: float = 0.02
    momentum: float = 0.5
    lr_halve_every: int = 20
    alpha: float = 0.01
    seed: int = 0
    precision: int = 32
    checkpoint_every: int = 20
    augment: bool = True
    max_iterations: Optional[int] = None

    def __post_init__(self):
        error = validate_train_settings(self.epochs, self.batch_size, self.lr0,
                                        self.momentum, self.lr_halve_every)
        if error:
            raise ValidationError(error)
        if self.alpha < 0:
            raise ValidationError("Fourier weight alpha must not be negative")
        if self.precision not in (32, 64):
            raise ValidationError(f"Precision must be 32 or 64, got {self.precision}")
        if self.checkpoint_every < 1:
            raise ValidationError("Checkpoint period must be at least 1 epoch")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValidationError("Iteration cap must not be negative")

    @property
    def dtype(self):
        return np.float64 if self.precision == 64 else np.float32

    def with_changes(self, **changes) -> 'TrainConfig':
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_settings(cls, settings, **overrides):
        values = dict(
            epochs=settings.EPOCHS,
            batch_size=settings.BATCH_SIZE,
            lr0=settings.LEARNING_RATE,
            momentum=settings.MOMENTUM,
            lr_halve_every=settings.LR_HALVE_EVERY,
            alpha=settings.ALPHA,
            seed=settings.SEED,
            precision=settings.PRECISION,
            checkpoint_every=settings.CHECKPOINT_EVERY,
            augment=settings.AUGMENT,
        )
        values.update(overrides)
        return cls(**values)

from dataclasses import dataclass, field

from kspace_lab.models.configs import NetConfig, TrainConfig
from kspace_lab.utils.validators import ValidationError, validate_mask_spec


@dataclass(frozen=True)
class SamplingSpec:
    accel: int = 4
    n_acs: int = 16
    coils: int = 8
    image_size: int = 64
    grappa_source_lines: int = 4
    grappa_kx: int = 5

    def __post_init__(self):
        error = validate_mask_spec(self.image_size, self.accel, self.n_acs)
        if error:
            raise ValidationError(error)
        if self.coils < 1:
            raise ValidationError("Coil count must be at least 1")
        if self.grappa_source_lines < 1 or self.grappa_kx < 1 or self.grappa_kx % 2 == 0:
            raise ValidationError("GRAPPA kernel needs >= 1 source line and an odd kx width")

    @classmethod
    def from_settings(cls, settings, **overrides):
        values = dict(
            accel=settings.ACCELERATION,
            n_acs=settings.NUM_ACS,
            coils=settings.NUM_COILS,
            image_size=settings.IMAGE_SIZE,
            grappa_source_lines=settings.GRAPPA_SOURCE_LINES,
            grappa_kx=settings.GRAPPA_KX,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class DataPaths:
    """Containers consumed by train/eval; empty string means not used."""

    train_data: str = ''
    validation_data: str = ''
    test_data: str = ''
    output_dir: str = 'runs'


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs: network, training, sampling and paths."""

    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    paths: DataPaths = field(default_factory=DataPaths)

    @classmethod
    def from_settings(cls, settings):
        return cls(
            net=NetConfig.from_settings(settings),
            train=TrainConfig.from_settings(settings),
            sampling=SamplingSpec.from_settings(settings),
            paths=DataPaths(output_dir=settings.OUTPUT_DIR),
        )

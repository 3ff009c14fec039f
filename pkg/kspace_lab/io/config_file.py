"""
Run configuration files.

A TOML document with the sections [net], [train], [sampling] and [paths].
Every key is optional; absent keys take the active profile's value. Unknown
sections or keys are rejected.
"""

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict
from typing import Any, Dict

from marshmallow import RAISE, Schema, fields, validate
from marshmallow import ValidationError as SchemaError

from kspace_lab.models.configs import NetConfig, TrainConfig
from kspace_lab.models.run_config import DataPaths, RunConfig, SamplingSpec
from kspace_lab.utils.validators import ConfigError, IoError, LabError

logger = logging.getLogger(__name__)


class NetSchema(Schema):
    class Meta:
        unknown = RAISE

    depth = fields.Integer(strict=True, validate=validate.Range(min=1))
    base_channels = fields.Integer(strict=True, validate=validate.Range(min=1))
    polu_order = fields.Float(validate=validate.Range(min=0))
    dense_skips = fields.Boolean()


class TrainSchema(Schema):
    class Meta:
        unknown = RAISE

    epochs = fields.Integer(strict=True, validate=validate.Range(min=0))
    batch_size = fields.Integer(strict=True, validate=validate.Range(min=1))
    lr0 = fields.Float(validate=validate.Range(min=0))
    momentum = fields.Float(validate=validate.Range(min=0, max=1, max_inclusive=False))
    lr_halve_every = fields.Integer(strict=True, validate=validate.Range(min=1))
    alpha = fields.Float(validate=validate.Range(min=0))
    seed = fields.Integer(strict=True)
    precision = fields.Integer(strict=True, validate=validate.OneOf([32, 64]))
    checkpoint_every = fields.Integer(strict=True, validate=validate.Range(min=1))
    augment = fields.Boolean()
    max_iterations = fields.Integer(strict=True, validate=validate.Range(min=0))


class SamplingSchema(Schema):
    class Meta:
        unknown = RAISE

    accel = fields.Integer(strict=True, validate=validate.Range(min=1))
    n_acs = fields.Integer(strict=True, validate=validate.Range(min=0))
    coils = fields.Integer(strict=True, validate=validate.Range(min=1))
    image_size = fields.Integer(strict=True, validate=validate.Range(min=8))
    grappa_source_lines = fields.Integer(strict=True, validate=validate.Range(min=1))
    grappa_kx = fields.Integer(strict=True, validate=validate.Range(min=1))


class PathsSchema(Schema):
    class Meta:
        unknown = RAISE

    train_data = fields.String()
    validation_data = fields.String()
    test_data = fields.String()
    output_dir = fields.String()


class RunConfigSchema(Schema):
    class Meta:
        unknown = RAISE

    net = fields.Nested(NetSchema)
    train = fields.Nested(TrainSchema)
    sampling = fields.Nested(SamplingSchema)
    paths = fields.Nested(PathsSchema)


def _format_errors(messages) -> str:
    if isinstance(messages, dict):
        parts = []
        for key, value in messages.items():
            inner = _format_errors(value)
            parts.append(f"{key}.{inner}" if isinstance(value, dict) else f"{key}: {inner}")
        return '; '.join(parts)
    if isinstance(messages, (list, tuple)):
        return ' '.join(str(m) for m in messages)
    return str(messages)


def parse_run_config(document: Dict[str, Any], settings) -> RunConfig:
    """Validate a parsed document and merge it over the profile defaults."""
    try:
        data = RunConfigSchema().load(document)
    except SchemaError as error:
        raise ConfigError(f"Invalid run configuration: {_format_errors(error.messages)}") from None

    base = RunConfig.from_settings(settings)
    try:
        return RunConfig(
            net=NetConfig(**{**asdict(base.net), **data.get('net', {})}),
            train=TrainConfig(**{**asdict(base.train), **data.get('train', {})}),
            sampling=SamplingSpec(**{**asdict(base.sampling), **data.get('sampling', {})}),
            paths=DataPaths(**{**asdict(base.paths), **data.get('paths', {})}),
        )
    except LabError as error:
        raise ConfigError(f"Invalid run configuration: {error}") from None


def check_paths_exist(config: RunConfig) -> None:
    """Every data path named in the configuration must exist."""
    for name in ('train_data', 'validation_data', 'test_data'):
        path = getattr(config.paths, name)
        if path and not os.path.exists(path):
            raise ConfigError(f"paths.{name} points to a missing file: {path}")


def load_run_config(path: str, settings, require_paths: bool = True) -> RunConfig:
    try:
        with open(path, 'rb') as handle:
            document = tomllib.load(handle)
    except tomllib.TOMLDecodeError as error:
        raise ConfigError(f"{path} is not valid TOML: {error}") from None
    except OSError as error:
        raise IoError(f"Cannot read {path}: {error}") from None

    config = parse_run_config(document, settings)
    if require_paths:
        check_paths_exist(config)
    logger.debug(f"Loaded run configuration from {path}")
    return config


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    escaped = str(value).replace('\\', '\\\\').replace('"', '\\"')
    return f'"{escaped}"'


def dump_run_config(config: RunConfig) -> str:
    sections = []
    for section in ('net', 'train', 'sampling', 'paths'):
        values = asdict(getattr(config, section))
        lines = [f"[{section}]"]
        for key, value in values.items():
            if value is None or key in ('in_channels', 'out_channels'):
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        sections.append('\n'.join(lines))
    return '\n\n'.join(sections) + '\n'


def save_run_config(path: str, config: RunConfig) -> None:
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(dump_run_config(config))
    except OSError as error:
        raise IoError(f"Cannot write {path}: {error}") from None
    logger.info(f"Wrote run configuration {path}")

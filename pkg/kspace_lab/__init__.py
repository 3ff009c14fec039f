import logging
import os

from config import config
from kspace_lab.utils.validators import ConfigError

__version__ = '1.0.0'


def configure_logging(settings) -> None:
    """Single stream handler on the root logger, level and format from the settings."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_kspace_lab', False):
            root.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    handler._kspace_lab = True
    root.addHandler(handler)
    root.setLevel(settings.LOG_LEVEL)


def create_lab(config_name=None):
    """Lab factory: select a configuration profile and set up logging."""
    if config_name is None:
        config_name = os.environ.get('KSPACE_LAB_PROFILE', 'default')

    if config_name not in config:
        raise ConfigError(f"Unknown configuration profile '{config_name}' "
                          f"(choose from {', '.join(sorted(config))})")

    settings = config[config_name]
    configure_logging(settings)
    logging.getLogger(__name__).debug(f"Using configuration profile '{config_name}'")
    return settings

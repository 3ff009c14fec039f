import logging
import sys
from typing import Callable, Dict, Type

import click

from kspace_lab.utils.validators import LabError, ValidationError, ConfigError, IoError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

# Most specific class first; the first isinstance match wins.
_handlers: Dict[Type[BaseException], Callable[[BaseException], int]] = {}


def register_error_handler(exc_type: Type[BaseException]):
    """Register a handler that logs an exception and returns an exit code."""
    def decorator(func):
        _handlers[exc_type] = func
        return func
    return decorator


def register_error_handlers():
    """Register error handlers for the command-line application."""

    @register_error_handler(click.exceptions.Abort)
    def handle_abort(error):
        logger.warning('Aborted by user')
        return EXIT_USAGE

    @register_error_handler(click.UsageError)
    def handle_usage_error(error):
        """Bad flags, missing arguments, unknown commands."""
        logger.error(f'Usage Error: {error.format_message()}')
        return EXIT_USAGE

    @register_error_handler(ConfigError)
    def handle_config_error(error):
        logger.error(f'Configuration Error: {error}')
        return EXIT_USAGE

    @register_error_handler(ValidationError)
    def handle_validation_error(error):
        logger.error(f'Validation Error ({type(error).__name__}): {error}')
        return EXIT_RUNTIME

    @register_error_handler(IoError)
    def handle_io_error(error):
        logger.error(f'I/O Error: {error}')
        return EXIT_RUNTIME

    @register_error_handler(LabError)
    def handle_lab_error(error):
        logger.error(f'{type(error).__name__}: {error}')
        return EXIT_RUNTIME

    @register_error_handler(OSError)
    def handle_os_error(error):
        logger.error(f'File Error: {error}')
        return EXIT_RUNTIME

    @register_error_handler(Exception)
    def handle_generic_exception(error):
        """Handle any unhandled exceptions."""
        logger.error(f'Unhandled Exception: {error}', exc_info=True)
        return EXIT_RUNTIME


def exit_code_for(error: BaseException) -> int:
    """Resolve the exit code for an exception using the registered handlers."""
    if not _handlers:
        register_error_handlers()

    for exc_type, handler in _handlers.items():
        if isinstance(error, exc_type):
            return handler(error)

    return EXIT_RUNTIME


def run_cli(group: click.Group, args=None) -> int:
    """Invoke a click group, mapping exceptions onto the lab's exit codes."""
    try:
        result = group.main(args=args, standalone_mode=False)
    except click.exceptions.Exit as done:
        return done.exit_code
    except Exception as error:
        if isinstance(error, click.UsageError):
            click.echo(error.format_message(), err=True)
        return exit_code_for(error)

    # --help and friends return an int in non-standalone mode
    return result if isinstance(result, int) else EXIT_OK


def main_exit(group: click.Group) -> None:
    sys.exit(run_cli(group))

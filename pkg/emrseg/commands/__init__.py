"""
Command-line verbs for emrseg.

Each module registers its sub-commands on the shared parser; main() loads
the configuration, runs the chosen verb and maps failures to exit codes.
"""

import argparse
import logging
from typing import List, Optional

import torch

from emrseg import __version__, setup_logging
from emrseg.config import PipelineConfig, load_config
from emrseg.errors import ConfigurationError, EmbeddingFormatError, ModelIOError, NoAnchorSectionError, ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MODEL_IO = 2
EXIT_BAD_INPUT = 3


def exit_code_for(error: BaseException) -> int:
    """0 success, 1 generic failure, 2 model I/O failure, 3 empty or invalid input."""
    if isinstance(error, ModelIOError):
        return EXIT_MODEL_IO
    if isinstance(error, (ValidationError, ConfigurationError, EmbeddingFormatError, NoAnchorSectionError,
                          UnicodeDecodeError, FileNotFoundError)):
        return EXIT_BAD_INPUT
    return EXIT_FAILURE


def configure_runtime(config: PipelineConfig):
    """Deterministic mode runs torch on one thread with deterministic kernels."""
    torch.set_num_threads(1 if config.deterministic else config.threads)
    torch.use_deterministic_algorithms(config.deterministic, warn_only=True)
    logger.debug(f"Runtime: deterministic={config.deterministic}, torch threads={torch.get_num_threads()}")


def build_parser() -> argparse.ArgumentParser:
    from emrseg.commands import corpus, evaluation, inference, training

    parser = argparse.ArgumentParser(
        prog='emrseg',
        description='Section segmentation of clinical discharge notes (SIF + BiLSTM + CRF).',
    )
    parser.add_argument('--version', action='version', version=f"emrseg {__version__}")
    parser.add_argument('--config', help='flat key = value configuration file')
    parser.add_argument('--seed', type=int, help='seed for every random choice (overrides config)')
    parser.add_argument('--deterministic', action=argparse.BooleanOptionalAction, default=None,
                        help='single-threaded deterministic kernels (default: on)')
    parser.add_argument('--threads', type=int, help='worker threads when not deterministic')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING or ERROR (overrides LOG_LEVEL)')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='override any config key, e.g. --set train.hidden_size=64')

    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for module in (corpus, training, inference, evaluation):
        module.register(subparsers)
    return parser


def _overrides(args) -> dict:
    overrides = {
        'seed': args.seed,
        'deterministic': args.deterministic,
        'threads': args.threads,
    }
    for item in args.set:
        if '=' not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split('=', 1)
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = load_config(args.config, _overrides(args))
        configure_runtime(config)
        logger.info(f"=== emrseg {args.command} (seed {config.seed}) ===")
        return args.handler(args, config) or EXIT_OK

    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILURE

    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_FAILURE:
            logger.error(f"{args.command} failed: {str(e)}", exc_info=True)
        else:
            logger.error(f"{args.command} failed: {str(e)}")

        # Record the failure; never let reporting mask it
        from emrseg.services.error_reporter import ErrorReporter
        try:
            ErrorReporter().handle_error(e, command=args.command, exit_code=code)
        except Exception as report_error:
            logger.debug(f"Error reporting failed: {str(report_error)}")
        return code

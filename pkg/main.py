#!/usr/bin/env python3
"""Markov Balance Imitation Learning - Main entry point"""

import argparse
import sys
import logging
from typing import List, Optional

from src.experiments import ExperimentRunner, load_config, resolve_config
from src.utils import (
    ValidationError,
    configure_logging,
    format_success_output,
    format_error_output
)

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

COMMANDS = {
    'gen-expert': 'Generate the expert trajectory pool',
    'train': 'Fit transition densities and train one policy per seed',
    'evaluate': 'Evaluate a saved policy',
    'density-check': "Compare a run's fitted flows with the exact densities",
    'ablate': 'Run the (alpha, beta) ablation grid',
    'sweep': 'Run the dataset-size sweep',
}


class _ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors share the JSON error envelope."""

    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Experiment YAML file')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='Override a setting by dotted path (repeatable)')
    common.add_argument('--seed', type=int, help='Run a single seed')
    common.add_argument('--out', help='Output directory (default: run.out)')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = _ArgumentParser(description='Markov Balance Imitation Learning experiments')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)
    parsers = {name: commands.add_parser(name, parents=[common], help=text)
               for name, text in COMMANDS.items()}
    parsers['evaluate'].add_argument('--checkpoint', required=True, help='Policy checkpoint (.npz)')
    parsers['evaluate'].add_argument('--episodes', type=int, help='Evaluation episodes')
    parsers['density-check'].add_argument('--run-dir', required=True, help='Run directory written by train')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status"""
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as e:
        print(format_error_output(f'Usage error: {str(e)}'))
        return EXIT_USAGE

    configure_logging(args.log_level)
    context = {'command': args.command, 'out': args.out, 'seed': args.seed}
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f'run.seeds=[{args.seed}]')
        config = resolve_config(load_config(args.config, overrides))
        context['out'] = args.out or config.run.out

        options = {}
        if args.command == 'evaluate':
            options = {'checkpoint': args.checkpoint, 'episodes': args.episodes, 'seed': args.seed}
        elif args.command == 'density-check':
            options = {'run_dir': args.run_dir}

        result = ExperimentRunner(config, args.out).run(args.command, **options)
        print(format_success_output(result))
        return EXIT_SUCCESS

    except ValidationError as e:
        logger.error(f"Configuration validation failed: {str(e)}")
        print(format_error_output(f'Configuration validation failed: {str(e)}', context))
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(format_error_output(f'{args.command} failed: {str(e)}', context))
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())

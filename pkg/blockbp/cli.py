"""
Command-line entry point.

    blockbp ground-state --config run.yaml --workers 4
    blockbp classical --config ising.yaml --block 5x5
    blockbp rdm-compare --config run.yaml
    blockbp bench-parallel --config bench.yaml
    blockbp contract --config run.yaml

The YAML file is one mapping of ``RunConfig`` fields; flags override it.
Exit status is 0 on success, 2 for an invalid configuration and 3 for a
numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from blockbp.errors import BlockBPError, ConfigError, PartitionError, PepsFormatError, SizeLimitError
from blockbp.experiments import COMMANDS, list_artifacts, run_command
from blockbp.logging import disable_round_log, enable_round_log, logger
from blockbp.models import RunConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CONFIG_ERRORS = (ConfigError, PartitionError, PepsFormatError, SizeLimitError, yaml.YAMLError, OSError)


def parse_shape(text: str) -> List[int]:
    """'5x5', '5,5' or '5' -> [rows, cols]."""
    parts = text.lower().replace(',', 'x').split('x')
    try:
        values = [int(p) for p in parts if p.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}") from e
    if len(values) == 1:
        values = values * 2
    if len(values) != 2 or min(values) < 1:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='YAML run configuration')
    common.add_argument('--seed', type=int, help='root seed of all random streams')
    common.add_argument('--workers', type=int, help='worker processes for block-parallel work')
    common.add_argument('--out', type=str, help='output directory')
    common.add_argument('--d', '--D', type=int, dest='bond_dim', help='PEPS bond dimension D')
    common.add_argument('--chi', type=int, help='environment truncation rank')
    common.add_argument('--chi-m', type=int, dest='chi_m', help='message truncation rank')
    common.add_argument('--block', type=parse_shape, help='block shape, e.g. 5x5')
    common.add_argument('--dtau', type=float, help='imaginary time step')
    common.add_argument('--steps', type=int, help='number of sweeps')
    common.add_argument('--round-log', type=Path, dest='round_log', help='JSON-lines file for per-round records')

    parser = argparse.ArgumentParser(prog='blockbp', description='Block belief propagation for PEPS networks.')
    sub = parser.add_subparsers(dest='command', required=True)
    helps = {
        'ground-state': 'imaginary-time ground-state search',
        'classical': 'classical Ising magnetization over a beta grid',
        'rdm-compare': 'trace distances of bond RDMs against a reference',
        'bench-parallel': 'time one sweep per worker count',
        'contract': 'contract the norm network of a stored PEPS',
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def load_config_data(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Configuration file values with command-line flags applied on top."""
    data = load_config_data(args.config)
    evolution = dict(data.get('evolution') or {})
    overrides = {
        'seed': args.seed,
        'D': args.bond_dim,
        'chi': args.chi,
        'chi_m': args.chi_m,
        'block': args.block,
        'dtau': args.dtau,
        'steps': args.steps,
    }
    for key, value in overrides.items():
        if value is not None:
            evolution[key] = value
            data.pop(key, None)
    data['evolution'] = evolution
    if args.workers is not None:
        data['workers'] = args.workers
    if args.out is not None:
        data['out'] = args.out
    return RunConfig.from_dict(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logger.add(sys.stderr, level='INFO', format='{level}: {message}')
    try:
        return _run(args)
    finally:
        logger.remove(handler)


def _run(args: argparse.Namespace) -> int:
    try:
        config = resolve_config(args)
    except (*CONFIG_ERRORS, ValueError, TypeError) as e:
        logger.exception(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    logger.info(f"blockbp {args.command} (seed {config.seed}, {config.workers} worker(s))")
    if args.round_log is not None:
        enable_round_log(args.round_log)
    try:
        paths = run_command(args.command, config)
    except CONFIG_ERRORS as e:
        logger.exception(f"{args.command} failed on its input: {e}")
        return EXIT_CONFIG
    except (BlockBPError, np.linalg.LinAlgError, FloatingPointError) as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_NUMERICAL
    finally:
        if args.round_log is not None:
            disable_round_log()

    for line in list_artifacts(paths):
        logger.info(line)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())

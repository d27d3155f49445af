"""
Command-line entry point.

Responsible for parsing user configuration, and dispatching to the command sweeps.

Example:
    parser = cli.create_parser()
    config = cli.create_config(parser, raw_args=['gaps', '--n', '100000'])
    exit_code = cli.run(config)
"""

import argparse
import logging
# The argumentparser can't fall back to the default sys.argv if sys is not imported
import sys  # noqa
from pathlib import Path
from typing import Any, Optional, TypeVar

from pydantic import ValidationError

from sqrt_gaps import (CheckFailed, ConfigError, NumericsError, checks,
                       numerics_logger, output, strex)
from sqrt_gaps.models import RunConfig

LOGGER = numerics_logger(__name__)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_IO = 3

SUMMARY_KEYS = ('max_mismatch', 'closed_max_deviation', 'vanishing_max_ratio', 'max_deviation',
                'median_residual', 'max_ratio', 'rel_error', 'lhs', 'rhs')


def _init_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.debug else logging.INFO
    format = '%(asctime)s %(levelname)-8s %(name)-30s  %(message)s'
    datefmt = '%Y/%m/%d %H:%M:%S'

    logging.basicConfig(level=level, format=format, datefmt=datefmt)
    logging.captureWarnings(True)

    if not args.debug:
        logging.getLogger('joblib').setLevel(logging.WARN)


def _default(name: str) -> Any:
    return RunConfig.__fields__[name].default


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--n',
                        help='Sequence length: sqrt(n) for N <= n < 2N. [%(default)s]',
                        type=int,
                        default=_default('n'))
    parser.add_argument('--threads',
                        help='Worker count. Results do not depend on it. [all cores]',
                        type=int)
    parser.add_argument('--seed',
                        help='Seed for randomized sweeps. [%(default)s]',
                        type=int,
                        default=_default('seed'))
    parser.add_argument('--out-path',
                        help='Output file. [stdout]',
                        type=Path)
    parser.add_argument('--format',
                        help='Output format. [%(default)s]',
                        choices=['csv', 'json'],
                        default=_default('format'))
    parser.add_argument('--debug',
                        help='Enable debug logging. [%(default)s]',
                        action='store_true')

    group = parser.add_argument_group('Test functions')
    group.add_argument('--s',
                       help='Window length in units of the mean spacing. [%(default)s]',
                       type=float,
                       default=_default('s'))
    group.add_argument('--eta',
                       help='Ramp width of the Phi and V bumps. [1/200 in strict mode, 1/2 in relaxed mode]',
                       type=float)
    group.add_argument('--mode',
                       help='strict needs eta < 1/100, relaxed allows eta <= 1/2. [relaxed for moments, else strict]',
                       choices=['strict', 'relaxed'])

    group = parser.add_argument_group('Modulus family')
    group.add_argument('--delta',
                       help='Q = delta * sqrt(N). [%(default)s]',
                       type=float,
                       default=_default('delta'))
    group.add_argument('--deltas',
                       help='Delta ladder for sweeps. [--delta]',
                       type=float,
                       nargs='+')
    group.add_argument('--qset-mode',
                       help='Modulus family construction. [%(default)s]',
                       choices=['asymptotic', 'desk'],
                       default=_default('qset_mode'))
    group.add_argument('--prime-floor',
                       help='Lower bound for prime factors in desk mode. [max(3, delta^4)]',
                       type=int)
    group.add_argument('--max-arcs',
                       help='Evenly strided arc sample size. [all arcs, or a per-command sample]',
                       type=int)

    group = parser.add_argument_group('Truncations and tolerances')
    group.add_argument('--k',
                       help='Moment order, at most 3. [%(default)s]',
                       type=int,
                       default=_default('k'))
    group.add_argument('--v-cap',
                       help='B-set cap on |v|. [ceil(delta sqrt(N))]',
                       type=int)
    group.add_argument('--u-cap',
                       help='B-set cap on |u|. [floor(delta^4)]',
                       type=int)
    group.add_argument('--t-cap',
                       help='Lattice cap on |t_i| for the truncated main term. [%(default)s]',
                       type=int,
                       default=_default('t_cap'))
    group.add_argument('--method',
                       help='Main term summation. [%(default)s]',
                       choices=['poisson', 'truncated'],
                       default=_default('method'))
    group.add_argument('--theta',
                       help='Extra arc offset for residual tables, |N theta| <= 1/100. [%(default)s]',
                       type=float,
                       default=_default('theta'))
    group.add_argument('--max-ell',
                       help='Plancherel truncation, at least N. [200 N]',
                       type=int)
    group.add_argument('--bins',
                       help='Histogram bins below --bin-max. [%(default)s]',
                       type=int,
                       default=_default('bins'))
    group.add_argument('--bin-max',
                       help='Upper edge of the regular histogram bins. [%(default)s]',
                       type=float,
                       default=_default('bin_max'))
    group.add_argument('--budget',
                       help='Median residual budget for prop3-check. [%(default)s]',
                       type=float,
                       default=_default('budget'))
    group.add_argument('--tolerance',
                       help='Relative tolerance for moments. [%(default)s]',
                       type=float,
                       default=_default('tolerance'))
    group.add_argument('--restricted',
                       help='Add the measure-restricted void and the smoothing bound. [%(default)s]',
                       action='store_true')
    return parser


def create_parser() -> argparse.ArgumentParser:
    """
    Creates the sqrt-gaps ArgumentParser, with one subcommand per command.
    Every subcommand accepts the same options.

    Returns:
        argparse.ArgumentParser: a Python ArgumentParser with defaults set.
    """
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='sqrt-gaps', fromfile_prefix_chars='@')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, help in [
        ('gaps', 'Histogram of the normalized gaps.'),
        ('void', 'Void statistic and the gap overshoot identity.'),
        ('gauss-check', 'Gauss sum closed forms, vanishing, and phase reduction.'),
        ('fresnel-check', 'Fresnel identity on two fixed bumps.'),
        ('prop3-check', 'Direct smoothed count against the minor-arc formula.'),
        ('jutila', 'L2 discrepancy of the arc approximant.'),
        ('moments', 'Moments of the formula against the main term.'),
        ('qset', 'The modulus family.'),
    ]:
        subparsers.add_parser(name, help=help, parents=[common], fromfile_prefix_chars='@')
    return parser


def _flag(loc: tuple) -> str:
    return '--' + str(loc[0]).replace('_', '-')


ConfigT = TypeVar('ConfigT')


def create_config(parser: argparse.ArgumentParser,
                  model: type[ConfigT] = RunConfig,
                  raw_args: Optional[list[str]] = None
                  ) -> ConfigT:
    """
    Parses arguments, and generates the Pydantic config object.

    Args:
        parser (argparse.ArgumentParser):
            The parser generated by `create_parser()`.

        model (type[ConfigT], optional):
            The Pydantic model that matches `parser`.

        raw_args (list[str], optional):
            If not set, `sys.argv[1:]` will be used.

    Returns:
        ConfigT: `model` instantiated with the parsed arguments.

    Raises:
        ConfigError: unknown arguments, or values rejected by `model`.
    """
    args, unknown_args = parser.parse_known_args(raw_args)
    _init_logging(args)

    if unknown_args:
        raise ConfigError(f'Unknown arguments: {unknown_args}')

    values = {k: v for k, v in vars(args).items() if v is not None}
    try:
        return model(**values)
    except ValidationError as ex:
        reasons = '; '.join(f'{_flag(e["loc"])}: {e["msg"]}' if e['loc'][0] != '__root__' else e['msg']
                            for e in ex.errors())
        raise ConfigError(reasons) from ex


def parse_config(raw_args: Optional[list[str]] = None) -> RunConfig:
    return create_config(create_parser(), RunConfig, raw_args)


def _summary(cfg: RunConfig, results: Any) -> str:
    fields = results.dict() if hasattr(results, 'dict') else results
    parts = [cfg.command]
    if isinstance(fields, dict):
        parts += [f'{k}={fields[k]:.6g}' for k in SUMMARY_KEYS if isinstance(fields.get(k), (int, float))]
    return ' '.join(parts)


def _rows(results: Any) -> Optional[list[dict]]:
    if isinstance(results, dict):
        return results.get('rows')
    return None


def run(cfg: RunConfig) -> int:
    """
    Runs one command, writes its output, and returns the exit code:
    0 on success, 1 when a check fails or a numerical error occurs, 3 when writing fails.
    """
    LOGGER.debug(f'Config: {cfg}')
    code = EXIT_OK
    try:
        results, rows = checks.COMMANDS[cfg.command](cfg)
    except CheckFailed as ex:
        LOGGER.error(strex(ex))
        results, rows = ex.report, _rows(ex.report)
        code = EXIT_CHECK
    except NumericsError as ex:
        LOGGER.error(strex(ex, tb=cfg.debug))
        return EXIT_CHECK

    try:
        output.write_output(cfg, results, rows)
    except OSError as ex:
        LOGGER.error(f'Failed to write output: {strex(ex)}')
        return EXIT_IO

    LOGGER.info(_summary(cfg, results))
    return code


def main(raw_args: Optional[list[str]] = None) -> int:
    parser = create_parser()
    try:
        cfg = create_config(parser, RunConfig, raw_args)
    except ConfigError as ex:
        parser.print_usage(sys.stderr)
        LOGGER.error(strex(ex))
        return EXIT_USAGE
    return run(cfg)

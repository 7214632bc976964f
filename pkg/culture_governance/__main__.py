from . import config as run_config
from . import pipeline
from .error_model import ERROR_STRUCTURES
from .errors import exit_code_for

import argparse
import logging
import sys

logger = logging.getLogger('culture_governance')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
COMMANDS = {
    'indicators': pipeline.cmd_indicators,
    'fit': pipeline.cmd_fit,
    'simulate': pipeline.cmd_simulate,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='culture_governance',
        description='Cultural level and diversity indicators and the governance regression')
    parser.add_argument('--config', help='YAML file with defaults, flags override it')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='warnings and errors only')
    commands = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('indicators', 'compute CLI/CDI, weights and exclusion report'),
                            ('fit', 'fit the governance regression')):
        sub = commands.add_parser(name, help=help_text)
        for flag in run_config.INPUT_NAMES:
            sub.add_argument('--{}'.format(flag), help='{} csv'.format(flag))
        sub.add_argument('--out', help='output directory')
        sub.add_argument('--k-neighbors', dest='k_neighbors', type=int, help='imputation neighbours (5)')
        sub.add_argument('--imputation-weighting', dest='imputation_weighting',
                         choices=('mean', 'inverse_distance', 'inverse_square'))
        sub.add_argument('--years', type=int, nargs='+', help='restrict the observation years')
        if name == 'fit':
            sub.add_argument('--regressors', dest='regressor_set', choices=sorted(run_config.REGRESSOR_FLAGS))
            sub.add_argument('--error-structure', dest='error_structure', choices=ERROR_STRUCTURES)
            sub.add_argument('--compare', action='store_true', default=None,
                             help='fit every regressor set and error structure')

    sub = commands.add_parser('simulate', help='write a synthetic dataset and optionally a recovery study')
    sub.add_argument('--out', help='output directory')
    sub.add_argument('--seed', type=int)
    sub.add_argument('--true-lambda', dest='true_lambda', type=float)
    sub.add_argument('--true-phi', dest='true_phi', type=float)
    sub.add_argument('--recover', action='store_true', default=None, help='fit replicated panels')
    sub.add_argument('--replications', type=int)
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are input errors, --help exits 0
        return 1 if exc.code else 0
    configure_logging(args.verbose, args.quiet)

    overrides = {k: v for k, v in vars(args).items() if k not in ('command', 'config', 'verbose', 'quiet')}
    try:
        file_values = run_config.load_yaml(args.config) if args.config else {}
        config = run_config.build_run_config(file_values, overrides)
        return COMMANDS[args.command](config)
    except Exception as exc:
        code = exit_code_for(exc)
        if code == 3:
            logger.exception('internal error: %s', exc)
        else:
            logger.error('%s', exc)
        return code


if __name__ == '__main__':
    sys.exit(main())

# coding: utf-8
"""Command line interface.

Every subcommand runs the pipeline up to its own stage, reusing whatever
the run directory already holds for the same configuration::

    salient run-all --out-dir runs -v
    salient train --set training.adversarial.regime=pgd --seed 3

``train --dataset`` and ``saliency --checkpoint --dataset`` work on files
from elsewhere instead, writing below ``<run dir>/external/`` and printing
the paths they wrote.

Exit codes: 0 success, 2 configuration, 3 data, 4 training divergence,
5 input/output failures.
"""
import argparse
import logging
import sys

from .__version__ import VERSION
from .base import ConfigError, DataError, DivergenceError, UnsupportedMethodError
from .config import MODELS, load_config
from .pipeline import Pipeline

__all__ = ['main', 'build_parser', 'run_standalone', 'EXIT_OK', 'EXIT_CONFIG',
           'EXIT_DATA', 'EXIT_DIVERGENCE', 'EXIT_IO']

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_IO = 5

COMMANDS = (
    ('generate-data', 'generate-data', 'write the synthetic train/validation/test splits'),
    ('train', 'train', 'train the linear model and the three networks'),
    ('calibrate', 'calibrate', 'fit softmax temperatures on the validation split'),
    ('saliency', 'saliency', 'compute saliency maps for the test split'),
    ('evaluate', 'evaluate', 'score maps and write the score and t-test CSVs'),
    ('report', 'report', 'render the map images and the text summary'),
    ('run-all', 'report', 'run every stage'),
)
STAGE_FOR = dict((command, stage) for command, stage, _ in COMMANDS)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='FILE', help='JSON experiment config')
    common.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='SECTION.KEY=VALUE',
                        help='override one config value (JSON value, else string)')
    common.add_argument('--seed', type=int, help='seed for data generation and training')
    common.add_argument('--out-dir', default='runs', help='parent of the run directories')
    common.add_argument('--jobs', type=int, help='worker threads inside a stage')
    common.add_argument('--pgd', action='store_true',
                        help='train the adversarial network with PGD instead of '
                             'minibatch adversarial training')
    common.add_argument('--tune-sigma', action='store_true',
                        help='grid-search the SmoothGrad noise level on validation data')
    common.add_argument('--force', action='store_true', help='rerun cached stages')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for details')

    parser = argparse.ArgumentParser(
        prog='salient',
        description='Adversarially trained saliency maps on synthetic activation images.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + '.'.join(map(str, VERSION)))
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    subparsers = dict((command, commands.add_parser(command, parents=[common], help=help))
                      for command, _, help in COMMANDS)
    train = subparsers['train']
    train.add_argument('--dataset', metavar='FILE',
                       help='train one model on this dataset file instead of the run splits')
    train.add_argument('--validation', metavar='FILE',
                       help='validation dataset file for early stopping (with --dataset)')
    train.add_argument('--model', choices=list(MODELS),
                       help='model to train with --dataset (default: linear)')
    saliency = subparsers['saliency']
    saliency.add_argument('--checkpoint', metavar='FILE',
                          help='compute maps of this checkpoint file (with --dataset)')
    saliency.add_argument('--dataset', metavar='FILE',
                          help='compute maps for every example of this dataset file')
    saliency.add_argument('--method',
                          help='saliency method for --checkpoint (default: gradient)')
    return parser


def run_standalone(pipeline, args):
    """Train or map dataset/checkpoint files named on the command line.

    Returns the written paths, or None when the command runs the pipeline.
    """
    if args.command == 'train':
        if args.dataset is None:
            if args.validation is not None or args.model is not None:
                raise ConfigError(u'--validation and --model need --dataset')
            return None
        return pipeline.train_external(args.model or 'linear', args.dataset, args.validation)
    if args.command == 'saliency':
        if args.checkpoint is None and args.dataset is None:
            if args.method is not None:
                raise ConfigError(u'--method needs --checkpoint and --dataset')
            return None
        if args.checkpoint is None or args.dataset is None:
            raise ConfigError(u'saliency needs both --checkpoint and --dataset')
        return [pipeline.saliency_external(args.checkpoint, args.dataset,
                                           args.method or 'gradient')]
    return None


def parse_override(text):
    """
    >>> parse_override('training.adversarial.epsilon=0.5')
    ('training.adversarial.epsilon', '0.5')
    >>> parse_override('epsilon')
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: --set expects SECTION.KEY=VALUE, got 'epsilon'
    """
    path, sep, value = text.partition('=')
    if not sep or not path:
        raise ConfigError(u'--set expects SECTION.KEY=VALUE, got %r' % text)
    return path.strip(), value


def overrides_from_args(args):
    overrides = [parse_override(text) for text in args.overrides]
    if args.seed is not None:
        overrides += [('data.seed', args.seed), ('training.common.seed', args.seed)]
    if args.jobs is not None:
        overrides.append(('jobs', args.jobs))
    if args.pgd:
        overrides.append(('training.adversarial.regime', 'pgd'))
    if args.tune_sigma:
        overrides.append(('saliency.tune_sigma', True))
    return overrides


def _configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    logging.captureWarnings(True)


def _fail(code, error):
    sys.stderr.write(u'salient: error: %s\n' % error)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = load_config(args.config, overrides_from_args(args))
        pipeline = Pipeline(config, args.out_dir)
        paths = run_standalone(pipeline, args)
        if paths is None:
            manifest = pipeline.run(STAGE_FOR[args.command], args.force)
    except DivergenceError as e:
        log.debug('divergence state: %r', e.state)
        return _fail(EXIT_DIVERGENCE, e)
    except DataError as e:
        return _fail(EXIT_DATA, e)
    except (ConfigError, UnsupportedMethodError) as e:
        return _fail(EXIT_CONFIG, e)
    except OSError as e:
        return _fail(EXIT_IO, e)
    if paths is not None:
        sys.stdout.write(''.join(path + '\n' for path in paths))
        return EXIT_OK
    log.info('%r', manifest)
    sys.stdout.write(pipeline.run_dir + '\n')
    return EXIT_OK


if __name__=="__main__":
    sys.exit(main())

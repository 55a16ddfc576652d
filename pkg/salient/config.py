# coding: utf-8
"""Experiment configuration: defaults, merging, validation and hashing.

A configuration is a nested dict merged onto ``DEFAULT_CONFIG``; files are
JSON.  Unknown keys are rejected everywhere::

    >>> cfg = merge_config({'data': {'sigma': 0.25}})
    >>> cfg['data']['sigma'], cfg['data']['n_per_class']
    (0.25, 1000)
    >>> merge_config({'data': {'noise': 0.25}})
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: Unknown config key data.noise
"""
import copy
import json
import logging
from collections import OrderedDict

from .base import ConfigError
from .saliency import SaliencyMethod
from .synthdata import RegionSpec
from .training import TrainingConfig
from .util import canonical_json, parse_value, text_digest

__all__ = ['CONFIG_VERSION', 'DEFAULT_CONFIG', 'METHODS', 'MODELS', 'merge_config',
           'validate_config', 'load_config', 'save_config', 'config_hash',
           'set_path', 'training_options', 'required_models']

log = logging.getLogger(__name__)

CONFIG_VERSION = 1

# method name -> (model, saliency method)
METHODS = OrderedDict([
    ('linear_weights', ('linear', 'linear_weights')),
    ('linear_gradient', ('linear', 'gradient')),
    ('nn_gradient', ('nn_plain', 'gradient')),
    ('nn_gradient_times_input', ('nn_plain', 'gradient_times_input')),
    ('nn_random_gradient', ('nn_random', 'gradient')),
    ('nn_smoothgrad', ('nn_plain', 'smoothgrad')),
    ('nn_adversarial_gradient', ('nn_adversarial', 'gradient')),
])

# model name -> training section
MODELS = OrderedDict([
    ('linear', 'plain'),
    ('nn_plain', 'plain'),
    ('nn_random', 'random_ball'),
    ('nn_adversarial', 'adversarial'),
])

DEFAULT_CONFIG = {
    'version': CONFIG_VERSION,
    'data': {
        'height': 32,
        'width': 32,
        'num_classes': 3,
        'region_size': 3,
        'shared_regions': 3,
        'layout': None,
        'sigma': 0.5,
        'n_per_class': 1000,
        'seed': 0,
    },
    'models': {
        'hidden_widths': [20],
    },
    'training': {
        'common': {
            'optimizer': 'adam',
            'learning_rate': 1e-3,
            'l2_coefficient': 1e-3,
            'batch_size': None,
            'max_epochs': 200,
            'patience': 20,
            'seed': 0,
        },
        'plain': {},
        'random_ball': {
            'epsilon': 1.0,
            'surface': False,
        },
        'adversarial': {
            'regime': 'algorithm1',
            'epsilon': 1.0,
            'hop_steps': 3,
            'pgd_steps': 3,
        },
    },
    'saliency': {
        'smoothgrad_sigma': 0.3,
        'smoothgrad_samples': 50,
        'tune_sigma': False,
        'sigma_grid': [0.05, 0.1, 0.2, 0.3, 0.5, 1.0],
        'tune_examples': 300,
    },
    'evaluation': {
        'methods': list(METHODS),
        'criterion1': True,
        'criterion2': True,
        'bonferroni_family': 'per_criterion',
        'mask': False,
        'max_examples': None,
    },
    'export': {
        'percentile': 99.9999,
        'palette': 'gray',
        'png': False,
        'scale': 4,
        'margin': 2,
        'normalize_average': False,
    },
    'jobs': 1,
}

# sections whose keys are TrainingConfig options rather than fixed defaults
_OPEN_SECTIONS = (('training', 'plain'), ('training', 'random_ball'),
                  ('training', 'adversarial'), ('training', 'common'))


def _merge(base, override, path):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = path + (key,)
        if path in _OPEN_SECTIONS:
            if key not in TrainingConfig.default_options:
                raise ConfigError(u'Unknown config key %s' % '.'.join(where))
            merged[key] = copy.deepcopy(value)
        elif not isinstance(base, dict) or key not in base:
            raise ConfigError(u'Unknown config key %s' % '.'.join(where))
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(u'%s must be a mapping, got %r' % ('.'.join(where), value))
            merged[key] = _merge(base[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def merge_config(overrides=None, base=None):
    """Overlay ``overrides`` on ``base`` (default: DEFAULT_CONFIG) and validate."""
    config = _merge(DEFAULT_CONFIG if base is None else base, overrides or {}, ())
    validate_config(config)
    return config


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require(ok, key, message, value):
    if not ok:
        raise ConfigError(u'%s %s, got %r' % (key, message, value))


def training_options(config, model):
    """TrainingConfig options for one of the four models."""
    sections = config['training']
    if model not in MODELS:
        raise ConfigError(u'unknown model %r' % model)
    section = MODELS[model]
    options = dict(sections['common'])
    options.update(sections[section])
    if section != 'adversarial':
        options['regime'] = section
    return options


def required_models(config):
    return [m for m in MODELS
            if any(METHODS[name][0] == m for name in config['evaluation']['methods'])]


def validate_config(config):
    """Check types and ranges of a merged configuration."""
    _require(config.get('version') == CONFIG_VERSION, 'version', 'must be %d' % CONFIG_VERSION,
             config.get('version'))
    data = config['data']
    for key in ('height', 'width', 'num_classes', 'region_size', 'shared_regions',
                'n_per_class', 'seed'):
        _require(_is_int(data[key]), 'data.' + key, 'must be an integer', data[key])
    _require(data['num_classes'] >= 2, 'data.num_classes', 'must be >= 2', data['num_classes'])
    _require(data['n_per_class'] >= 2, 'data.n_per_class', 'must be >= 2', data['n_per_class'])
    _require(data['region_size'] >= 1, 'data.region_size', 'must be >= 1', data['region_size'])
    _require(data['shared_regions'] >= 0, 'data.shared_regions', 'must be >= 0',
             data['shared_regions'])
    _require(_is_real(data['sigma']) and data['sigma'] >= 0, 'data.sigma', 'must be >= 0',
             data['sigma'])
    if data['layout'] is not None:
        _require(isinstance(data['layout'], list) and data['layout'], 'data.layout',
                 'must be null or a list of regions', data['layout'])
        try:
            [RegionSpec.from_dict(region) for region in data['layout']]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(u'data.layout: bad region: %s' % e)

    widths = config['models']['hidden_widths']
    _require(isinstance(widths, list) and widths and all(_is_int(w) and w >= 1 for w in widths),
             'models.hidden_widths', 'must be a non-empty list of positive integers', widths)

    for model in MODELS:
        TrainingConfig(training_options(config, model))

    saliency = config['saliency']
    _require(_is_real(saliency['smoothgrad_sigma']) and saliency['smoothgrad_sigma'] >= 0,
             'saliency.smoothgrad_sigma', 'must be >= 0', saliency['smoothgrad_sigma'])
    _require(_is_int(saliency['smoothgrad_samples']) and saliency['smoothgrad_samples'] >= 1,
             'saliency.smoothgrad_samples', 'must be >= 1', saliency['smoothgrad_samples'])
    _require(isinstance(saliency['tune_sigma'], bool), 'saliency.tune_sigma',
             'must be true or false', saliency['tune_sigma'])
    grid = saliency['sigma_grid']
    _require(isinstance(grid, list) and grid and all(_is_real(s) and s >= 0 for s in grid),
             'saliency.sigma_grid', 'must be a non-empty list of reals >= 0', grid)
    _require(_is_int(saliency['tune_examples']) and saliency['tune_examples'] >= 1,
             'saliency.tune_examples', 'must be >= 1', saliency['tune_examples'])

    evaluation = config['evaluation']
    methods = evaluation['methods']
    _require(isinstance(methods, list) and methods, 'evaluation.methods',
             'must be a non-empty list', methods)
    unknown = [m for m in methods if m not in METHODS]
    _require(not unknown, 'evaluation.methods', 'names unknown methods %s' % unknown, methods)
    _require(len(set(methods)) == len(methods), 'evaluation.methods', 'has duplicates', methods)
    for key in ('criterion1', 'criterion2', 'mask'):
        _require(isinstance(evaluation[key], bool), 'evaluation.' + key,
                 'must be true or false', evaluation[key])
    _require(evaluation['criterion1'] or evaluation['criterion2'], 'evaluation',
             'must enable at least one criterion', evaluation)
    _require(evaluation['bonferroni_family'] in ('per_criterion', 'global'),
             'evaluation.bonferroni_family', 'must be per_criterion or global',
             evaluation['bonferroni_family'])
    limit = evaluation['max_examples']
    _require(limit is None or (_is_int(limit) and limit >= 2), 'evaluation.max_examples',
             'must be null or >= 2', limit)

    export = config['export']
    _require(_is_real(export['percentile']) and 0 < export['percentile'] <= 100,
             'export.percentile', 'must be in (0, 100]', export['percentile'])
    _require(export['palette'] in ('gray', 'diverging'), 'export.palette',
             'must be gray or diverging', export['palette'])
    _require(_is_int(export['scale']) and export['scale'] >= 1, 'export.scale',
             'must be >= 1', export['scale'])
    _require(_is_int(export['margin']) and export['margin'] >= 0, 'export.margin',
             'must be >= 0', export['margin'])
    for key in ('png', 'normalize_average'):
        _require(isinstance(export[key], bool), 'export.' + key,
                 'must be true or false', export[key])
    _require(_is_int(config['jobs']) and config['jobs'] >= 1, 'jobs', 'must be >= 1',
             config['jobs'])
    # method plugins must exist for every configured method
    for name in methods:
        SaliencyMethod.resolve(METHODS[name][1])
    return config


def load_config(path=None, overrides=None):
    """Read a JSON config file (or none) and apply ``--set`` style overrides."""
    config = {}
    if path is not None:
        with open(path, encoding='utf-8') as f:
            try:
                config = json.load(f)
            except ValueError as e:
                raise ConfigError(u'%s is not valid JSON: %s' % (path, e))
        if not isinstance(config, dict):
            raise ConfigError(u'%s must hold a JSON object' % path)
    config = _merge(DEFAULT_CONFIG, config, ())
    for dotted, value in (overrides or []):
        set_path(config, dotted, value)
    validate_config(config)
    return config


def save_config(config, path):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps(config, sort_keys=True, indent=2) + '\n')


def set_path(config, dotted, value):
    """Assign ``value`` at a dotted path; strings are parsed as JSON first.

    >>> cfg = copy.deepcopy(DEFAULT_CONFIG)
    >>> set_path(cfg, 'training.adversarial.regime', 'pgd')
    >>> cfg['training']['adversarial']['regime']
    'pgd'
    >>> set_path(cfg, 'export.scael', '2')
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: Unknown config key export.scael
    """
    if isinstance(value, str):
        value = parse_value(value)
    override = value
    for key in reversed(dotted.split('.')):
        override = {key: override}
    merged = _merge(config, override, ())
    config.clear()
    config.update(merged)


def config_hash(config):
    """SHA-256 of the canonical JSON form; ``jobs`` does not change results."""
    hashed = dict((k, v) for k, v in config.items() if k != 'jobs')
    return text_digest(canonical_json(hashed))


if __name__=="__main__":
    from doctest import testmod
    testmod()

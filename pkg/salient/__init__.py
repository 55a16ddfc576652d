# coding: utf-8
"""salient -- saliency maps of adversarially trained classifiers, scored
against synthetic ground truth.
"""
import importlib
import logging

from .base import (ConfigError, DataError, DegenerateInputError, DivergenceError,
                   SalientError, UnsupportedMethodError)
from .__version__ import VERSION
from .numerics import Grid, RandomSource, paired_t_test, pearson
from .models import (DifferentiableClassifier, forward, input_gradient, load_checkpoint,
                     multinomial_regression, neural_network, parameter_gradient,
                     predict_class, save_checkpoint)
from .synthdata import (Dataset, GroundTruth, RegionSpec, build_templates,
                        generate_dataset, informative_map, pairwise_difference_map)
from .training import (Regime, TrainingConfig, algorithm1_epoch, calibrate_temperature,
                       perturb_random_ball, pgd_attack, train)
from .saliency import (SaliencyMap, SaliencyMethod, SaliencyRequest, gradient_map,
                       gradient_times_input_map, linear_weight_map, saliency_map,
                       smoothgrad_map)
from .evaluation import (CriterionScore, EvaluationReport, compare_methods,
                         score_criterion1, score_criterion2)
from .image import export_map_image
from .report import export_scores_csv
from .pipeline import RunManifest, run_pipeline

__version__ = '.'.join(map(str, VERSION))

logging.getLogger(__name__).addHandler(logging.NullHandler())

DEFAULT_PLUGINS = [
    ('salient.saliency', 'SaliencyMethod'),
    ('salient.training', 'Regime'),
]


def load_plugins():
    for module_name, root in DEFAULT_PLUGINS:
        getattr(importlib.import_module(module_name), root).update_registry()
load_plugins()


def compute_map(method, model, input, target_class, options=None, rng=None, **kw):
    """Compute one saliency map by method name.

    >>> model = multinomial_regression(4, 2, RandomSource(0))
    >>> compute_map('nonexistent', model, Grid.zeros(2, 2), 0)
    Traceback (most recent call last):
    ...
    salient.base.UnsupportedMethodError: No saliency method for name nonexistent
    >>> compute_map('weights', model, Grid.zeros(2, 2), 1).values.shape
    (2, 2)
    """
    options = dict(options or {}, **kw)
    request = SaliencyRequest(method, target_class,
                              options.pop('sigma', None), options.pop('samples', None))
    if options:
        raise ConfigError(u'Unknown option for %s: %s' % (request.method, ', '.join(sorted(options))))
    return saliency_map(model, input, request, rng)


if __name__=="__main__":
    from doctest import testmod
    testmod()

# -*- coding: utf-8 -*-
"""End-to-end checks of the synthetic experiment at full size.

The default configuration takes a few minutes; these run only with
``pytest --run-acceptance``.  The two checks at the bottom always run.
"""
import numpy as np
import pytest

from salient.config import merge_config
from salient.evaluation import score_criterion1, score_criterion2
from salient.models import (DenseLayer, DifferentiableClassifier, input_gradients,
                            logits_batch, nll, predict_classes)
from salient.numerics import RandomSource
from salient.pipeline import STAGES, Pipeline
from salient.saliency import linear_weight_map
from salient.synthdata import generate_dataset
from salient.training import calibrate_temperature, saturation_temperature

MODELS = ('linear', 'nn_plain', 'nn_random', 'nn_adversarial')
OTHER_NN = ('nn_gradient', 'nn_random_gradient', 'nn_smoothgrad')


@pytest.fixture(scope='session')
def experiment(tmp_path_factory):
    pipeline = Pipeline(merge_config(), str(tmp_path_factory.mktemp('acceptance')))
    pipeline.run()
    return pipeline


@pytest.fixture(scope='session')
def report(experiment):
    return experiment.evaluation()[0]


def _better(report, criterion, a, b, alpha=0.01):
    result = report.test(criterion, a, b)
    return result.t_statistic > 0 and result.p_adjusted < alpha


@pytest.mark.acceptance
@pytest.mark.parametrize('name', MODELS)
def test_every_model_classifies_the_test_set(experiment, name):
    test = experiment.dataset('test')
    assert len(test) == 3000
    accuracy = np.mean(predict_classes(experiment.model(name), test.flat_inputs) == test.labels)
    assert accuracy >= 0.995


@pytest.mark.acceptance
@pytest.mark.parametrize('other', OTHER_NN)
def test_adversarial_gradients_win_criterion1(report, other):
    assert _better(report, 'criterion1', 'nn_adversarial_gradient', other)


@pytest.mark.acceptance
def test_model_class_ordering_on_criterion1(report):
    assert _better(report, 'criterion1', 'linear_gradient', 'linear_weights')
    assert _better(report, 'criterion1', 'nn_gradient', 'linear_gradient')


@pytest.mark.acceptance
@pytest.mark.parametrize('other', OTHER_NN + ('nn_adversarial_gradient', 'linear_gradient'))
def test_gradient_times_input_is_worst(report, other):
    assert _better(report, 'criterion1', other, 'nn_gradient_times_input')


@pytest.mark.acceptance
def test_criterion2_ordering(report):
    for other in OTHER_NN:
        assert _better(report, 'criterion2', 'nn_adversarial_gradient', other)
    assert _better(report, 'criterion2', 'nn_gradient', 'nn_random_gradient')
    assert report.test('criterion2', 'nn_smoothgrad', 'nn_gradient').p_adjusted >= 0.05


@pytest.mark.acceptance
@pytest.mark.parametrize('name', MODELS)
def test_trained_models_conserve_probability(experiment, name):
    model = experiment.model(name)
    X = experiment.dataset('test').flat_inputs
    total = sum(input_gradients(model, X, c) for c in range(model.num_classes))
    assert np.max(np.abs(total)) < 1e-10


@pytest.mark.acceptance
@pytest.mark.parametrize('name', MODELS)
def test_calibration_helps_and_keeps_predictions(experiment, name):
    validation = experiment.dataset('validation')
    X, y = validation.flat_inputs, validation.labels
    raw, calibrated = experiment.model(name, calibrated=False), experiment.model(name)
    floor = saturation_temperature(logits_batch(raw, X))
    assert calibrated.temperature >= floor * (1 - 1e-9)
    if floor <= 1.0:
        assert nll(calibrated, X, y) <= nll(raw, X, y)
    assert np.array_equal(predict_classes(calibrated, X), predict_classes(raw, X))


@pytest.mark.acceptance
def test_every_stage_completes_with_informative_maps(experiment):
    assert experiment.manifest.completed_stages == list(STAGES)
    for method in experiment.methods:
        _, maps, labels = experiment.maps(method)
        own = maps[np.arange(len(labels)), labels].reshape(len(labels), -1)
        assert np.all(own.max(axis=1) > own.min(axis=1)), method


@pytest.mark.acceptance
def test_linear_weights_resemble_class_a(experiment):
    truth = experiment.ground_truth()
    weights = linear_weight_map(experiment.model('linear'), 0)
    r = np.corrcoef(weights.values.flat, truth.informative_maps[0].flat)[0, 1]
    assert r > 0.2


def test_oracle_maps_score_one_on_both_criteria(ground_truth):
    labels = np.repeat([0, 1, 2], 20)
    own = [ground_truth.informative_maps[c] for c in labels]
    pairs = [dict((t, ground_truth.pairwise_difference_maps[(s, t)])
                  for t in range(3) if t != s) for s in labels]
    assert score_criterion1(own, labels, ground_truth).mean == pytest.approx(1.0, abs=1e-12)
    assert score_criterion2(pairs, labels, ground_truth).mean == pytest.approx(1.0, abs=1e-12)


def test_calibrated_separator_keeps_scoreable_gradients(templates, ground_truth):
    # default data size; the template classifier separates it perfectly
    source = RandomSource(0)
    validation = generate_dataset(templates, 'validation', 1000, 0.5, source)
    test = generate_dataset(templates, 'test', 1000, 0.5, source)
    stack = templates.stack().reshape(templates.num_classes, -1)
    model = DifferentiableClassifier([DenseLayer(10.0 * stack, np.zeros(3))])
    assert np.array_equal(predict_classes(model, validation.flat_inputs), validation.labels)
    t = calibrate_temperature(model, validation)
    assert t == pytest.approx(
        saturation_temperature(logits_batch(model, validation.flat_inputs)), rel=1e-5)
    maps = input_gradients(model, test.flat_inputs, test.labels)
    assert np.all(maps.max(axis=1) > maps.min(axis=1))
    score = score_criterion1(maps.reshape(test.inputs.shape), test.labels, ground_truth)
    assert np.all(np.isfinite(score.correlations))
    assert score.mean > 0.5

# -*- coding: utf-8 -*-
import numpy as np
import pytest

from salient.config import merge_config
from salient.models import multinomial_regression, neural_network
from salient.numerics import RandomSource
from salient.synthdata import GroundTruth, build_templates, generate_dataset


def pytest_addoption(parser):
    parser.addoption('--run-acceptance', action='store_true', default=False,
                     help='run the full-size experiment checks')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-acceptance'):
        return
    skip = pytest.mark.skip(reason='needs --run-acceptance')
    for item in items:
        if 'acceptance' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope='session')
def templates():
    return build_templates()


@pytest.fixture(scope='session')
def ground_truth(templates):
    return GroundTruth.from_templates(templates)


@pytest.fixture(scope='session')
def small_splits(templates):
    source = RandomSource(11)
    return dict((split, generate_dataset(templates, split, 40, 0.5, source))
                for split in ('train', 'validation', 'test'))


@pytest.fixture
def linear_model():
    return multinomial_regression(1024, 3, RandomSource(3))


@pytest.fixture
def network():
    return neural_network(1024, [20], 3, RandomSource(4))


@pytest.fixture
def tiny_config():
    """A run that finishes in seconds: small splits, few epochs."""
    return merge_config({
        'data': {'n_per_class': 12},
        'training': {'common': {'max_epochs': 5, 'patience': 0}},
        'saliency': {'smoothgrad_samples': 3},
        'export': {'scale': 1, 'margin': 1},
    })


def random_model(rng, n_inputs, hidden, n_classes):
    source = RandomSource(int(rng.integers(0, 2 ** 31)))
    if hidden:
        model = neural_network(n_inputs, hidden, n_classes, source)
    else:
        model = multinomial_regression(n_inputs, n_classes, source)
    for layer in model.layers:
        layer.biases[:] = rng.normal(0.0, 0.5, layer.biases.shape)
    model.temperature = float(rng.uniform(0.5, 2.0))
    return model


@pytest.fixture
def make_random_model():
    return random_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

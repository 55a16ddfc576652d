# -*- coding: utf-8 -*-
import warnings

import numpy as np
import pytest

import salient
from salient.base import ConfigError, DataError, UnsupportedMethodError
from salient.models import input_gradient, input_gradients
from salient.numerics import Grid, RandomSource
from salient.saliency import (SaliencyMethod, SaliencyRequest, average_maps, batch_maps,
                              gradient_map, gradient_times_input_map, linear_weight_map,
                              saliency_map, smoothgrad_map)

pytestmark = pytest.mark.filterwarnings('ignore:gradient saliency requested')


@pytest.fixture
def example(small_splits):
    return small_splits['test'].examples[50]


def test_registered_methods():
    assert sorted(SaliencyMethod.names()) == [
        'gradient', 'gradient_times_input', 'linear_weights', 'smoothgrad']
    with pytest.raises(UnsupportedMethodError):
        SaliencyMethod.resolve('integrated_gradients')


def test_linear_weights_ignore_the_input(linear_model, small_splits):
    inputs = small_splits['test'].inputs[:4]
    maps = batch_maps(linear_model, inputs, 2, 'linear_weights')
    expected = linear_model.layers[0].weights[2].reshape(32, 32)
    for m in maps:
        assert np.array_equal(m, expected)
    assert np.array_equal(linear_weight_map(linear_model, 2).values.values, expected)


def test_linear_weights_need_a_linear_model(network):
    with pytest.raises(UnsupportedMethodError):
        linear_weight_map(network, 0)


def test_gradient_map_is_the_input_gradient(network, example):
    m = gradient_map(network, example.grid, 1)
    assert m.method == 'gradient' and m.target_class == 1
    assert m.values == input_gradient(network, example.grid, 1)


def test_gradient_times_input(network, example):
    grad = gradient_map(network, example.grid, 0).values.values
    gxi = gradient_times_input_map(network, example.grid, 0).values.values
    assert np.array_equal(gxi, grad * example.grid.values)


def test_smoothgrad_is_reproducible(network, example):
    a = smoothgrad_map(network, example.grid, 2, 0.3, 10, RandomSource(1))
    b = smoothgrad_map(network, example.grid, 2, 0.3, 10, RandomSource(1))
    c = smoothgrad_map(network, example.grid, 2, 0.3, 10, RandomSource(2))
    assert a.values == b.values
    assert a.values != c.values


def test_smoothgrad_without_noise_is_the_gradient(network, example):
    m = smoothgrad_map(network, example.grid, 0, sigma=0.0, n_samples=5)
    assert np.allclose(m.values.values, gradient_map(network, example.grid, 0).values.values)


def test_smoothgrad_averages_noisy_gradients(network, example):
    sigma, samples = 0.4, 6
    gen = RandomSource(7).generator
    x = example.grid.flat[None, :]
    expected = np.mean([input_gradients(network, x + sigma * gen.standard_normal(x.shape), 1)[0]
                        for _ in range(samples)], axis=0)
    got = smoothgrad_map(network, example.grid, 1, sigma, samples, RandomSource(7))
    assert np.allclose(got.values.flat, expected, rtol=0, atol=1e-12)


def test_smoothgrad_needs_a_random_source(network, example):
    with pytest.raises(ConfigError):
        batch_maps(network, example.grid.values[None], 0, 'smoothgrad', sigma=0.3, samples=2)


def test_request_validation():
    request = SaliencyRequest('smooth_grad', 1)
    assert request.method_options() == dict(sigma=0.3, samples=50)
    assert SaliencyRequest('grad', 0).method_options() == {}
    with pytest.raises(ConfigError):
        SaliencyRequest('smoothgrad', 0, smoothgrad_sigma=-1.0)
    with pytest.raises(ConfigError):
        SaliencyRequest('gradient', 0, smoothgrad_samples=3)


def test_saliency_map_from_request(network, example):
    request = SaliencyRequest('smoothgrad', 2, smoothgrad_sigma=0.2, smoothgrad_samples=4)
    m = saliency_map(network, example.grid, request, RandomSource(3))
    assert m.method == 'smoothgrad' and m.values.shape == (32, 32)
    with pytest.raises(DataError):
        saliency_map(network, example.grid, SaliencyRequest('gradient', 3))


def test_gradient_warns_for_uncalibrated_models(network, example):
    with pytest.warns(UserWarning, match='never calibrated'):
        gradient_map(network, example.grid, 0)
    network.calibrated = True
    with warnings.catch_warnings():
        warnings.simplefilter('error')
        gradient_map(network, example.grid, 0)
        linear = salient.multinomial_regression(1024, 3, RandomSource(0))
        linear_weight_map(linear, 0)


def test_batch_maps_shapes(network, small_splits):
    ds = small_splits['test']
    maps = batch_maps(network, ds.inputs[:7], ds.labels[:7], 'gradient')
    assert maps.shape == (7, 32, 32)
    for i in (0, 6):
        expected = gradient_map(network, Grid(ds.inputs[i]), ds.labels[i]).values.values
        assert np.allclose(maps[i], expected, rtol=0, atol=1e-12)
    with pytest.raises(DataError):
        batch_maps(network, ds.inputs[:3], [0, 1], 'gradient')


def test_average_maps():
    maps = [np.full((2, 2), 2.0), np.full((2, 2), -4.0)]
    assert average_maps(maps).values.tolist() == [[-1.0, -1.0], [-1.0, -1.0]]
    assert average_maps(maps, normalize=True).values.tolist() == [[0.0, 0.0], [0.0, 0.0]]
    assert average_maps([np.zeros((2, 2))], normalize=True).values.sum() == 0.0
    with pytest.raises(DataError):
        average_maps([])


def test_compute_map_by_name(linear_model, example):
    m = salient.compute_map('gxi', linear_model, example.grid, 0)
    assert m.method == 'gradient_times_input'
    with pytest.raises(ConfigError):
        salient.compute_map('gradient', linear_model, example.grid, 0, alpha=1)


@pytest.mark.parametrize('as_array', [False, True])
def test_single_maps_of_a_full_size_grid(network, linear_model, example, as_array):
    x = example.grid.values.copy() if as_array else example.grid
    rows = example.grid.values[None]
    singles = [
        (gradient_map(network, x, 1), batch_maps(network, rows, 1, 'gradient')),
        (gradient_times_input_map(network, x, 1),
         batch_maps(network, rows, 1, 'gradient_times_input')),
        (smoothgrad_map(network, x, 1, 0.3, 4, RandomSource(5)),
         batch_maps(network, rows, 1, 'smoothgrad', RandomSource(5), sigma=0.3, samples=4)),
        (saliency_map(network, x, SaliencyRequest('gradient', 2)),
         batch_maps(network, rows, 2, 'gradient')),
        (salient.compute_map('gradient', network, x, 0), batch_maps(network, rows, 0, 'gradient')),
        (linear_weight_map(linear_model, 0), batch_maps(linear_model, rows, 0, 'weights')),
    ]
    for single, batch in singles:
        assert single.values.shape == (32, 32)
        assert np.allclose(single.values.values, batch[0], rtol=0, atol=1e-12)
    assert input_gradient(network, x, 1).shape == (32, 32)

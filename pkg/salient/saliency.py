# coding: utf-8
"""Saliency maps: linear weights, input gradients, gradient x input, SmoothGrad.

Methods are plugins looked up by name, the same way the registry resolves
training regimes::

    >>> SaliencyMethod.resolve('gxi').name
    'gradient_times_input'
    >>> SaliencyMethod.resolve('lrp')
    Traceback (most recent call last):
    ...
    salient.base.UnsupportedMethodError: No saliency method for name lrp
"""
import logging
import warnings

import numpy as np

from .base import ConfigError, DataError, Plugin, UnsupportedMethodError
from .models import as_batch, input_gradients
from .numerics import Grid, RandomSource

__all__ = ['SaliencyRequest', 'SaliencyMap', 'SaliencyMethod', 'saliency_map',
           'linear_weight_map', 'gradient_map', 'gradient_times_input_map',
           'smoothgrad_map', 'batch_maps', 'average_maps',
           'DEFAULT_SMOOTHGRAD_SIGMA', 'DEFAULT_SMOOTHGRAD_SAMPLES']

log = logging.getLogger(__name__)

DEFAULT_SMOOTHGRAD_SIGMA = 0.3
DEFAULT_SMOOTHGRAD_SAMPLES = 50


class SaliencyMap(object):
    """Map values with the method and target class that produced them."""
    __slots__ = ('values', 'method', 'target_class', 'source_example')

    def __init__(self, values, method, target_class, source_example=None):
        self.values = values if isinstance(values, Grid) else Grid(values)
        self.method = method
        self.target_class = target_class
        self.source_example = source_example

    def __repr__(self):
        return '<SaliencyMap %s class=%s %dx%d>' % (
            (self.method, self.target_class) + self.values.shape)


class SaliencyMethod(Plugin):
    """Base class of saliency methods.

    ``compute_batch(model, X, targets, rng)`` returns an ``(n, d)`` array of
    maps for the rows of ``X``.
    """
    kind = 'saliency method'
    registry = None
    needs_rng = False

    def compute_batch(self, model, X, targets, rng=None):
        raise NotImplementedError

    @staticmethod
    def warn_uncalibrated(model):
        if not getattr(model, 'calibrated', False):
            warnings.warn('gradient saliency requested from a model whose '
                          'temperature was never calibrated', UserWarning, stacklevel=4)


class LinearWeights(SaliencyMethod):
    """Row ``w_c`` of a single-layer model, the same for every input."""
    name = 'linear_weights'
    aliases = ('weights', 'linear-weights')

    def compute_batch(self, model, X, targets, rng=None):
        if not model.is_linear:
            raise UnsupportedMethodError(
                u'linear_weights needs a single-layer model, got %d layers' % len(model.layers))
        return model.layers[0].weights[np.asarray(targets)].copy()


class Gradient(SaliencyMethod):
    name = 'gradient'
    aliases = ('grad', 'input_gradient')

    def compute_batch(self, model, X, targets, rng=None):
        self.warn_uncalibrated(model)
        return input_gradients(model, X, targets)


class GradientTimesInput(SaliencyMethod):
    name = 'gradient_times_input'
    aliases = ('gxi', 'gradient*input', 'gradient_x_input')

    def compute_batch(self, model, X, targets, rng=None):
        self.warn_uncalibrated(model)
        return input_gradients(model, X, targets) * X


class SmoothGrad(SaliencyMethod):
    """Mean input gradient over Gaussian-perturbed copies of the input.

    With ``sigma == 0`` no noise is drawn and the plain gradient is returned.
    """
    name = 'smoothgrad'
    aliases = ('smooth_grad', 'smooth-grad')
    needs_rng = True
    default_options = dict(sigma=DEFAULT_SMOOTHGRAD_SIGMA,
                           samples=DEFAULT_SMOOTHGRAD_SAMPLES)

    def compute_batch(self, model, X, targets, rng=None):
        self.warn_uncalibrated(model)
        sigma = self.lookup_option('sigma')
        samples = int(self.lookup_option('samples'))
        if sigma < 0:
            raise ConfigError(u'SmoothGrad sigma must be >= 0, got %r' % sigma)
        if samples < 1:
            raise ConfigError(u'SmoothGrad needs at least one sample, got %r' % samples)
        if sigma == 0:
            return input_gradients(model, X, targets)
        gen = _generator(rng)
        total = np.zeros_like(X)
        for _ in range(samples):
            total += input_gradients(model, X + sigma * gen.standard_normal(X.shape), targets)
        return total / samples


SaliencyMethod.update_registry()


def _generator(rng):
    if rng is None:
        raise ConfigError(u'SmoothGrad needs a random source')
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomSource(rng).generator


class SaliencyRequest(object):
    """What map to compute for which class.

    >>> SaliencyRequest('smoothgrad', 0, smoothgrad_sigma=0.3, smoothgrad_samples=50).method
    'smoothgrad'
    >>> SaliencyRequest('gradient', 1, smoothgrad_sigma=0.3)
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: smoothgrad fields are only valid for method smoothgrad
    """

    def __init__(self, method, target_class, smoothgrad_sigma=None, smoothgrad_samples=None):
        self.method = SaliencyMethod.resolve(method).name
        self.target_class = int(target_class)
        has_fields = smoothgrad_sigma is not None or smoothgrad_samples is not None
        if self.method == SmoothGrad.name:
            if smoothgrad_sigma is None:
                smoothgrad_sigma = DEFAULT_SMOOTHGRAD_SIGMA
            if smoothgrad_samples is None:
                smoothgrad_samples = DEFAULT_SMOOTHGRAD_SAMPLES
            if smoothgrad_sigma < 0 or smoothgrad_samples < 1:
                raise ConfigError(u'need smoothgrad_sigma >= 0 and smoothgrad_samples >= 1')
        elif has_fields:
            raise ConfigError(u'smoothgrad fields are only valid for method smoothgrad')
        self.smoothgrad_sigma = smoothgrad_sigma
        self.smoothgrad_samples = smoothgrad_samples

    def method_options(self):
        if self.method == SmoothGrad.name:
            return dict(sigma=self.smoothgrad_sigma, samples=self.smoothgrad_samples)
        return {}

    def __repr__(self):
        return '<SaliencyRequest %s class=%d>' % (self.method, self.target_class)


def _single(model, input, target_class, method, rng=None, **options):
    values = input.values if isinstance(input, Grid) else np.asarray(input, dtype=np.float64)
    shape = values.shape if values.ndim == 2 else (1, values.size)
    if not 0 <= int(target_class) < model.num_classes:
        raise DataError(u'class id %r out of range [0, %d)' % (target_class, model.num_classes))
    plugin = SaliencyMethod.resolve(method)(**options)
    row = plugin.compute_batch(model, as_batch(model, values.reshape(1, -1)),
                               [int(target_class)], rng)[0]
    return SaliencyMap(Grid(row, shape=shape), plugin.name, int(target_class))


def linear_weight_map(model, class_id, shape=None):
    """The weight row of ``class_id`` reshaped to the input grid.

    >>> from salient.models import DenseLayer, DifferentiableClassifier
    >>> model = DifferentiableClassifier([DenseLayer(np.arange(8.0).reshape(2, 4), [0, 0])])
    >>> linear_weight_map(model, 1, (2, 2)).values.values.tolist()
    [[4.0, 5.0], [6.0, 7.0]]
    """
    if shape is None:
        side = int(round(np.sqrt(model.num_inputs)))
        shape = (side, side) if side * side == model.num_inputs else (1, model.num_inputs)
    return _single(model, np.zeros(shape), class_id, LinearWeights.name)


def gradient_map(model, input, class_id):
    return _single(model, input, class_id, Gradient.name)


def gradient_times_input_map(model, input, class_id):
    return _single(model, input, class_id, GradientTimesInput.name)


def smoothgrad_map(model, input, class_id, sigma=DEFAULT_SMOOTHGRAD_SIGMA,
                   n_samples=DEFAULT_SMOOTHGRAD_SAMPLES, rng=0):
    return _single(model, input, class_id, SmoothGrad.name, rng,
                   sigma=sigma, samples=n_samples)


def saliency_map(model, input, request, rng=None):
    """Compute the map described by a SaliencyRequest."""
    return _single(model, input, request.target_class, request.method, rng,
                   **request.method_options())


def batch_maps(model, inputs, targets, method, rng=None, **options):
    """Maps for many inputs at once, as an ``(n, h, w)`` array.

    ``targets`` holds one class id per input (or one id for all of them).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    X = as_batch(model, inputs)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.size == 1:
        targets = np.repeat(targets, X.shape[0])
    plugin = SaliencyMethod.resolve(method)(**options)
    maps = plugin.compute_batch(model, X, targets, rng)
    return maps.reshape(inputs.shape if inputs.ndim == 3 else (X.shape[0], -1))


def average_maps(maps, normalize=False):
    """Average of a stack of maps, optionally after scaling each to max |v| = 1."""
    maps = np.asarray([m.values.values if isinstance(m, SaliencyMap) else np.asarray(m)
                       for m in maps], dtype=np.float64)
    if not len(maps):
        raise DataError(u'no maps to average')
    if normalize:
        peaks = np.abs(maps).reshape(len(maps), -1).max(axis=1)
        peaks[peaks == 0] = 1.0
        maps = maps / peaks.reshape((-1,) + (1,) * (maps.ndim - 1))
    return Grid(maps.mean(axis=0))


if __name__=="__main__":
    from doctest import testmod
    testmod()

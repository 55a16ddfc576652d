# coding: utf-8
"""Dense softmax classifiers with exact input and parameter gradients.

A classifier is a stack of ``DenseLayer`` objects followed by a softmax at
temperature ``t``.  Everything is computed in batches of row vectors; the
single-input helpers reshape a ``Grid`` into one row and back.
"""
import copy
import json
import logging

import numpy as np
from scipy.special import logsumexp

from .base import DataError, LabeledExample
from .numerics import Grid, RandomSource, check_finite

__all__ = ['DenseLayer', 'DifferentiableClassifier', 'Prediction',
           'multinomial_regression', 'neural_network', 'forward',
           'forward_batch', 'logits_batch', 'input_gradient', 'input_gradients',
           'parameter_gradient', 'predict_class', 'predict_classes', 'nll',
           'accuracy', 'as_batch', 'save_checkpoint', 'load_checkpoint',
           'checkpoint_dict', 'classifier_from_dict']

log = logging.getLogger(__name__)

NONLINEARITIES = ('relu', 'identity')
CHECKPOINT_FORMAT = 'salient-checkpoint'
CHECKPOINT_VERSION = 1


class DenseLayer(object):
    """``f(W x + b)`` with ``f`` one of relu/identity.

    >>> layer = DenseLayer(np.eye(2), [0.0, -1.0], 'relu')
    >>> layer.shape
    (2, 2)
    >>> DenseLayer(np.eye(2), [0.0], 'relu')
    Traceback (most recent call last):
    ...
    salient.base.DataError: biases must have 2 entries, got 1
    """

    def __init__(self, weights, biases, nonlinearity='identity'):
        weights = check_finite(weights, 'weights')
        biases = check_finite(biases, 'biases').ravel()
        if weights.ndim != 2:
            raise DataError(u'weights must be a matrix, got shape %r' % (weights.shape,))
        if biases.shape != (weights.shape[0],):
            raise DataError(u'biases must have %d entries, got %d'
                            % (weights.shape[0], biases.size))
        if nonlinearity not in NONLINEARITIES:
            raise DataError(u'Unknown nonlinearity %s' % nonlinearity)
        self.weights = weights.copy()
        self.biases = biases.copy()
        self.nonlinearity = nonlinearity

    @property
    def shape(self):
        return self.weights.shape

    def __repr__(self):
        return '<DenseLayer %dx%d %s>' % (self.shape + (self.nonlinearity,))


class DifferentiableClassifier(object):
    """Ordered dense layers followed by a temperature-scaled softmax.
    """

    def __init__(self, layers, temperature=1.0, calibrated=False):
        layers = list(layers)
        if not layers:
            raise DataError(u'a classifier needs at least one layer')
        for lower, upper in zip(layers, layers[1:]):
            if lower.shape[0] != upper.shape[1]:
                raise DataError(u'layer widths do not compose: %d -> %d'
                                % (lower.shape[0], upper.shape[1]))
        self.layers = layers
        self.temperature = temperature
        self.calibrated = calibrated

    @property
    def temperature(self):
        return self._temperature

    @temperature.setter
    def temperature(self, value):
        value = float(value)
        if not (value > 0 and np.isfinite(value)):
            raise DataError(u'temperature must be a positive finite number, got %r' % value)
        self._temperature = value

    @property
    def num_inputs(self):
        return self.layers[0].shape[1]

    @property
    def num_classes(self):
        return self.layers[-1].shape[0]

    @property
    def is_linear(self):
        return len(self.layers) == 1

    @property
    def architecture(self):
        return [dict(shape=list(layer.shape), nonlinearity=layer.nonlinearity)
                for layer in self.layers]

    def parameters(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live parameter arrays."""
        params = []
        for layer in self.layers:
            params.extend([layer.weights, layer.biases])
        return params

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        return copy.deepcopy(self)

    def __repr__(self):
        widths = [self.num_inputs] + [layer.shape[0] for layer in self.layers]
        return '<DifferentiableClassifier %s t=%g>' % (
            '-'.join(str(w) for w in widths), self.temperature)


class Prediction(object):
    __slots__ = ('probabilities', 'logits')

    def __init__(self, probabilities, logits):
        self.probabilities = probabilities
        self.logits = logits

    def __repr__(self):
        return '<Prediction %s>' % np.array2string(self.probabilities, precision=4)


def _scaled_init(rng, fan_out, fan_in):
    return rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)


def multinomial_regression(n_inputs, n_classes, rng):
    """Single linear layer + softmax.

    >>> multinomial_regression(1024, 3, RandomSource(0))
    <DifferentiableClassifier 1024-3 t=1>
    """
    gen = rng.generator if isinstance(rng, RandomSource) else rng
    return DifferentiableClassifier([
        DenseLayer(_scaled_init(gen, n_classes, n_inputs), np.zeros(n_classes))])


def neural_network(n_inputs, hidden_widths, n_classes, rng):
    """ReLU hidden layers and a linear output layer feeding the softmax.

    >>> neural_network(1024, [20], 3, RandomSource(0))
    <DifferentiableClassifier 1024-20-3 t=1>
    """
    gen = rng.generator if isinstance(rng, RandomSource) else rng
    widths = [n_inputs] + list(hidden_widths)
    layers = [DenseLayer(_scaled_init(gen, fan_out, fan_in), np.zeros(fan_out), 'relu')
              for fan_in, fan_out in zip(widths, widths[1:])]
    layers.append(DenseLayer(_scaled_init(gen, n_classes, widths[-1]), np.zeros(n_classes)))
    return DifferentiableClassifier(layers)


def as_batch(model, inputs):
    """Stack inputs (Grid, arrays or rows) into an ``(n, d)`` float array."""
    if isinstance(inputs, Grid):
        X = inputs.flat[None, :]
    elif isinstance(inputs, (list, tuple)) and inputs and isinstance(inputs[0], Grid):
        X = np.stack([grid.flat for grid in inputs])
    else:
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim == 0 or X.shape[0] == 0:
            raise DataError(u'no inputs given')
        X = X.reshape(1, -1) if X.ndim == 1 else X.reshape(X.shape[0], -1)
    if X.shape[1] != model.num_inputs:
        raise DataError(u'input has %d features, model expects %d'
                        % (X.shape[1], model.num_inputs))
    return X


def _one_row(input):
    """A single Grid or array of any shape as one ``(1, d)`` row."""
    return np.asarray(input, dtype=np.float64).reshape(1, -1)


def _labels(model, labels, count):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 1 and count > 1:
        labels = np.repeat(labels, count)
    if labels.size != count:
        raise DataError(u'%d labels for %d inputs' % (labels.size, count))
    if np.any(labels < 0) or np.any(labels >= model.num_classes):
        raise DataError(u'class id out of range [0, %d)' % model.num_classes)
    return labels


def _forward_cache(model, X):
    """Run the layers, keeping the inputs and pre-activations of each."""
    cache = []
    a = X
    for layer in model.layers:
        z = a.dot(layer.weights.T) + layer.biases
        cache.append((a, z))
        a = np.maximum(z, 0.0) if layer.nonlinearity == 'relu' else z
    return a, cache


def _softmax(scaled):
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _backward(model, cache, dlogits, need_params=True):
    """Reverse pass from d(objective)/d(logits) to inputs and parameters."""
    grads = []
    upstream = dlogits
    for layer, (a, z) in reversed(list(zip(model.layers, cache))):
        if layer.nonlinearity == 'relu':
            upstream = upstream * (z > 0)
        if need_params:
            grads.append((upstream.T.dot(a), upstream.sum(axis=0)))
        upstream = upstream.dot(layer.weights)
    grads.reverse()
    return upstream, grads


def logits_batch(model, inputs):
    X = as_batch(model, inputs)
    logits, _ = _forward_cache(model, X)
    return logits


def forward_batch(model, inputs):
    """Probabilities and logits for a batch, as two ``(n, classes)`` arrays."""
    logits = logits_batch(model, inputs)
    return _softmax(logits / model.temperature), logits


def forward(model, input):
    """
    >>> zero = DifferentiableClassifier([DenseLayer(np.zeros((3, 4)), np.zeros(3))])
    >>> forward(zero, np.ones(4)).probabilities.tolist() == [1/3.0] * 3
    True
    """
    probabilities, logits = forward_batch(model, _one_row(input))
    return Prediction(probabilities[0], logits[0])


def input_gradients(model, inputs, target_classes):
    """Rows of d p_t(y|x) / dx for every input and its target class.

    ``target_classes`` is one class id per row (or a single id for all).
    """
    X = as_batch(model, inputs)
    targets = _labels(model, target_classes, X.shape[0])
    logits, cache = _forward_cache(model, X)
    p = _softmax(logits / model.temperature)
    rows = np.arange(X.shape[0])
    p_target = p[rows, targets]
    # dp_c/dz_k = p_c (delta_ck - p_k) / t, with 1 - p_c summed from the
    # other classes so it survives p_c rounding to 1
    others = p.copy()
    others[rows, targets] = 0.0
    dlogits = -others * p_target[:, None]
    dlogits[rows, targets] = p_target * others.sum(axis=1)
    dlogits /= model.temperature
    dx, _ = _backward(model, cache, dlogits, need_params=False)
    return dx


def input_gradient(model, input, target_class):
    """Gradient of the temperature-scaled probability of ``target_class``.

    >>> zero = DifferentiableClassifier([DenseLayer(np.zeros((3, 4)), np.zeros(3))])
    >>> bool(input_gradient(zero, Grid(np.ones((2, 2))), 1).values.any())
    False
    """
    shape = input.shape if isinstance(input, Grid) else np.shape(input)
    dx = input_gradients(model, _one_row(input), [target_class])[0]
    if len(shape) == 2:
        return Grid(dx, shape=shape)
    return Grid(dx[None, :])


def _batch_arrays(model, batch):
    if isinstance(batch, tuple) and len(batch) == 2 and not isinstance(batch, LabeledExample):
        X, y = batch
    else:
        batch = list(batch)
        if not batch:
            raise DataError(u'parameter_gradient needs a non-empty batch')
        X = [example.grid for example in batch]
        y = [example.label for example in batch]
    X = as_batch(model, X)
    return X, _labels(model, y, X.shape[0])


def parameter_gradient(model, batch, l2_coefficient=0.0):
    """Gradient of the log-posterior for a batch.

    Returns ``[(dW, db), ...]`` for ``mean log p(y|x) - (l2/2) sum ||W||^2``;
    biases carry no prior.  ``batch`` is a list of LabeledExample or an
    ``(X, y)`` tuple.
    """
    X, y = _batch_arrays(model, batch)
    n = X.shape[0]
    logits, cache = _forward_cache(model, X)
    p = _softmax(logits / model.temperature)
    dlogits = -p
    dlogits[np.arange(n), y] += 1.0
    dlogits /= (model.temperature * n)
    _, grads = _backward(model, cache, dlogits)
    if l2_coefficient:
        grads = [(dW - l2_coefficient * layer.weights, db)
                 for (dW, db), layer in zip(grads, model.layers)]
    return grads


def predict_classes(model, inputs):
    return np.argmax(logits_batch(model, inputs), axis=1)


def predict_class(model, input):
    """Argmax of the probabilities, lowest index on ties.

    >>> zero = DifferentiableClassifier([DenseLayer(np.zeros((3, 4)), np.zeros(3))])
    >>> predict_class(zero, np.ones(4))
    0
    """
    return int(predict_classes(model, _one_row(input))[0])


def nll(model, inputs, labels, temperature=None):
    """Mean negative log-likelihood at the model (or a given) temperature."""
    logits = logits_batch(model, inputs)
    y = _labels(model, labels, logits.shape[0])
    t = model.temperature if temperature is None else temperature
    scaled = logits / t
    log_p = scaled[np.arange(len(y)), y] - logsumexp(scaled, axis=1)
    return float(-log_p.mean())


def accuracy(model, inputs, labels):
    y = _labels(model, labels, as_batch(model, inputs).shape[0])
    return float(np.mean(predict_classes(model, inputs) == y))


def _hex_list(array):
    return [float(v).hex() for v in np.asarray(array).ravel()]


def checkpoint_dict(model):
    return dict(
        format=CHECKPOINT_FORMAT,
        version=CHECKPOINT_VERSION,
        architecture=model.architecture,
        temperature=float(model.temperature).hex(),
        calibrated=bool(model.calibrated),
        layers=[dict(weights=_hex_list(layer.weights), biases=_hex_list(layer.biases))
                for layer in model.layers])


def classifier_from_dict(doc):
    fmt = doc.get('format') if isinstance(doc, dict) else None
    if fmt != CHECKPOINT_FORMAT:
        raise DataError(u'not a checkpoint: format=%r' % fmt)
    if doc.get('version') != CHECKPOINT_VERSION:
        raise DataError(u'unsupported checkpoint version %r' % doc.get('version'))
    layers = []
    try:
        architecture, params_list = doc['architecture'], doc['layers']
        if len(architecture) != len(params_list):
            raise DataError(u'malformed checkpoint: %d layers declared, %d stored'
                            % (len(architecture), len(params_list)))
        for index, (spec, params) in enumerate(zip(architecture, params_list)):
            rows, cols = (int(n) for n in spec['shape'])
            if len(params['weights']) != rows * cols or len(params['biases']) != rows:
                raise DataError(u'malformed checkpoint: layer %d is declared %dx%d but stores '
                                u'%d weights and %d biases' % (index, rows, cols,
                                                               len(params['weights']),
                                                               len(params['biases'])))
            weights = np.array([float.fromhex(v) for v in params['weights']]).reshape(rows, cols)
            biases = np.array([float.fromhex(v) for v in params['biases']])
            layers.append(DenseLayer(weights, biases, spec['nonlinearity']))
        temperature = float.fromhex(doc['temperature'])
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(u'malformed checkpoint: %s' % e)
    return DifferentiableClassifier(layers, temperature, doc.get('calibrated', False))


def save_checkpoint(model, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(checkpoint_dict(model), f, sort_keys=True, indent=1)
        f.write('\n')
    log.debug('wrote checkpoint %s', path)


def load_checkpoint(path):
    with open(path, 'r', encoding='utf-8') as f:
        try:
            doc = json.load(f)
        except ValueError as e:
            raise DataError(u'%s: %s' % (path, e))
    return classifier_from_dict(doc)


if __name__=="__main__":
    from doctest import testmod
    testmod()

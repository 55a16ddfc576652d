# coding: utf-8
"""Training regimes, optimizers and temperature calibration.

Four regimes are registered as plugins:

``plain``
    Adam (or SGD) on the mean negative log-likelihood plus the L2 prior.
``random_ball``
    The same, with every input moved by a point drawn uniformly from the
    L2 ball of radius epsilon.
``pgd``
    A few normalized-gradient PGD steps against the true-class probability
    per batch, then one parameter update at the perturbed inputs.
``algorithm1``
    m-step minibatch adversarial training: per batch the noise starts at
    zero and each of the ``hop_steps`` iterations makes one parameter update
    followed by one random-length noise step against the true class.
"""
import csv
import logging
from collections import namedtuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .base import ConfigError, DataError, DivergenceError, LabeledExample, Options, Plugin
from .models import (as_batch, input_gradients, logits_batch, nll, parameter_gradient,
                     predict_classes)
from .numerics import (Grid, RandomSource, l2_norms, project_l2_ball,
                       sample_uniform_l2_ball, sample_uniform_l2_sphere)
from .util import fmt_real

__all__ = ['TrainingConfig', 'AdamOptimizer', 'SGDOptimizer', 'Regime',
           'AdversarialState', 'EpochRecord', 'TrainedModel', 'train',
           'perturb_random_ball', 'pgd_attack', 'pgd_attack_batch',
           'algorithm1_batch', 'algorithm1_epoch', 'calibrate_temperature',
           'saturation_temperature', 'make_optimizer', 'minibatches']

log = logging.getLogger(__name__)

# scaled logits may span at most this much, so every probability stays >= exp(-30)
SATURATION_LOGIT_RANGE = 30.0


class TrainingConfig(Options):
    """Optimization hyperparameters; options are readable as attributes.

    ``batch_size=None`` means full batch.

    >>> cfg = TrainingConfig(regime='adversarial', epsilon=1.0)
    >>> cfg.regime, cfg.hop_steps, cfg.learning_rate
    ('algorithm1', 3, 0.001)
    >>> TrainingConfig(regime='pgd', epsilon=-1)
    Traceback (most recent call last):
    ...
    salient.base.ConfigError: epsilon must be >= 0, got -1
    """
    default_options = dict(
        regime='plain',
        # noise
        epsilon=1.0,
        hop_steps=3,
        pgd_steps=3,
        pgd_step_size=None,
        surface=False,
        # optimizer
        optimizer='adam',
        learning_rate=1e-3,
        beta1=0.9,
        beta2=0.999,
        adam_eps=1e-8,
        l2_coefficient=1e-3,
        batch_size=None,
        # stopping
        max_epochs=200,
        patience=20,
        seed=0,
        log_every=10,
        )

    def __init__(self, options=None, **kw):
        super(TrainingConfig, self).__init__(options, **kw)
        try:
            self.options['regime'] = Regime.resolve(self.lookup_option('regime')).name
        except ValueError as e:
            raise ConfigError(str(e))
        self.validate()

    def __getattr__(self, key):
        if key in type(self).default_options and 'options' in self.__dict__:
            return self.lookup_option(key)
        raise AttributeError(key)

    def validate(self):
        def check(ok, message, value):
            if not ok:
                raise ConfigError(u'%s, got %r' % (message, value))
        check(self.epsilon >= 0, 'epsilon must be >= 0', self.epsilon)
        check(int(self.hop_steps) >= 1, 'hop_steps must be >= 1', self.hop_steps)
        check(int(self.pgd_steps) >= 1, 'pgd_steps must be >= 1', self.pgd_steps)
        check(self.learning_rate > 0, 'learning_rate must be > 0', self.learning_rate)
        check(self.l2_coefficient >= 0, 'l2_coefficient must be >= 0', self.l2_coefficient)
        check(self.batch_size is None or int(self.batch_size) >= 1,
              'batch_size must be >= 1 or null', self.batch_size)
        check(int(self.max_epochs) >= 1, 'max_epochs must be >= 1', self.max_epochs)
        check(self.optimizer in ('adam', 'sgd'), 'optimizer must be adam or sgd',
              self.optimizer)
        check(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, 'Adam betas must be in [0, 1)',
              (self.beta1, self.beta2))

    def __repr__(self):
        return '<TrainingConfig %s>' % ' '.join(
            '%s=%r' % item for item in sorted(self.as_dict().items()))


class AdamOptimizer(object):
    """Adam descent on a list of parameter arrays, updated in place."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.steps += 1
        bias1 = 1.0 - self.beta1 ** self.steps
        bias2 = 1.0 - self.beta2 ** self.steps
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


class SGDOptimizer(object):
    """Plain gradient step, ``p <- p - lr * g``."""

    def __init__(self, learning_rate=1e-3):
        self.learning_rate = learning_rate
        self.steps = 0

    def step(self, params, grads):
        self.steps += 1
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


def make_optimizer(config):
    if config.optimizer == 'sgd':
        return SGDOptimizer(config.learning_rate)
    return AdamOptimizer(config.learning_rate, config.beta1, config.beta2, config.adam_eps)


def descent_step(model, optimizer, X, y, l2_coefficient=0.0):
    """One optimizer update along the log-posterior gradient at ``(X, y)``."""
    loss_grads = []
    for dW, db in parameter_gradient(model, (X, y), l2_coefficient):
        loss_grads.extend([-dW, -db])
    optimizer.step(model.parameters(), loss_grads)


AdversarialState = namedtuple('AdversarialState', ['deltas'])


def _generator(rng):
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomSource(rng).generator


def perturb_random_ball(example, epsilon, rng, surface=False):
    """Add a point drawn uniformly from the L2 ball of radius epsilon.

    >>> g = Grid(np.ones((2, 2)))
    >>> perturb_random_ball(g, 0.0, RandomSource(0)) == g
    True
    """
    if isinstance(example, LabeledExample):
        return LabeledExample(perturb_random_ball(example.grid, epsilon, rng, surface),
                              example.label)
    values = example.values if isinstance(example, Grid) else np.asarray(example, float)
    sampler = sample_uniform_l2_sphere if surface else sample_uniform_l2_ball
    noise = sampler(_generator(rng), values.size, epsilon).reshape(values.shape)
    perturbed = values + noise
    return Grid(perturbed) if isinstance(example, Grid) else perturbed


def pgd_attack_batch(model, X, y, epsilon, steps=3, step_size=None, observer=None):
    """Non-targeted L2 PGD on ``p(y|x + delta)``, one noise row per input.

    Each step moves ``step_size`` against the normalized input gradient and
    projects back into the ball; rows whose gradient vanishes stay put.
    """
    if steps < 1:
        raise ConfigError(u'PGD needs at least one step, got %r' % steps)
    X = np.asarray(X, dtype=np.float64)
    delta = np.zeros_like(X)
    if epsilon == 0:
        return delta
    if step_size is None:
        step_size = 2.0 * epsilon / steps
    for step in range(steps):
        g = input_gradients(model, X + delta, y)
        norms = l2_norms(g)
        moving = norms > 0
        delta[moving] -= step_size * g[moving] / norms[moving][:, None]
        delta = project_l2_ball(delta, epsilon)
        if observer is not None:
            observer('pgd_step', delta)
    log.debug('pgd: %d steps, mean |delta|=%g', steps, float(l2_norms(delta).mean()))
    return delta


def pgd_attack(model, example, label, epsilon, steps=3, step_size=None, observer=None):
    """PGD noise for a single example, shaped like the example."""
    values = example.values if isinstance(example, Grid) else np.asarray(example, float)
    delta = pgd_attack_batch(model, values.reshape(1, -1), [label], epsilon,
                             steps, step_size, observer)[0]
    if values.ndim == 2:
        return Grid(delta, shape=values.shape)
    return delta


def algorithm1_batch(model, optimizer, X, y, epsilon, hop_steps, rng,
                     l2_coefficient=0.0, observer=None):
    """Interleave ``hop_steps`` parameter updates and noise updates on one batch."""
    gen = _generator(rng)
    X = np.asarray(X, dtype=np.float64)
    delta = np.zeros_like(X)
    for step in range(hop_steps):
        descent_step(model, optimizer, X + delta, y, l2_coefficient)
        g = input_gradients(model, X + delta, y)
        norms = l2_norms(g)
        nu = gen.uniform(0.0, epsilon, size=X.shape[0])
        moving = norms > 0
        delta[moving] -= (nu[moving] / norms[moving])[:, None] * g[moving]
        delta = project_l2_ball(delta, epsilon)
        if observer is not None:
            observer('algorithm1_step', delta)
    return AdversarialState(delta)


def algorithm1_epoch(model, minibatches, epsilon, hop_steps, optimizer, rng=0,
                     l2_coefficient=0.0, observer=None):
    """One pass of m-step minibatch adversarial training over ``minibatches``.

    ``minibatches`` yields ``(X, y)`` pairs.  The model is updated in place
    and returned with the final noise of every example.
    """
    if hop_steps < 1:
        raise ConfigError(u'hop_steps must be >= 1, got %r' % hop_steps)
    if epsilon < 0:
        raise ConfigError(u'epsilon must be >= 0, got %r' % epsilon)
    gen = _generator(rng)
    deltas = [algorithm1_batch(model, optimizer, X, y, epsilon, hop_steps, gen,
                               l2_coefficient, observer).deltas
              for X, y in minibatches]
    return model, AdversarialState(np.concatenate(deltas) if deltas else np.zeros((0, 0)))


class Regime(Plugin):
    """Base class of training regimes.

    Subclasses implement ``run_batch`` which updates the model in place.
    """
    kind = 'training regime'
    registry = None

    def __init__(self, config, rng, observer=None):
        Options.__init__(self)
        self.config = config
        self.rng = _generator(rng)
        self.observer = observer

    def run_batch(self, model, optimizer, X, y):
        raise NotImplementedError


class PlainRegime(Regime):
    name = 'plain'
    aliases = ('none', 'standard')

    def run_batch(self, model, optimizer, X, y):
        descent_step(model, optimizer, X, y, self.config.l2_coefficient)


class RandomBallRegime(Regime):
    name = 'random_ball'
    aliases = ('random', 'random_noise', 'random-ball')

    def run_batch(self, model, optimizer, X, y):
        sampler = sample_uniform_l2_sphere if self.config.surface else sample_uniform_l2_ball
        noise = sampler(self.rng, X.shape[1], self.config.epsilon, size=X.shape[0])
        descent_step(model, optimizer, X + noise, y, self.config.l2_coefficient)


class PgdRegime(Regime):
    name = 'pgd'
    aliases = ('pgd_adversarial',)

    def run_batch(self, model, optimizer, X, y):
        delta = pgd_attack_batch(model, X, y, self.config.epsilon, self.config.pgd_steps,
                                 self.config.pgd_step_size, self.observer)
        descent_step(model, optimizer, X + delta, y, self.config.l2_coefficient)


class Algorithm1Regime(Regime):
    name = 'algorithm1'
    aliases = ('minibatch_adversarial', 'adversarial', 'm-step')

    def run_batch(self, model, optimizer, X, y):
        algorithm1_batch(model, optimizer, X, y, self.config.epsilon, self.config.hop_steps,
                         self.rng, self.config.l2_coefficient, self.observer)


Regime.update_registry()


EpochRecord = namedtuple('EpochRecord', ['epoch', 'loss', 'train_acc', 'val_acc', 'val_nll'])


class TrainedModel(object):
    """A classifier together with its per-epoch log and training config."""

    LOG_COLUMNS = EpochRecord._fields

    def __init__(self, classifier, training_log, config):
        self.classifier = classifier
        self.training_log = list(training_log)
        self.config = config

    @property
    def temperature(self):
        return self.classifier.temperature

    @property
    def epochs(self):
        return len(self.training_log)

    def write_log_csv(self, path):
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(self.LOG_COLUMNS)
            for record in self.training_log:
                writer.writerow([record.epoch] + [fmt_real(v) for v in record[1:]])

    def __repr__(self):
        return '<TrainedModel %s epochs=%d t=%g>' % (
            self.config.regime, self.epochs, self.temperature)


def minibatches(X, y, batch_size, rng=None):
    """Yield ``(X, y)`` batches; full batch when ``batch_size`` is None."""
    n = X.shape[0]
    if batch_size is None or batch_size >= n:
        yield X, y
        return
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        index = order[start:start + batch_size]
        yield X[index], y[index]


def _arrays(model, data, empty_message):
    if data is None:
        return None, None
    X, y = data if isinstance(data, tuple) else (data.flat_inputs, data.labels)
    if len(X) == 0:
        raise DataError(empty_message)
    return as_batch(model, X), np.asarray(y, dtype=np.int64)


def _objective(model, X, y, l2_coefficient):
    penalty = 0.5 * l2_coefficient * sum(float(np.sum(layer.weights ** 2))
                                        for layer in model.layers)
    return nll(model, X, y) + penalty


def _state_dump(model, epoch, batch, records):
    return dict(
        epoch=epoch,
        batch=batch,
        last_record=records[-1]._asdict() if records else None,
        parameter_norms=[float(np.sqrt(np.sum(p ** 2))) for p in model.parameters()],
        non_finite=[bool(not np.all(np.isfinite(p))) for p in model.parameters()])


def _diverged(model, epoch, batch, records, why):
    state = _state_dump(model, epoch, batch, records)
    log.error('training diverged (%s): %r', why, state)
    raise DivergenceError(u'training diverged at epoch %d: %s' % (epoch, why), state)


def train(config, dataset, model, validation=None, observer=None):
    """Optimize a copy of ``model`` on ``dataset`` under ``config.regime``.

    ``dataset`` and ``validation`` are Dataset objects or ``(X, y)`` tuples.
    With validation data, training stops early once the validation NLL has
    not improved for ``config.patience`` epochs.  ``observer(event, deltas)``
    is called after every PGD step and every minibatch adversarial iteration.
    """
    if not isinstance(config, TrainingConfig):
        config = TrainingConfig(config)
    model = model.copy()
    X, y = _arrays(model, dataset, u'cannot train on an empty dataset')
    Xv, yv = _arrays(model, validation, u'validation set is empty')
    source = RandomSource(config.seed)
    regime = Regime.resolve(config.regime)(
        config, source.spawn('noise/%s' % config.regime), observer)
    shuffle = source.spawn('shuffle').generator
    optimizer = make_optimizer(config)
    records = []
    best, stale = np.inf, 0
    log.info('training %r with %s', model, config)
    for epoch in range(1, int(config.max_epochs) + 1):
        for batch, (Xb, yb) in enumerate(minibatches(X, y, config.batch_size, shuffle)):
            regime.run_batch(model, optimizer, Xb, yb)
            if not all(np.all(np.isfinite(p)) for p in model.parameters()):
                _diverged(model, epoch, batch, records, 'non-finite parameters')
        loss = _objective(model, X, y, config.l2_coefficient)
        if not np.isfinite(loss):
            _diverged(model, epoch, None, records, 'non-finite loss %r' % loss)
        train_acc = float(np.mean(predict_classes(model, X) == y))
        if Xv is not None:
            val_acc = float(np.mean(predict_classes(model, Xv) == yv))
            val_nll = nll(model, Xv, yv)
        else:
            val_acc = val_nll = float('nan')
        records.append(EpochRecord(epoch, loss, train_acc, val_acc, val_nll))
        if config.log_every and epoch % config.log_every == 0:
            log.info('epoch %d: loss=%.5g train_acc=%.4f val_acc=%.4f val_nll=%.5g',
                     epoch, loss, train_acc, val_acc, val_nll)
        if Xv is not None:
            if val_nll < best:
                best, stale = val_nll, 0
            else:
                stale += 1
                if config.patience and stale >= config.patience:
                    log.info('early stop at epoch %d, best val_nll=%.5g', epoch, best)
                    break
    return TrainedModel(model, records, config)


def _nll_at(logits, y, temperature):
    scaled = logits / temperature
    return float(-(scaled[np.arange(len(y)), y] - logsumexp(scaled, axis=1)).mean())


def saturation_temperature(logits, max_logit_range=SATURATION_LOGIT_RANGE):
    """Smallest temperature keeping every row's scaled logit range within bounds.

    Below it some example has a class probability under
    ``exp(-max_logit_range)``, and input gradients of a perfectly separated
    set flatten toward exact zeros.

    >>> saturation_temperature(np.array([[0.0, 3.0, 6.0], [1.0, 1.0, 1.0]]))
    0.2
    """
    logits = np.asarray(logits, dtype=np.float64)
    return float(np.max(logits.max(axis=1) - logits.min(axis=1))) / max_logit_range


def calibrate_temperature(model, validation, bounds=(-7.0, 7.0)):
    """Fit the softmax temperature on validation data and set it on ``model``.

    Parameters stay frozen; the validation NLL is minimized over ``log t``
    within ``bounds``, but never below ``saturation_temperature``: on a
    separable validation set the NLL keeps falling as ``t -> 0`` and the
    optimum would saturate the softmax.  Whenever ``t = 1`` is above that
    floor the result is never worse than ``t = 1``.
    """
    X, y = _arrays(model, validation, u'cannot calibrate on an empty validation set')
    logits = logits_batch(model, X)
    floor = saturation_temperature(logits)
    lower = max(bounds[0], np.log(floor)) if floor > 0 else bounds[0]
    if lower < bounds[1]:
        result = minimize_scalar(lambda log_t: _nll_at(logits, y, np.exp(log_t)),
                                 bounds=(lower, bounds[1]), method='bounded',
                                 options=dict(xatol=1e-10))
        t = max(float(np.exp(result.x)), floor)
    else:
        t = float(np.exp(lower))
    baseline = _nll_at(logits, y, 1.0)
    if floor <= 1.0 and not _nll_at(logits, y, t) <= baseline:
        log.warning('temperature search did not beat t=1 (%.6g vs %.6g)',
                    _nll_at(logits, y, t), baseline)
        t = 1.0
    if t <= floor * (1 + 1e-6):
        log.info('temperature held at the saturation floor t=%.6g (largest logit range %.6g)',
                 t, floor * SATURATION_LOGIT_RANGE)
    model.temperature = t
    model.calibrated = True
    log.info('calibrated temperature t=%.6g (val nll %.6g -> %.6g)',
             t, baseline, _nll_at(logits, y, t))
    return t


if __name__=="__main__":
    from doctest import testmod
    testmod()

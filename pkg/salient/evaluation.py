# coding: utf-8
"""Scoring saliency maps against analytic ground truth.

Criterion 1 correlates the map for an example's own class with that class's
informative map (template minus average template).  Criterion 2 correlates
the maps for every other class with the pairwise difference maps
(target template minus source template) and averages over target classes,
giving one value per example.  Methods are compared with two-sided paired
t-tests over the examples, Bonferroni-corrected.
"""
import itertools
import logging
from collections import OrderedDict

import numpy as np

from .base import DataError, DegenerateInputError
from .numerics import RandomSource, TestResult, paired_t_test, pearson, standard_error
from .saliency import SaliencyMap, batch_maps

__all__ = ['CRITERIA', 'CriterionScore', 'EvaluationReport', 'score_criterion1',
           'score_criterion2', 'pairwise_table', 'compare_methods',
           'tune_smoothgrad_sigma']

log = logging.getLogger(__name__)

CRITERIA = ('criterion1', 'criterion2')


class CriterionScore(object):
    """Per-example correlations of one method under one criterion."""

    def __init__(self, method, correlations, criterion='criterion1'):
        if criterion not in CRITERIA:
            raise DataError(u'unknown criterion %r' % criterion)
        self.method = method
        self.criterion = criterion
        self.correlations = np.asarray(correlations, dtype=np.float64).ravel()

    @property
    def mean(self):
        return float(self.correlations.mean())

    @property
    def standard_error(self):
        return standard_error(self.correlations)

    @property
    def n(self):
        return int(self.correlations.size)

    def __repr__(self):
        return '<CriterionScore %s %s mean=%.4f se=%.4f n=%d>' % (
            self.method, self.criterion, self.mean, self.standard_error, self.n)


def _values(item):
    if isinstance(item, SaliencyMap):
        return item.values.values
    return getattr(item, 'values', item)


def _masked(values, mask):
    values = np.asarray(values, dtype=np.float64)
    return values[mask] if mask is not None else values.ravel()


def _correlate(map_values, truth_values, mask):
    map_values = np.asarray(map_values, dtype=np.float64)
    truth_values = np.asarray(truth_values, dtype=np.float64)
    if map_values.shape != truth_values.shape:
        raise DataError(u'map shape %r does not match ground truth %r'
                        % (map_values.shape, truth_values.shape))
    return pearson(_masked(map_values, mask), _masked(truth_values, mask))


def score_criterion1(maps, labels, ground_truth, method='method'):
    """Correlation of each example's correct-class map with its informative map.

    ``maps[i]`` is a SaliencyMap, Grid or array for example ``i`` and its
    true class ``labels[i]``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(maps) != len(labels):
        raise DataError(u'%d maps for %d examples' % (len(maps), len(labels)))
    correlations = np.empty(len(labels))
    for i, (item, label) in enumerate(zip(maps, labels)):
        target = getattr(item, 'target_class', label)
        if target != label:
            raise DataError(u'example %d: map is for class %r, true class is %r'
                            % (i, target, label))
        truth = ground_truth.informative_maps[label].values
        correlations[i] = _correlate(_values(item), truth, ground_truth.mask)
    return CriterionScore(method, correlations, 'criterion1')


def _other_class_maps(item, source, num_classes, index):
    """Normalize the per-example map collection to ``{target: values}``."""
    if isinstance(item, dict):
        found = dict((t, _values(v)) for t, v in item.items())
    else:
        stack = np.asarray([_values(v) for v in item]) if isinstance(item, (list, tuple)) \
            else np.asarray(item)
        if stack.shape[0] != num_classes:
            raise DataError(u'example %d: expected %d maps (one per class), got %d'
                            % (index, num_classes, stack.shape[0]))
        found = dict((t, stack[t]) for t in range(num_classes))
    missing = [t for t in range(num_classes) if t != source and t not in found]
    if missing:
        raise DataError(u'example %d: no map for target class %s' % (index, missing))
    return found


def _pair_correlations(maps, labels, ground_truth):
    labels = np.asarray(labels, dtype=np.int64)
    if len(maps) != len(labels):
        raise DataError(u'%d map sets for %d examples' % (len(maps), len(labels)))
    k = ground_truth.num_classes
    for i, (item, source) in enumerate(zip(maps, labels)):
        found = _other_class_maps(item, source, k, i)
        for target in range(k):
            if target == source:
                continue
            truth = ground_truth.pairwise_difference_maps[(source, target)].values
            yield i, source, target, _correlate(found[target], truth, ground_truth.mask)


def score_criterion2(maps, labels, ground_truth, method='method'):
    """Mean over other classes of the correlation with the pairwise maps.

    ``maps[i]`` is either a mapping ``{target_class: map}`` covering every
    class other than ``labels[i]``, or a stack with one map per class (the
    entry of the true class is ignored).
    """
    labels = np.asarray(labels, dtype=np.int64)
    sums = np.zeros(len(labels))
    counts = np.zeros(len(labels))
    for i, source, target, r in _pair_correlations(maps, labels, ground_truth):
        sums[i] += r
        counts[i] += 1
    return CriterionScore(method, sums / np.maximum(counts, 1), 'criterion2')


def pairwise_table(maps, labels, ground_truth):
    """Mean correlation per ordered ``(source, target)`` class pair."""
    collected = OrderedDict()
    for i, source, target, r in _pair_correlations(maps, labels, ground_truth):
        collected.setdefault((int(source), int(target)), []).append(r)
    return OrderedDict((pair, float(np.mean(rs))) for pair, rs in sorted(collected.items()))


class EvaluationReport(object):
    """Scores per criterion and method plus all pairwise tests.

    ``pairwise_tests[(criterion, a, b)]`` holds the test of ``a - b``; the
    reversed key holds the same test with the sign of ``t`` flipped.
    """

    def __init__(self, criterion1, criterion2, pairwise_tests, num_comparisons,
                 family='per_criterion'):
        self.criterion1 = criterion1
        self.criterion2 = criterion2
        self.pairwise_tests = pairwise_tests
        self.num_comparisons = num_comparisons
        self.family = family

    def scores(self, criterion):
        return self.criterion1 if criterion == 'criterion1' else self.criterion2

    @property
    def methods(self):
        return list(self.criterion1 or self.criterion2)

    def test(self, criterion, a, b):
        return self.pairwise_tests[(criterion, a, b)]

    def rows(self):
        """Pairwise results in report order, each unordered pair once."""
        for criterion in CRITERIA:
            names = list(self.scores(criterion))
            for a, b in itertools.combinations(names, 2):
                yield criterion, a, b, self.pairwise_tests[(criterion, a, b)]

    def __repr__(self):
        return '<EvaluationReport methods=%d comparisons=%r>' % (
            len(self.methods), self.num_comparisons)


def _compare(a, b, num_comparisons):
    try:
        return paired_t_test(a.correlations, b.correlations, num_comparisons)
    except DegenerateInputError:
        # constant non-zero difference: one method dominates on every example
        diff = float(np.mean(a.correlations - b.correlations))
        return TestResult(float(np.copysign(np.inf, diff)), a.n - 1, 0.0, 0.0, True)


def _flip(result):
    return result._replace(t_statistic=-result.t_statistic)


def compare_methods(scores, family='per_criterion', order=None):
    """Paired t-tests between every pair of methods within each criterion.

    ``scores`` is a flat list of CriterionScore objects (either criterion).
    ``family`` picks the Bonferroni family: ``per_criterion`` corrects for the
    pairs within a criterion, ``global`` for all pairs of both criteria.
    ``order`` fixes the method order of the report (default: first seen).

    >>> a = CriterionScore('a', [0.2, 0.5, 0.4])
    >>> b = CriterionScore('b', [0.1, 0.4, 0.3])
    >>> report = compare_methods([a, CriterionScore('a2', a.correlations), b])
    >>> report.test('criterion1', 'a', 'a2')[:3]
    (0.0, 2, 1.0)
    >>> result = report.test('criterion1', 'b', 'a')
    >>> result.t_statistic, result.p_value, result.degenerate
    (-inf, 0.0, True)
    """
    if family not in ('per_criterion', 'global'):
        raise DataError(u'unknown Bonferroni family %r' % family)
    grouped = dict((criterion, OrderedDict()) for criterion in CRITERIA)
    for score in scores:
        if score.method in grouped[score.criterion]:
            raise DataError(u'duplicate score for %s / %s' % (score.method, score.criterion))
        grouped[score.criterion][score.method] = score
    if order is not None:
        for criterion in CRITERIA:
            present = grouped[criterion]
            unknown = [name for name in present if name not in order]
            if unknown:
                raise DataError(u'methods missing from order: %s' % ', '.join(unknown))
            grouped[criterion] = OrderedDict(
                (name, present[name]) for name in order if name in present)
    for criterion, group in grouped.items():
        sizes = set(score.n for score in group.values())
        if len(sizes) > 1:
            raise DataError(u'%s scores are not paired: sample sizes %s'
                            % (criterion, sorted(sizes)))
    pairs = dict((c, len(list(itertools.combinations(grouped[c], 2)))) for c in CRITERIA)
    if family == 'global':
        total = max(1, sum(pairs.values()))
        num_comparisons = dict((c, total) for c in CRITERIA)
    else:
        num_comparisons = dict((c, max(1, pairs[c])) for c in CRITERIA)
    tests = {}
    for criterion, group in grouped.items():
        for a, b in itertools.combinations(group, 2):
            result = _compare(group[a], group[b], num_comparisons[criterion])
            tests[(criterion, a, b)] = result
            tests[(criterion, b, a)] = _flip(result)
    log.info('compared %d methods, %r comparisons', len(grouped['criterion1']) or
             len(grouped['criterion2']), num_comparisons)
    return EvaluationReport(grouped['criterion1'], grouped['criterion2'], tests,
                            num_comparisons, family)


def tune_smoothgrad_sigma(model, inputs, labels, ground_truth, sigmas, n_samples=50, rng=0):
    """Pick the SmoothGrad noise level with the best mean criterion-1 score.

    Returns ``(best_sigma, {sigma: mean_r})``; every candidate sees the same
    noise draws.
    """
    source = rng if isinstance(rng, RandomSource) else RandomSource(rng)
    labels = np.asarray(labels, dtype=np.int64)
    means = OrderedDict()
    for sigma in sigmas:
        maps = batch_maps(model, inputs, labels, 'smoothgrad',
                          source.spawn('smoothgrad/tune'), sigma=sigma, samples=n_samples)
        means[sigma] = score_criterion1(maps, labels, ground_truth, 'smoothgrad').mean
        log.info('smoothgrad sigma=%g: mean r=%.4f', sigma, means[sigma])
    best = max(means, key=lambda sigma: means[sigma])
    return best, means


if __name__=="__main__":
    from doctest import testmod
    testmod()

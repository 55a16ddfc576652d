# coding: utf-8
"""Grids, seeded random streams, correlation and paired t-tests.
"""
import zlib
from collections import namedtuple

import numpy as np
from scipy import special

from .base import DataError, DegenerateInputError

__all__ = ['Grid', 'RandomSource', 'TestResult', 'pearson', 'paired_t_test',
           't_cdf', 'bonferroni', 'standard_error', 'sample_gaussian_grid',
           'sample_uniform_l2_ball', 'sample_uniform_l2_sphere', 'l2_norms',
           'project_l2_ball', 'check_finite']

DEFAULT_SHAPE = (32, 32)


def check_finite(values, what='values'):
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(u'%s contain NaN or Inf' % what)
    return values


class Grid(object):
    """A 2D field of 64-bit reals stored row-major.

    >>> g = Grid([[0, 1], [2, 3]])
    >>> g.height, g.width, g.flat.tolist()
    (2, 2, [0.0, 1.0, 2.0, 3.0])
    >>> float(Grid.zeros(3, 4).values.sum())
    0.0
    >>> Grid([[float('nan')]])
    Traceback (most recent call last):
    ...
    salient.base.DataError: grid values contain NaN or Inf
    """
    __slots__ = ('values',)

    def __init__(self, values, shape=None):
        values = check_finite(values, 'grid values')
        if shape is not None:
            values = values.reshape(shape)
        if values.ndim != 2:
            raise DataError(u'grid must be 2D, got shape %r' % (values.shape,))
        self.values = values

    @classmethod
    def zeros(cls, height=DEFAULT_SHAPE[0], width=DEFAULT_SHAPE[1]):
        return cls(np.zeros((height, width)))

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def flat(self):
        return self.values.ravel()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None

    def __repr__(self):
        return '<Grid %dx%d>' % self.shape


class RandomSource(object):
    """Named deterministic generator with derived sub-streams.

    Sub-streams are keyed by a purpose string, so that e.g. the test split
    never depends on how many draws the train split made.

    >>> a = RandomSource(7).spawn('data/train').generator.integers(0, 100, 3)
    >>> b = RandomSource(7).spawn('data/train').generator.integers(0, 100, 3)
    >>> bool((a == b).all())
    True
    """
    algorithm = 'PCG64'

    def __init__(self, seed=0, _spawn_key=()):
        self.seed = int(seed)
        self.spawn_key = tuple(_spawn_key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, purpose):
        key = zlib.crc32(purpose.encode('utf-8')) & 0xffffffff
        return RandomSource(self.seed, self.spawn_key + (key,))

    def __repr__(self):
        return '<RandomSource seed=%d key=%r>' % (self.seed, self.spawn_key)


def _as_rng(rng):
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return RandomSource(rng).generator


_TestResult = namedtuple('TestResult', ['t_statistic', 'degrees_of_freedom',
                                        'p_value', 'p_adjusted', 'degenerate'])


class TestResult(_TestResult):
    """Outcome of a two-sided paired t-test."""
    __slots__ = ()
    __test__ = False

    def __new__(cls, t_statistic, degrees_of_freedom, p_value, p_adjusted=None,
                degenerate=False):
        if p_adjusted is None:
            p_adjusted = p_value
        return _TestResult.__new__(cls, t_statistic, degrees_of_freedom,
                                   p_value, p_adjusted, degenerate)

    def adjust(self, num_comparisons):
        return self._replace(p_adjusted=bonferroni(self.p_value, num_comparisons))


def _paired_arrays(a, b):
    a = check_finite(a).ravel()
    b = check_finite(b).ravel()
    if a.shape != b.shape:
        raise DataError(u'length mismatch: %d != %d' % (a.size, b.size))
    if a.size < 2:
        raise DataError(u'need at least 2 values, got %d' % a.size)
    return a, b


def pearson(a, b):
    """Sample Pearson correlation coefficient.

    >>> abs(pearson([1, 2, 3], [1, 2, 4]) - 9 / 84 ** 0.5) < 1e-12
    True
    >>> pearson([1, 2, 3], [-1, -2, -3])
    -1.0
    >>> pearson([1, 1, 1], [1, 2, 3])
    Traceback (most recent call last):
    ...
    salient.base.DegenerateInputError: pearson: input has zero variance
    """
    a, b = _paired_arrays(a, b)
    ac = a - a.mean()
    bc = b - b.mean()
    saa = np.dot(ac, ac)
    sbb = np.dot(bc, bc)
    if saa == 0 or sbb == 0:
        raise DegenerateInputError(u'pearson: input has zero variance')
    r = np.dot(ac, bc) / np.sqrt(saa * sbb)
    return float(min(1.0, max(-1.0, r)))


def t_cdf(t, df):
    """Student's t CDF through the regularized incomplete beta function.

    >>> t_cdf(0, 5)
    0.5
    >>> round(t_cdf(1.0, 10), 5)
    0.82955
    >>> t_cdf(float('inf'), 3)
    1.0
    """
    if df < 1:
        raise DataError(u'degrees of freedom must be >= 1, got %r' % df)
    if t == 0:
        return 0.5
    x = df / (df + float(t) * t)
    tail = 0.5 * float(special.betainc(0.5 * df, 0.5, x))
    return 1.0 - tail if t > 0 else tail


def bonferroni(p_values, num_comparisons):
    """Adjusted p-values ``min(1, p * m)`` for a scalar or an array.

    >>> bonferroni(0.02, 2)
    0.04
    >>> bonferroni(0.4, 3)
    1.0
    >>> bonferroni([0.001, 0.2], 10).tolist()
    [0.01, 1.0]
    """
    if num_comparisons < 1:
        raise DataError(u'number of comparisons must be >= 1')
    adjusted = np.minimum(1.0, np.asarray(p_values, dtype=np.float64) * num_comparisons)
    return float(adjusted) if adjusted.ndim == 0 else adjusted


def paired_t_test(a, b, num_comparisons=1):
    """Two-sided paired t-test on ``a - b``.

    Identical samples give ``t = 0, p = 1``; differences that are constant
    up to rounding but non-zero have no t distribution and raise
    DegenerateInputError.

    >>> paired_t_test([1, 2, 3], [1, 2, 3])[:3]
    (0.0, 2, 1.0)
    >>> r = paired_t_test([1, 2, 3, 4, 5], [1.1, 2.0, 3.2, 3.9, 5.3])
    >>> round(r.t_statistic, 6), r.degrees_of_freedom, round(r.p_value, 6)
    (-1.414214, 4, 0.2302)
    """
    a, b = _paired_arrays(a, b)
    d = a - b
    n = d.size
    df = n - 1
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd <= 1e-12 * float(np.max(np.abs(d))):
        if mean == 0:
            return TestResult(0.0, df, 1.0, bonferroni(1.0, num_comparisons))
        raise DegenerateInputError(
            u'paired_t_test: differences are constant (%r)' % float(mean))
    t = float(mean / (sd / np.sqrt(n)))
    p = min(1.0, 2.0 * t_cdf(-abs(t), df))
    return TestResult(t, df, p, bonferroni(p, num_comparisons))


def standard_error(values):
    values = check_finite(values).ravel()
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def sample_gaussian_grid(rng, shape=DEFAULT_SHAPE, sigma=1.0):
    """I.i.d. zero-mean Gaussian grid.

    >>> sample_gaussian_grid(RandomSource(1), (2, 2), 0.0).values.tolist()
    [[0.0, 0.0], [0.0, 0.0]]
    """
    if sigma < 0:
        raise DataError(u'sigma must be >= 0, got %r' % sigma)
    draws = _as_rng(rng).standard_normal(tuple(shape))
    if sigma == 0:
        return Grid(np.zeros(tuple(shape)))
    return Grid(draws * sigma)


def l2_norms(rows):
    rows = np.asarray(rows, dtype=np.float64)
    return np.sqrt(np.einsum('ij,ij->i', rows, rows))


def project_l2_ball(rows, epsilon):
    """Rescale every row with norm above epsilon onto the sphere of radius epsilon.

    >>> project_l2_ball(np.array([[3.0, 4.0], [0.3, 0.4]]), 1.0).tolist()
    [[0.6000000000000001, 0.8], [0.3, 0.4]]
    """
    rows = np.array(rows, dtype=np.float64, copy=True)
    norms = l2_norms(rows)
    outside = norms > epsilon
    if np.any(outside):
        rows[outside] *= (epsilon / norms[outside])[:, None]
    return rows


def _unit_directions(rng, count, dim):
    directions = rng.standard_normal((count, dim))
    norms = l2_norms(directions)
    # a zero draw has probability zero; fall back to the first axis
    norms[norms == 0] = 1.0
    return directions / norms[:, None]


def sample_uniform_l2_ball(rng, dim, epsilon, size=None):
    """Point uniform in volume inside the closed L2 ball of radius epsilon.

    Direction uniform on the sphere, radius ``epsilon * U ** (1/dim)``.
    Returns one vector, or ``size`` rows when ``size`` is given.

    >>> sample_uniform_l2_ball(RandomSource(3), 4, 0.0).tolist()
    [0.0, 0.0, 0.0, 0.0]
    """
    if dim < 1:
        raise DataError(u'dim must be >= 1, got %r' % dim)
    if epsilon < 0:
        raise DataError(u'epsilon must be >= 0, got %r' % epsilon)
    gen = _as_rng(rng)
    count = 1 if size is None else int(size)
    if epsilon == 0:
        points = np.zeros((count, dim))
        return points[0] if size is None else points
    directions = _unit_directions(gen, count, dim)
    radii = epsilon * gen.random(count) ** (1.0 / dim)
    points = project_l2_ball(directions * radii[:, None], epsilon)
    return points[0] if size is None else points


def sample_uniform_l2_sphere(rng, dim, epsilon, size=None):
    """Point uniform on the surface of the L2 sphere of radius epsilon."""
    if dim < 1:
        raise DataError(u'dim must be >= 1, got %r' % dim)
    if epsilon < 0:
        raise DataError(u'epsilon must be >= 0, got %r' % epsilon)
    gen = _as_rng(rng)
    count = 1 if size is None else int(size)
    points = project_l2_ball(_unit_directions(gen, count, dim) * epsilon, epsilon)
    return points[0] if size is None else points


if __name__=="__main__":
    from doctest import testmod
    testmod()

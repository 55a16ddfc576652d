# coding: utf-8
"""Synthetic activation images: class templates, noisy datasets, ground truth.

Every class template is a binary 32x32 image built from 3x3 activation
regions.  A region belongs to one class, to a pair of classes, or to all of
them; with three classes each template has one specific region, two regions
shared with one other class and three regions shared by all.
"""
import itertools
import logging
import string

import numpy as np

from .base import DataError, LabeledExample
from .numerics import Grid, RandomSource
from . import util

__all__ = ['RegionSpec', 'TemplateSet', 'Dataset', 'GroundTruth', 'SPLITS',
           'default_layout', 'build_templates', 'generate_dataset',
           'informative_map', 'pairwise_difference_map', 'brain_mask',
           'class_means', 'save_dataset', 'load_dataset']

log = logging.getLogger(__name__)

SPLITS = ('train', 'validation', 'test')


def class_name(class_id):
    """
    >>> class_name(0), class_name(2)
    ('A', 'C')
    """
    return string.ascii_uppercase[class_id]


class RegionSpec(object):
    """A square activation region and the classes it is active in.

    >>> RegionSpec(4, 4, [0, 1])
    <RegionSpec AB at (4, 4) 3x3>
    """
    __slots__ = ('top', 'left', 'membership', 'size')

    def __init__(self, top, left, membership, size=3):
        membership = frozenset(int(c) for c in membership)
        if not membership:
            raise DataError(u'region at (%d, %d) belongs to no class' % (top, left))
        self.top = int(top)
        self.left = int(left)
        self.membership = membership
        self.size = int(size)

    @property
    def label(self):
        return ''.join(class_name(c) for c in sorted(self.membership))

    def pixels(self):
        return (slice(self.top, self.top + self.size),
                slice(self.left, self.left + self.size))

    def as_dict(self):
        return dict(top=self.top, left=self.left, size=self.size,
                    membership=sorted(self.membership))

    @classmethod
    def from_dict(cls, doc):
        return cls(doc['top'], doc['left'], doc['membership'], doc.get('size', 3))

    def __eq__(self, other):
        return isinstance(other, RegionSpec) and self.as_dict() == other.as_dict()

    __hash__ = None

    def __repr__(self):
        return '<RegionSpec %s at (%d, %d) %dx%d>' % (
            self.label, self.top, self.left, self.size, self.size)


def _memberships(num_classes, shared_regions):
    classes = range(num_classes)
    specific = [(c,) for c in classes]
    pairs = list(itertools.combinations(classes, 2)) if num_classes > 2 else []
    return specific + pairs + [tuple(classes)] * shared_regions


def default_layout(height=32, width=32, region_size=3, num_classes=3, shared_regions=3):
    """Regions on a square lattice, spread evenly with equal free space around.

    For the 32x32 / 3-class defaults this is a 3x3 lattice of regions with
    tops and lefts at 6, 15 and 23.

    >>> layout = default_layout()
    >>> [r.label for r in layout]
    ['A', 'B', 'C', 'AB', 'AC', 'BC', 'ABC', 'ABC', 'ABC']
    >>> sorted(set(r.top for r in layout))
    [6, 15, 23]
    """
    if num_classes < 2:
        raise DataError(u'need at least 2 classes, got %d' % num_classes)
    memberships = _memberships(num_classes, shared_regions)
    per_side = int(np.ceil(np.sqrt(len(memberships))))

    def offsets(extent):
        free = extent - per_side * region_size
        if free < per_side + 1:
            raise DataError(u'%d regions of size %d do not fit in %d pixels'
                            % (len(memberships), region_size, extent))
        return [int(np.floor((i + 1) * free / float(per_side + 1) + 0.5)) + i * region_size
                for i in range(per_side)]

    tops, lefts = offsets(height), offsets(width)
    cells = [(top, left) for top in tops for left in lefts]
    return [RegionSpec(top, left, members, region_size)
            for (top, left), members in zip(cells, memberships)]


class TemplateSet(object):
    """Binary class templates plus the layout they were built from."""

    def __init__(self, templates, region_layout):
        self.templates = list(templates)
        self.region_layout = list(region_layout)

    @property
    def classes(self):
        return list(range(len(self.templates)))

    @property
    def class_names(self):
        return [class_name(c) for c in self.classes]

    @property
    def num_classes(self):
        return len(self.templates)

    @property
    def shape(self):
        return self.templates[0].shape

    def stack(self):
        return np.stack([t.values for t in self.templates])

    def __getitem__(self, class_id):
        return self.templates[class_id]

    def __repr__(self):
        return '<TemplateSet %d classes %dx%d>' % ((self.num_classes,) + self.shape)


def build_templates(layout=None, shape=(32, 32), num_classes=None):
    """Paint each region into the templates of its member classes.

    >>> ts = build_templates()
    >>> [int(t.values.sum()) for t in ts.templates]
    [54, 54, 54]
    >>> build_templates([RegionSpec(0, 0, [0]), RegionSpec(1, 1, [1])])
    Traceback (most recent call last):
    ...
    salient.base.DataError: regions A and B overlap
    """
    if layout is None:
        layout = default_layout(shape[0], shape[1])
    layout = [r if isinstance(r, RegionSpec) else RegionSpec.from_dict(r) for r in layout]
    if num_classes is None:
        num_classes = max(max(r.membership) for r in layout) + 1
    height, width = shape
    owner = np.full(shape, -1, dtype=np.int64)
    templates = np.zeros((num_classes,) + tuple(shape))
    for index, region in enumerate(layout):
        if (region.top < 0 or region.left < 0 or region.top + region.size > height
                or region.left + region.size > width):
            raise DataError(u'region %s at (%d, %d) is out of bounds'
                            % (region.label, region.top, region.left))
        if max(region.membership) >= num_classes:
            raise DataError(u'region %s names an unknown class' % region.label)
        rows, cols = region.pixels()
        taken = owner[rows, cols]
        if np.any(taken >= 0):
            other = layout[int(taken[taken >= 0][0])]
            raise DataError(u'regions %s and %s overlap' % (other.label, region.label))
        owner[rows, cols] = index
        for c in region.membership:
            templates[c][rows, cols] = 1.0
    return TemplateSet([Grid(t) for t in templates], layout)


def informative_map(templates, class_id):
    """Template of ``class_id`` minus the average template.

    Computed as ``(K T_c - sum T) / K`` so that the maps of all classes add
    up to exactly zero.

    >>> ts = build_templates()
    >>> m = informative_map(ts, 0)
    >>> sorted(set(np.round(m.values.ravel() * 3).astype(int).tolist()))
    [-2, -1, 0, 1, 2]
    """
    stack = templates.stack()
    if not 0 <= class_id < len(stack):
        raise DataError(u'class id %r out of range' % class_id)
    k = len(stack)
    return Grid((k * stack[class_id] - stack.sum(axis=0)) / k)


def pairwise_difference_map(templates, source, target):
    """``template[target] - template[source]``.

    >>> ts = build_templates()
    >>> pairwise_difference_map(ts, 0, 1) == Grid(-pairwise_difference_map(ts, 1, 0).values)
    True
    >>> pairwise_difference_map(ts, 1, 1)
    Traceback (most recent call last):
    ...
    salient.base.DataError: source and target class are both B
    """
    if source == target:
        raise DataError(u'source and target class are both %s' % class_name(source))
    return Grid(templates[target].values - templates[source].values)


def brain_mask(templates, dilation=1):
    """Boolean mask of every pixel within ``dilation`` of an activation region."""
    mask = np.zeros(templates.shape, dtype=bool)
    height, width = templates.shape
    for region in templates.region_layout:
        mask[max(0, region.top - dilation):min(height, region.top + region.size + dilation),
             max(0, region.left - dilation):min(width, region.left + region.size + dilation)] = True
    return mask


class GroundTruth(object):
    """Both analytic map families for a template set.

    ``informative_maps[c]`` is a Grid; ``pairwise_difference_maps[(s, t)]``
    is the map for transforming class ``s`` into class ``t``.
    """

    def __init__(self, informative_maps, pairwise_difference_maps, mask=None):
        self.informative_maps = list(informative_maps)
        self.pairwise_difference_maps = dict(pairwise_difference_maps)
        self.mask = mask

    @classmethod
    def from_templates(cls, templates, masked=False):
        classes = templates.classes
        informative = [informative_map(templates, c) for c in classes]
        pairwise = dict(((s, t), pairwise_difference_map(templates, s, t))
                        for s in classes for t in classes if s != t)
        return cls(informative, pairwise, brain_mask(templates) if masked else None)

    @property
    def num_classes(self):
        return len(self.informative_maps)

    @property
    def shape(self):
        return self.informative_maps[0].shape


class Dataset(object):
    """One split of labelled examples stored as an ``(n, h, w)`` array."""

    def __init__(self, split, inputs, labels, seed=None, sigma=None, num_classes=None):
        if split not in SPLITS:
            raise DataError(u'unknown split %r' % split)
        inputs = np.asarray(inputs, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if inputs.ndim != 3 or labels.shape != (inputs.shape[0],):
            raise DataError(u'inputs %r and labels %r do not match'
                            % (inputs.shape, labels.shape))
        self.split = split
        self.inputs = inputs
        self.labels = labels
        self.seed = seed
        self.sigma = sigma
        if num_classes is None:
            if labels.size == 0:
                raise DataError(u'an empty %s split needs an explicit num_classes' % split)
            num_classes = int(labels.max()) + 1
        self.num_classes = num_classes

    @property
    def shape(self):
        return self.inputs.shape[1:]

    @property
    def flat_inputs(self):
        return self.inputs.reshape(len(self), int(np.prod(self.shape)))

    @property
    def examples(self):
        return [LabeledExample(Grid(x), int(y)) for x, y in zip(self.inputs, self.labels)]

    def __len__(self):
        return self.inputs.shape[0]

    def __iter__(self):
        return iter(self.examples)

    def subset(self, indices):
        return Dataset(self.split, self.inputs[indices], self.labels[indices],
                       self.seed, self.sigma, self.num_classes)

    def __repr__(self):
        return '<Dataset %s n=%d %dx%d>' % ((self.split, len(self)) + self.shape)


def generate_dataset(templates, split, n_per_class=1000, sigma=0.5, rng=0):
    """Template plus i.i.d. Gaussian noise, ``n_per_class`` examples per class.

    The noise stream is derived from ``(seed, split)`` only, so every split
    can be regenerated on its own.

    >>> ts = build_templates()
    >>> ds = generate_dataset(ts, 'test', 2, 0.0, RandomSource(1))
    >>> ds.labels.tolist(), bool((ds.inputs[0] == ts[0].values).all())
    ([0, 0, 1, 1, 2, 2], True)
    """
    if sigma < 0:
        raise DataError(u'sigma must be >= 0, got %r' % sigma)
    if split not in SPLITS:
        raise DataError(u'unknown split %r' % split)
    source = rng if isinstance(rng, RandomSource) else RandomSource(rng)
    stream = source.spawn('data/%s' % split).generator
    stack = templates.stack()
    labels = np.repeat(np.arange(templates.num_classes), n_per_class)
    noise = stream.standard_normal((len(labels),) + templates.shape)
    inputs = stack[labels] + (noise * sigma if sigma > 0 else 0.0)
    log.debug('generated %s split: %d examples, sigma=%g', split, len(labels), sigma)
    return Dataset(split, inputs, labels, source.seed, sigma, templates.num_classes)


def class_means(dataset):
    """Average image of each class."""
    return [Grid(dataset.inputs[dataset.labels == c].mean(axis=0))
            for c in range(dataset.num_classes)]


def save_dataset(dataset, path):
    header = dict(kind='dataset', split=dataset.split, seed=dataset.seed,
                  sigma=dataset.sigma, num_classes=dataset.num_classes)
    util.write_container(path, header, dataset.inputs, dataset.labels)


def load_dataset(path):
    header, inputs, labels = util.read_container(path, kind='dataset')
    return Dataset(header['split'], inputs, labels, header.get('seed'),
                   header.get('sigma'), header.get('num_classes'))


if __name__=="__main__":
    from doctest import testmod
    testmod()

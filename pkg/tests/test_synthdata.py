# -*- coding: utf-8 -*-
import numpy as np
import pytest

from salient.base import DataError
from salient.numerics import RandomSource
from salient.synthdata import (Dataset, GroundTruth, RegionSpec, brain_mask, build_templates,
                               class_means, default_layout, generate_dataset,
                               informative_map, load_dataset, pairwise_difference_map,
                               save_dataset)


def test_default_layout_has_one_region_per_membership(templates):
    labels = sorted(r.label for r in templates.region_layout)
    assert labels == ['A', 'AB', 'ABC', 'ABC', 'ABC', 'AC', 'B', 'BC', 'C']
    for region in templates.region_layout:
        assert region.size == 3
        assert 0 <= region.top and region.top + 3 <= 32
        assert 0 <= region.left and region.left + 3 <= 32


def test_templates_are_binary_with_specific_and_shared_regions(templates):
    stack = templates.stack()
    assert stack.shape == (3, 32, 32)
    assert set(np.unique(stack)) == {0.0, 1.0}
    # active in every class: three shared regions
    assert int(np.all(stack == 1, axis=0).sum()) == 27
    for c in range(3):
        others = [o for o in range(3) if o != c]
        only_c = (stack[c] == 1) & np.all(stack[others] == 0, axis=0)
        assert int(only_c.sum()) == 9


def test_informative_maps_sum_to_zero(templates):
    total = sum(informative_map(templates, c).values for c in range(3))
    assert np.max(np.abs(total)) < 1e-12


def test_informative_map_values(templates):
    stack = templates.stack()
    m = informative_map(templates, 1).values
    assert np.allclose(m, stack[1] - stack.mean(axis=0), atol=1e-12)
    with pytest.raises(DataError):
        informative_map(templates, 3)


def test_pairwise_maps_are_antisymmetric(templates):
    for s in range(3):
        for t in range(3):
            if s != t:
                forward = pairwise_difference_map(templates, s, t).values
                backward = pairwise_difference_map(templates, t, s).values
                assert np.array_equal(forward, -backward)
                assert np.array_equal(forward, templates[t].values - templates[s].values)


def test_ground_truth_covers_every_ordered_pair(ground_truth):
    assert ground_truth.num_classes == 3
    assert sorted(ground_truth.pairwise_difference_maps) == [
        (0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    assert ground_truth.mask is None


def test_masked_ground_truth_keeps_regions(templates):
    masked = GroundTruth.from_templates(templates, masked=True)
    assert masked.mask.shape == (32, 32)
    assert np.all(masked.mask[templates.stack().sum(axis=0) > 0])
    assert not masked.mask.all()
    assert np.array_equal(brain_mask(templates, dilation=0),
                          templates.stack().sum(axis=0) > 0)


def test_overlapping_and_out_of_bounds_regions_are_rejected():
    with pytest.raises(DataError):
        build_templates([RegionSpec(0, 0, [0]), RegionSpec(2, 2, [1])])
    with pytest.raises(DataError):
        build_templates([RegionSpec(30, 0, [0]), RegionSpec(0, 0, [1])])
    with pytest.raises(DataError):
        RegionSpec(0, 0, [])


def test_custom_layout_from_dicts():
    layout = [dict(top=0, left=0, membership=[0]), dict(top=4, left=4, membership=[0, 1])]
    templates = build_templates(layout, shape=(8, 8))
    assert templates.num_classes == 2
    assert int(templates[0].values.sum()) == 18
    assert int(templates[1].values.sum()) == 9


def test_layout_that_does_not_fit():
    with pytest.raises(DataError):
        default_layout(height=8, width=8)


def test_dataset_is_template_plus_noise(templates):
    ds = generate_dataset(templates, 'train', 500, 0.5, RandomSource(0))
    assert len(ds) == 1500
    assert np.bincount(ds.labels).tolist() == [500, 500, 500]
    residual = ds.inputs - templates.stack()[ds.labels]
    assert residual.mean() == pytest.approx(0.0, abs=0.005)
    assert residual.std() == pytest.approx(0.5, abs=0.005)
    means = class_means(ds)
    for c in range(3):
        assert np.abs(means[c].values - templates[c].values).max() < 0.15


def test_splits_are_reproducible_and_independent(templates):
    a = generate_dataset(templates, 'test', 5, 0.5, RandomSource(3))
    b = generate_dataset(templates, 'test', 5, 0.5, RandomSource(3))
    train = generate_dataset(templates, 'train', 5, 0.5, RandomSource(3))
    other_seed = generate_dataset(templates, 'test', 5, 0.5, RandomSource(4))
    assert np.array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, train.inputs)
    assert not np.array_equal(a.inputs, other_seed.inputs)


def test_dataset_errors(templates):
    with pytest.raises(DataError):
        generate_dataset(templates, 'holdout', 5)
    with pytest.raises(DataError):
        generate_dataset(templates, 'train', 5, sigma=-0.1)


def test_empty_splits_need_a_class_count():
    with pytest.raises(DataError):
        Dataset('test', np.zeros((0, 32, 32)), np.zeros(0, dtype=int))
    empty = Dataset('test', np.zeros((0, 32, 32)), np.zeros(0, dtype=int), num_classes=3)
    assert len(empty) == 0 and empty.num_classes == 3
    assert empty.flat_inputs.shape == (0, 1024)
    assert empty.examples == []


def test_dataset_file_round_trip(tmp_path, small_splits):
    ds = small_splits['validation']
    path = str(tmp_path / 'validation.bin')
    save_dataset(ds, path)
    restored = load_dataset(path)
    assert restored.split == 'validation'
    assert restored.sigma == ds.sigma
    assert np.array_equal(restored.inputs, ds.inputs)
    assert np.array_equal(restored.labels, ds.labels)


def test_dataset_subset_and_examples(small_splits):
    ds = small_splits['test']
    sub = ds.subset(np.arange(0, len(ds), 10))
    assert len(sub) == 12
    first = sub.examples[0]
    assert first.label == 0 and first.grid.shape == (32, 32)

# -*- coding: utf-8 -*-
import copy
import json
import os

import numpy as np
import pytest

from salient import pipeline as pipeline_module
from salient.base import DataError
from salient.config import METHODS, merge_config
from salient.pipeline import STAGES, Pipeline, RunManifest, run_pipeline
from salient.report import read_pairwise_csv, read_scores_csv
from salient import util

TINY = {
    'data': {'n_per_class': 12},
    'training': {'common': {'max_epochs': 5, 'patience': 0}},
    'saliency': {'smoothgrad_samples': 3},
    'export': {'scale': 1, 'margin': 1},
}


@pytest.fixture(scope='module')
def finished_run(tmp_path_factory):
    config = merge_config(TINY)
    out_dir = str(tmp_path_factory.mktemp('runs'))
    manifest = run_pipeline(config, out_dir)
    return config, out_dir, manifest


def _digests(manifest):
    return dict(manifest.artifacts)


def test_every_stage_completes(finished_run):
    config, out_dir, manifest = finished_run
    assert manifest.completed_stages == list(STAGES)
    run_dir = Pipeline(config, out_dir).run_dir
    assert os.path.basename(run_dir) == manifest.config_hash[:12]
    for path, digest in manifest.artifacts.items():
        assert util.file_digest(os.path.join(run_dir, path)) == digest
    expected = ['data/templates.json', 'data/train.bin', 'models/nn_adversarial.calibrated.json',
                'maps/nn_smoothgrad.bin', 'reports/scores.csv', 'reports/pairwise.csv',
                'reports/pair_table.csv', 'reports/calibration.csv', 'reports/summary.txt',
                'images/figure.pgm', 'images/ground_truth_A.pgm']
    for path in expected:
        assert path in manifest.artifacts
    with open(os.path.join(run_dir, 'manifest.json')) as f:
        saved = json.load(f)
    assert saved['seeds'] == {'data': 0, 'training': 0}


def test_scores_and_tests_cover_every_method(finished_run):
    config, out_dir, manifest = finished_run
    run_dir = Pipeline(config, out_dir).run_dir
    scores = read_scores_csv(os.path.join(run_dir, 'reports', 'scores.csv'))
    assert [(r['method'], r['criterion']) for r in scores[:2]] == [
        ('linear_weights', 'criterion1'), ('linear_gradient', 'criterion1')]
    assert len(scores) == 2 * len(METHODS)
    assert all(r['n'] == 36 and -1.0 <= r['mean_r'] <= 1.0 for r in scores)
    pairwise = read_pairwise_csv(os.path.join(run_dir, 'reports', 'pairwise.csv'))
    assert len(pairwise) == 2 * 21
    for row in pairwise:
        assert row['df'] == 35
        assert row['p_adj'] == pytest.approx(min(1.0, 21 * row['p']), rel=1e-4, abs=1e-12)


def test_maps_container_layout(finished_run):
    config, out_dir, _ = finished_run
    p = Pipeline(config, out_dir)
    header, maps, labels = p.maps('nn_gradient')
    assert maps.shape == (36, 3, 32, 32)
    assert labels.tolist() == np.repeat([0, 1, 2], 12).tolist()
    assert header['model'] == 'nn_plain' and header['saliency_method'] == 'gradient'
    # linear weights do not depend on the input
    _, weights, _ = p.maps('linear_weights')
    assert np.array_equal(weights[0], weights[-1])


def test_smoothgrad_maps_of_a_checkpoint_file(finished_run):
    config, out_dir, _ = finished_run
    p = Pipeline(config, out_dir)
    path = p.saliency_external(p.path('models', 'nn_plain.calibrated.json'),
                               p.path('data', 'validation.bin'), 'smooth_grad')
    assert path == p.path('external', 'nn_plain.calibrated.smoothgrad.bin')
    header, maps, labels = util.read_container(path, 'maps')
    assert maps.shape == (36, 3, 32, 32)
    assert header['options'] == dict(sigma=config['saliency']['smoothgrad_sigma'], samples=3)
    assert labels.tolist() == p.dataset('validation').labels.tolist()
    again = p.saliency_external(p.path('models', 'nn_plain.calibrated.json'),
                                p.path('data', 'validation.bin'), 'smoothgrad')
    assert np.array_equal(util.read_container(again, 'maps')[1], maps)


def test_calibrated_models_are_marked(finished_run):
    config, out_dir, _ = finished_run
    p = Pipeline(config, out_dir)
    for name in ('linear', 'nn_plain', 'nn_random', 'nn_adversarial'):
        assert p.model(name).calibrated
        assert not p.model(name, calibrated=False).calibrated


def test_rerun_skips_fresh_stages(finished_run, caplog):
    config, out_dir, manifest = finished_run
    before = _digests(manifest)
    caplog.set_level('INFO', logger='salient.pipeline')
    again = run_pipeline(config, out_dir)
    assert _digests(again) == before
    assert caplog.text.count('up to date, skipped') == len(STAGES)


def test_forced_parallel_rerun_reproduces_every_file(finished_run, tmp_path):
    config, out_dir, manifest = finished_run
    fresh = run_pipeline(copy.deepcopy(config), str(tmp_path), jobs=3)
    assert fresh.config_hash == manifest.config_hash
    assert _digests(fresh) == _digests(manifest)


def test_damaged_artifact_is_rebuilt(tmp_path):
    config = merge_config(TINY)
    p = Pipeline(config, str(tmp_path))
    manifest = p.run(until='generate-data')
    assert manifest.completed_stages == ['generate-data']
    target = p.path('data', 'test.bin')
    digest = manifest.artifacts['data/test.bin']
    with open(target, 'ab') as f:
        f.write(b'junk')
    assert not manifest.is_fresh('generate-data', p.stage_key('generate-data'), p.run_dir)
    rebuilt = Pipeline(config, str(tmp_path)).run(until='generate-data')
    assert rebuilt.artifacts['data/test.bin'] == digest


def test_stage_failure_is_recorded(tmp_path, monkeypatch):
    config = merge_config(TINY)

    def broken(self):
        raise DataError(u'no maps today')
    monkeypatch.setattr(pipeline_module.Pipeline, 'stage_saliency', broken)
    p = Pipeline(config, str(tmp_path))
    with pytest.raises(DataError):
        p.run()
    saved = RunManifest.load(p.manifest_path)
    assert saved.completed_stages == ['generate-data', 'train', 'calibrate']
    assert saved.stages['saliency']['status'] == 'failed'
    assert 'no maps today' in saved.stages['saliency']['error']


def test_manifest_of_another_config_is_rejected(tmp_path):
    config = merge_config(TINY)
    p = Pipeline(config, str(tmp_path))
    os.makedirs(p.run_dir)
    RunManifest('0' * 64, {}).save(p.manifest_path)
    with pytest.raises(DataError):
        Pipeline(config, str(tmp_path))
    with pytest.raises(DataError):
        Pipeline(merge_config(TINY), str(tmp_path / 'other')).run(until='publish')


def test_evaluation_subset_is_balanced(tmp_path):
    config = merge_config(dict(TINY, evaluation={'max_examples': 7}))
    p = Pipeline(config, str(tmp_path))
    p.run(until='generate-data')
    subset = p.evaluation_subset()
    assert np.bincount(subset.labels).tolist() == [2, 2, 2]


def test_method_subset_trains_only_needed_models(tmp_path):
    config = merge_config(dict(TINY, evaluation={'methods': ['linear_weights', 'linear_gradient'],
                                                 'criterion2': False}))
    manifest = run_pipeline(config, str(tmp_path), until='evaluate')
    models = sorted(p for p in manifest.artifacts if p.startswith('models/'))
    assert models == ['models/linear.calibrated.json', 'models/linear.json',
                      'models/linear.log.csv']
    assert 'reports/pair_table.csv' not in manifest.artifacts

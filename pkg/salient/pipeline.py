# coding: utf-8
"""The synthetic experiment as a sequence of cached stages.

Stages run in order::

    generate-data -> train -> calibrate -> saliency -> evaluate -> report

Everything is written below ``<out_dir>/<config hash[:12]>/``.  Each stage
has a cache key built from its config sections and the digests of the files
the earlier stages wrote; a stage whose key and output digests match the
manifest is skipped.
"""
import csv
import json
import logging
import os
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from .__version__ import VERSION
from .base import DataError
from .config import METHODS, config_hash, required_models, save_config, training_options
from .evaluation import (compare_methods, pairwise_table, score_criterion1,
                         score_criterion2, tune_smoothgrad_sigma)
from .image import export_map_grid, export_map_image
from .models import (load_checkpoint, multinomial_regression, neural_network, nll,
                     predict_classes, save_checkpoint)
from .numerics import RandomSource
from .report import (export_pair_table_csv, export_pairwise_csv, export_scores_csv,
                     format_summary)
from .saliency import SaliencyMethod, average_maps, batch_maps
from .synthdata import (SPLITS, GroundTruth, RegionSpec, build_templates, class_name,
                        default_layout, generate_dataset, load_dataset, save_dataset)
from .training import TrainingConfig, calibrate_temperature, train
from . import util

__all__ = ['STAGES', 'RunManifest', 'Pipeline', 'run_pipeline']

log = logging.getLogger(__name__)

STAGES = ('generate-data', 'train', 'calibrate', 'saliency', 'evaluate', 'report')
STAGE_SECTIONS = {
    'generate-data': ('data',),
    'train': ('models', 'training'),
    'calibrate': (),
    'saliency': ('saliency',),
    'evaluate': ('evaluation',),
    'report': ('export',),
}
MANIFEST_NAME = 'manifest.json'
CALIBRATION_FIELDS = ('model', 'temperature', 'val_nll_t1', 'val_nll', 'val_accuracy',
                      'test_accuracy')


def _now():
    return datetime.now(timezone.utc).isoformat()


class RunManifest(object):
    """What a run produced: per stage the cache key, status, timestamps and
    the SHA-256 digest of every file written (paths relative to the run
    directory)."""

    def __init__(self, config_hash, seeds, version=None, stages=None):
        self.config_hash = config_hash
        self.seeds = dict(seeds)
        self.version = version or '.'.join(map(str, VERSION))
        self.stages = OrderedDict(stages or ())

    @property
    def artifacts(self):
        found = OrderedDict()
        for stage in self.stages.values():
            found.update(stage.get('artifacts', {}))
        return found

    @property
    def completed_stages(self):
        return [name for name, stage in self.stages.items() if stage['status'] == 'completed']

    def is_fresh(self, stage, key, run_dir):
        entry = self.stages.get(stage)
        if not entry or entry['status'] != 'completed' or entry['key'] != key:
            return False
        for path, digest in entry['artifacts'].items():
            full = os.path.join(run_dir, path)
            if not os.path.exists(full) or util.file_digest(full) != digest:
                return False
        return True

    def start(self, stage, key):
        self.stages[stage] = dict(key=key, status='running', started=_now(),
                                  finished=None, artifacts={})

    def finish(self, stage, run_dir, paths):
        entry = self.stages[stage]
        entry['artifacts'] = OrderedDict(
            (path, util.file_digest(os.path.join(run_dir, path))) for path in paths)
        entry['status'] = 'completed'
        entry['finished'] = _now()

    def fail(self, stage, error):
        entry = self.stages[stage]
        entry['status'] = 'failed'
        entry['finished'] = _now()
        entry['error'] = '%s: %s' % (type(error).__name__, error)

    def as_dict(self):
        return dict(config_hash=self.config_hash, version=self.version, seeds=self.seeds,
                    stages=self.stages)

    @classmethod
    def from_dict(cls, doc):
        return cls(doc['config_hash'], doc['seeds'], doc.get('version'),
                   [(name, doc['stages'][name]) for name in STAGES if name in doc['stages']])

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(json.dumps(self.as_dict(), indent=2, sort_keys=True) + '\n')

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            try:
                return cls.from_dict(json.load(f))
            except (KeyError, ValueError) as e:
                raise DataError(u'%s: bad manifest: %s' % (path, e))

    def __repr__(self):
        return '<RunManifest %s stages=%s>' % (self.config_hash[:12],
                                               ','.join(self.completed_stages))


class Pipeline(object):
    """Runs the stages of one configuration in its run directory."""

    def __init__(self, config, out_dir, jobs=None):
        self.config = config
        self.hash = config_hash(config)
        self.run_dir = os.path.join(out_dir, self.hash[:12])
        self.jobs = int(jobs or config.get('jobs', 1))
        self.manifest_path = os.path.join(self.run_dir, MANIFEST_NAME)
        seeds = dict(data=config['data']['seed'], training=config['training']['common']['seed'])
        if os.path.exists(self.manifest_path):
            self.manifest = RunManifest.load(self.manifest_path)
            if self.manifest.config_hash != self.hash:
                raise DataError(u'%s belongs to another config' % self.manifest_path)
        else:
            self.manifest = RunManifest(self.hash, seeds)
        self._cache = {}

    # paths and loaders

    def path(self, *parts):
        return os.path.join(self.run_dir, *parts)

    def _rel(self, *parts):
        return '/'.join(parts)

    @property
    def methods(self):
        return list(self.config['evaluation']['methods'])

    @property
    def models(self):
        return required_models(self.config)

    def templates(self):
        if 'templates' not in self._cache:
            data = self.config['data']
            shape = (data['height'], data['width'])
            if data['layout'] is None:
                layout = default_layout(shape[0], shape[1], data['region_size'],
                                        data['num_classes'], data['shared_regions'])
            else:
                layout = [RegionSpec.from_dict(region) for region in data['layout']]
            self._cache['templates'] = build_templates(layout, shape, data['num_classes'])
        return self._cache['templates']

    def ground_truth(self):
        return GroundTruth.from_templates(self.templates(),
                                          masked=self.config['evaluation']['mask'])

    def dataset(self, split):
        key = 'dataset/' + split
        if key not in self._cache:
            self._cache[key] = load_dataset(self.path('data', split + '.bin'))
        return self._cache[key]

    def model(self, name, calibrated=True):
        suffix = '.calibrated.json' if calibrated else '.json'
        return load_checkpoint(self.path('models', name + suffix))

    def maps(self, method):
        header, maps, labels = util.read_container(self.path('maps', method + '.bin'), 'maps')
        return header, maps, labels

    def _map(self, func, items):
        if self.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(func, items))
        return [func(item) for item in items]

    # stages

    def stage_key(self, stage):
        index = STAGES.index(stage)
        upstream = OrderedDict()
        for earlier in STAGES[:index]:
            upstream.update(self.manifest.stages.get(earlier, {}).get('artifacts', {}))
        sections = dict((name, self.config[name]) for name in STAGE_SECTIONS[stage])
        if stage in ('train', 'saliency', 'evaluate'):
            sections['methods'] = self.methods
        return util.text_digest(util.canonical_json(
            dict(stage=stage, sections=sections, upstream=upstream)))

    def run(self, until='report', force=False):
        """Run every stage up to and including ``until``; return the manifest."""
        if until not in STAGES:
            raise DataError(u'unknown stage %r' % until)
        for name in ('data', 'models', 'maps', 'reports', 'images'):
            os.makedirs(self.path(name), exist_ok=True)
        save_config(self.config, self.path('config.json'))
        for stage in STAGES[:STAGES.index(until) + 1]:
            key = self.stage_key(stage)
            if not force and self.manifest.is_fresh(stage, key, self.run_dir):
                log.info('stage %s: up to date, skipped', stage)
                continue
            log.info('stage %s: started', stage)
            self.manifest.start(stage, key)
            try:
                paths = getattr(self, 'stage_' + stage.replace('-', '_'))()
            except Exception as e:
                self.manifest.fail(stage, e)
                self.manifest.save(self.manifest_path)
                log.error('stage %s failed: %s', stage, e)
                raise
            self.manifest.finish(stage, self.run_dir, paths)
            self.manifest.save(self.manifest_path)
            log.info('stage %s: finished, %d files', stage, len(paths))
        return self.manifest

    def stage_generate_data(self):
        data = self.config['data']
        templates = self.templates()
        with open(self.path('data', 'templates.json'), 'w', encoding='utf-8') as f:
            f.write(util.canonical_json(dict(
                shape=list(templates.shape), num_classes=templates.num_classes,
                layout=[region.as_dict() for region in templates.region_layout])) + '\n')
        source = RandomSource(data['seed'])
        paths = [self._rel('data', 'templates.json')]
        for split in SPLITS:
            dataset = generate_dataset(templates, split, data['n_per_class'], data['sigma'], source)
            save_dataset(dataset, self.path('data', split + '.bin'))
            self._cache['dataset/' + split] = dataset
            paths.append(self._rel('data', split + '.bin'))
        return paths

    def _fit(self, name, train_set, validation, directory):
        config = TrainingConfig(training_options(self.config, name))
        rng = RandomSource(self.config['data']['seed']).spawn('init/%s' % name)
        n_inputs = int(np.prod(train_set.shape))
        if name == 'linear':
            model = multinomial_regression(n_inputs, train_set.num_classes, rng)
        else:
            model = neural_network(n_inputs, self.config['models']['hidden_widths'],
                                   train_set.num_classes, rng)
        trained = train(config, train_set, model, validation)
        save_checkpoint(trained.classifier, self.path(directory, name + '.json'))
        trained.write_log_csv(self.path(directory, name + '.log.csv'))
        log.info('trained %s: %d epochs, val_acc=%.4f', name, trained.epochs,
                 trained.training_log[-1].val_acc)
        return [self._rel(directory, name + '.json'), self._rel(directory, name + '.log.csv')]

    def _train_one(self, name):
        return self._fit(name, self.dataset('train'), self.dataset('validation'), 'models')

    def stage_train(self):
        return [path for paths in self._map(self._train_one, self.models) for path in paths]

    # dataset and checkpoint files from elsewhere, written below external/

    def _external(self):
        os.makedirs(self.path('external'), exist_ok=True)
        save_config(self.config, self.path('config.json'))

    def train_external(self, name, dataset_path, validation_path=None):
        """Train model ``name`` on dataset files; return the checkpoint and log paths."""
        train_set = load_dataset(dataset_path)
        validation = load_dataset(validation_path) if validation_path else None
        self._external()
        return [self.path(*rel.split('/'))
                for rel in self._fit(name, train_set, validation, 'external')]

    def saliency_external(self, checkpoint_path, dataset_path, method='gradient'):
        """Maps of a checkpoint file for a dataset file; return the maps path."""
        saliency_method = SaliencyMethod.resolve(method).name
        model = load_checkpoint(checkpoint_path)
        dataset = load_dataset(dataset_path)
        stem = os.path.splitext(os.path.basename(checkpoint_path))[0]
        self._external()
        path = self.path('external', '%s.%s.bin' % (stem, saliency_method))
        self._write_maps(path, model, dataset, saliency_method, saliency_method,
                         self.config['saliency']['smoothgrad_sigma'], dict(model=stem))
        log.info('wrote %s maps of %s for %d examples', saliency_method, stem, len(dataset))
        return path

    def stage_calibrate(self):
        validation, test = self.dataset('validation'), self.dataset('test')
        rows = []
        for name in self.models:
            model = self.model(name, calibrated=False)
            before = nll(model, validation.flat_inputs, validation.labels)
            val_acc = float(np.mean(predict_classes(model, validation.flat_inputs)
                                    == validation.labels))
            t = calibrate_temperature(model, validation)
            after = nll(model, validation.flat_inputs, validation.labels)
            test_acc = float(np.mean(predict_classes(model, test.flat_inputs) == test.labels))
            save_checkpoint(model, self.path('models', name + '.calibrated.json'))
            rows.append([name, util.fmt_real(t), util.fmt_real(before), util.fmt_real(after),
                         util.fmt_real(val_acc), util.fmt_real(test_acc)])
        with open(self.path('reports', 'calibration.csv'), 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CALIBRATION_FIELDS)
            writer.writerows(rows)
        return ([self._rel('models', name + '.calibrated.json') for name in self.models]
                + [self._rel('reports', 'calibration.csv')])

    def evaluation_subset(self):
        test = self.dataset('test')
        limit = self.config['evaluation']['max_examples']
        if limit is None or limit >= len(test):
            return test
        per_class = max(1, limit // test.num_classes)
        index = np.concatenate([np.flatnonzero(test.labels == c)[:per_class]
                                for c in range(test.num_classes)])
        return test.subset(index)

    def smoothgrad_sigma(self):
        """Configured SmoothGrad noise level, or the tuned one on validation data."""
        saliency = self.config['saliency']
        if not saliency['tune_sigma']:
            return saliency['smoothgrad_sigma'], []
        validation = self.dataset('validation')
        count = min(saliency['tune_examples'], len(validation))
        index = np.linspace(0, len(validation) - 1, count).astype(np.int64)
        subset = validation.subset(index)
        best, means = tune_smoothgrad_sigma(
            self.model(METHODS['nn_smoothgrad'][0]), subset.inputs, subset.labels,
            self.ground_truth(), saliency['sigma_grid'], saliency['smoothgrad_samples'],
            RandomSource(self.config['data']['seed']))
        path = self.path('reports', 'smoothgrad_tuning.csv')
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(('sigma', 'mean_r'))
            writer.writerows((util.fmt_real(sigma), util.fmt_real(mean))
                             for sigma, mean in means.items())
        log.info('tuned smoothgrad sigma: %g', best)
        return best, [self._rel('reports', 'smoothgrad_tuning.csv')]

    def _write_maps(self, path, model, dataset, method, saliency_method, sigma, header):
        """Maps of every class for every example, as an ``(n, classes, h, w)`` container."""
        options = {}
        if saliency_method == 'smoothgrad':
            options = dict(sigma=sigma, samples=self.config['saliency']['smoothgrad_samples'])
        source = RandomSource(self.config['data']['seed'])
        maps = np.stack([
            batch_maps(model, dataset.inputs, c, saliency_method,
                       source.spawn('smoothgrad/%s/%s' % (method, class_name(c))), **options)
            for c in range(model.num_classes)], axis=1)
        header.update(kind='maps', method=method, saliency_method=saliency_method,
                      options=options)
        util.write_container(path, header, maps, dataset.labels)

    def _maps_for(self, method, dataset, sigma):
        model_name, saliency_method = METHODS[method]
        self._write_maps(self.path('maps', method + '.bin'), self.model(model_name), dataset,
                         method, saliency_method, sigma, dict(model=model_name))
        return self._rel('maps', method + '.bin')

    def stage_saliency(self):
        dataset = self.evaluation_subset()
        sigma, paths = self.smoothgrad_sigma() if 'nn_smoothgrad' in self.methods else (None, [])
        return paths + self._map(lambda method: self._maps_for(method, dataset, sigma),
                                 self.methods)

    def evaluation(self):
        """Criterion scores, pairwise tests and per-pair tables of all methods."""
        if 'evaluation' in self._cache:
            return self._cache['evaluation']
        settings = self.config['evaluation']
        truth = self.ground_truth()
        scores, tables = [], OrderedDict()
        for method in self.methods:
            _, maps, labels = self.maps(method)
            if settings['criterion1']:
                own = maps[np.arange(len(labels)), labels]
                scores.append(score_criterion1(own, labels, truth, method))
            if settings['criterion2']:
                scores.append(score_criterion2(maps, labels, truth, method))
                tables[method] = pairwise_table(maps, labels, truth)
        report = compare_methods(scores, settings['bonferroni_family'], self.methods)
        self._cache['evaluation'] = (report, tables)
        return report, tables

    def stage_evaluate(self):
        report, tables = self.evaluation()
        export_scores_csv(report, self.path('reports', 'scores.csv'))
        export_pairwise_csv(report, self.path('reports', 'pairwise.csv'))
        paths = [self._rel('reports', 'scores.csv'), self._rel('reports', 'pairwise.csv')]
        if tables:
            export_pair_table_csv(tables, self.path('reports', 'pair_table.csv'))
            paths.append(self._rel('reports', 'pair_table.csv'))
        return paths

    def figure_rows(self):
        """Ground truth row, then one row of class-average maps per method."""
        truth = self.ground_truth()
        normalize = self.config['export']['normalize_average']
        rows = [list(truth.informative_maps)]
        for method in self.methods:
            _, maps, labels = self.maps(method)
            rows.append([average_maps(maps[labels == c, c], normalize)
                         for c in range(truth.num_classes)])
        return rows

    def stage_report(self):
        export = self.config['export']
        report, _ = self.evaluation()
        with open(self.path('reports', 'summary.txt'), 'w', encoding='utf-8') as f:
            f.write(format_summary(report))
        paths = [self._rel('reports', 'summary.txt')]
        render = dict(percentile=export['percentile'], scale=export['scale'],
                      margin=export['margin'])
        truth = self.ground_truth()
        for c, grid in enumerate(truth.informative_maps):
            name = 'ground_truth_%s.pgm' % class_name(c)
            export_map_image(grid, self.path('images', name), **render)
            paths.append(self._rel('images', name))
        rows = self.figure_rows()
        export_map_grid(rows, self.path('images', 'figure.pgm'), **render)
        paths.append(self._rel('images', 'figure.pgm'))
        if export['png']:
            export_map_grid(rows, self.path('images', 'figure.png'),
                            palette=export['palette'], **render)
            paths.append(self._rel('images', 'figure.png'))
        return paths


def run_pipeline(config, out_dir, jobs=None, until='report', force=False):
    """Run the experiment for ``config`` below ``out_dir``; returns the RunManifest."""
    return Pipeline(config, out_dir, jobs).run(until, force)


if __name__=="__main__":
    from doctest import testmod
    testmod()

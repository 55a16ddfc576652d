# -*- coding: utf-8 -*-
from collections import OrderedDict

import pytest

from salient.evaluation import CriterionScore, compare_methods
from salient.report import (PAIRWISE_FIELDS, SCORE_FIELDS, export_pair_table_csv,
                            export_pairwise_csv, export_scores_csv, format_summary,
                            read_pairwise_csv, read_scores_csv)


@pytest.fixture
def report(rng):
    base = rng.uniform(0.0, 0.5, size=30)
    scores = []
    for criterion in ('criterion1', 'criterion2'):
        scores += [CriterionScore('nn_adversarial_gradient', base + 0.2 + rng.normal(0, 0.02, 30),
                                  criterion),
                   CriterionScore('nn_gradient', base + rng.normal(0, 0.02, 30), criterion),
                   CriterionScore('nn_smoothgrad', base + rng.normal(0, 0.02, 30), criterion)]
    return compare_methods(scores, order=['nn_gradient', 'nn_smoothgrad',
                                          'nn_adversarial_gradient'])


def test_scores_csv(tmp_path, report):
    path = tmp_path / 'scores.csv'
    export_scores_csv(report, str(path))
    assert path.read_text().splitlines()[0] == ','.join(SCORE_FIELDS)
    rows = read_scores_csv(str(path))
    assert [(r['method'], r['criterion']) for r in rows[:3]] == [
        ('nn_gradient', 'criterion1'), ('nn_smoothgrad', 'criterion1'),
        ('nn_adversarial_gradient', 'criterion1')]
    score = report.criterion2['nn_smoothgrad']
    row = rows[4]
    assert row['mean_r'] == pytest.approx(score.mean, rel=1e-5)
    assert row['stderr'] == pytest.approx(score.standard_error, rel=1e-5)
    assert row['n'] == 30


def test_pairwise_csv(tmp_path, report):
    path = tmp_path / 'pairwise.csv'
    export_pairwise_csv(report, str(path))
    assert path.read_text().splitlines()[0] == ','.join(PAIRWISE_FIELDS)
    rows = read_pairwise_csv(str(path))
    assert len(rows) == 6
    first = rows[0]
    assert (first['method_a'], first['method_b'], first['criterion']) == (
        'nn_gradient', 'nn_smoothgrad', 'criterion1')
    adversarial = [r for r in rows if r['method_b'] == 'nn_adversarial_gradient']
    assert all(r['t'] < 0 and r['p_adj'] < 0.001 for r in adversarial)
    assert all(r['df'] == 29 for r in rows)


def test_pair_table_csv(tmp_path):
    path = tmp_path / 'pair_table.csv'
    export_pair_table_csv(OrderedDict([('nn_gradient', OrderedDict([((0, 1), 0.25),
                                                                    ((2, 0), -0.125)]))]),
                          str(path))
    assert path.read_text() == ('method,source,target,mean_r\n'
                                'nn_gradient,A,B,0.25\n'
                                'nn_gradient,C,A,-0.125\n')


def test_summary_names_significant_winners(report):
    text = format_summary(report)
    assert text.startswith('criterion1 (n=30)')
    assert 'nn_adversarial_gradient > nn_gradient' in text
    assert 'nn_adversarial_gradient > nn_smoothgrad' in text
    assert '***' in text
    assert 'per_criterion family' in text


def test_files_are_byte_stable(tmp_path, report):
    a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
    export_pairwise_csv(report, str(a))
    export_pairwise_csv(report, str(b))
    assert a.read_bytes() == b.read_bytes()
    assert b'\r' not in a.read_bytes()

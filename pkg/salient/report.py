# coding: utf-8
"""CSV and text reports of an EvaluationReport.

All reals are written with six significant digits; rows follow the
configured method order, criterion 1 first.
"""
import csv
import logging

from .evaluation import CRITERIA
from .synthdata import class_name
from .util import fmt_real

__all__ = ['SCORE_FIELDS', 'PAIRWISE_FIELDS', 'PAIR_TABLE_FIELDS',
           'export_scores_csv', 'export_pairwise_csv', 'export_pair_table_csv',
           'read_scores_csv', 'read_pairwise_csv', 'format_summary']

log = logging.getLogger(__name__)

SCORE_FIELDS = ('method', 'criterion', 'mean_r', 'stderr', 'n')
PAIRWISE_FIELDS = ('method_a', 'method_b', 'criterion', 't', 'df', 'p', 'p_adj')
PAIR_TABLE_FIELDS = ('method', 'source', 'target', 'mean_r')


def _writer(f):
    return csv.writer(f, lineterminator='\n')


def export_scores_csv(report, path):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = _writer(f)
        writer.writerow(SCORE_FIELDS)
        for criterion in CRITERIA:
            for method, score in report.scores(criterion).items():
                writer.writerow([method, criterion, fmt_real(score.mean),
                                 fmt_real(score.standard_error), score.n])


def export_pairwise_csv(report, path):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = _writer(f)
        writer.writerow(PAIRWISE_FIELDS)
        for criterion, a, b, result in report.rows():
            writer.writerow([a, b, criterion, fmt_real(result.t_statistic),
                             result.degrees_of_freedom, fmt_real(result.p_value),
                             fmt_real(result.p_adjusted)])


def export_pair_table_csv(tables, path):
    """``tables`` maps method name to ``{(source, target): mean_r}``."""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = _writer(f)
        writer.writerow(PAIR_TABLE_FIELDS)
        for method, table in tables.items():
            for (source, target), mean_r in table.items():
                writer.writerow([method, class_name(source), class_name(target),
                                 fmt_real(mean_r)])


def read_scores_csv(path):
    """Rows of a scores CSV with numeric fields converted."""
    with open(path, newline='', encoding='utf-8') as f:
        return [dict(row, mean_r=float(row['mean_r']), stderr=float(row['stderr']),
                     n=int(row['n']))
                for row in csv.DictReader(f)]


def read_pairwise_csv(path):
    with open(path, newline='', encoding='utf-8') as f:
        return [dict(row, t=float(row['t']), df=int(row['df']), p=float(row['p']),
                     p_adj=float(row['p_adj']))
                for row in csv.DictReader(f)]


def _stars(p):
    if p < 0.001:
        return '***'
    if p < 0.01:
        return '**'
    if p < 0.05:
        return '*'
    return ''


def format_summary(report):
    """Plain text table of mean r and standard errors per criterion,
    followed by the significant pairwise differences."""
    lines = []
    for criterion in CRITERIA:
        scores = report.scores(criterion)
        if not scores:
            continue
        lines.append('%s (n=%d)' % (criterion, next(iter(scores.values())).n))
        width = max(len(name) for name in scores)
        for name, score in scores.items():
            lines.append('  %-*s  %+.4f +/- %.4f' % (width, name, score.mean, score.standard_error))
        lines.append('')
    lines.append('pairwise differences with adjusted p < 0.05 (%s family)' % report.family)
    for criterion, a, b, result in report.rows():
        if result.p_adjusted < 0.05:
            winner, loser = (a, b) if result.t_statistic > 0 else (b, a)
            lines.append('  %s: %s > %s  t=%s p_adj=%s %s' % (
                criterion, winner, loser, fmt_real(abs(result.t_statistic), 4),
                fmt_real(result.p_adjusted, 3), _stars(result.p_adjusted)))
    return '\n'.join(lines) + '\n'


if __name__=="__main__":
    from doctest import testmod
    testmod()

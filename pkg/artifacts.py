"""Artifact files exchanged between pipeline stages.

Every CSV starts with '# key=value' lines holding the resolved run config, so each
output describes the run that produced it.
"""
import csv
import json
import os

import numpy as np

from config import logger
from dataset import DatasetParseError, FeatureRanking, write_matrix_csv
from ml_eval import METRICS
from scmf_optimizer import relative_changes


def config_header(config_items):
    return [f"{key}={value}" for key, value in config_items]


def _write_rows(path, header_lines, columns, rows):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        for line in header_lines:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")


def write_ranking_csv(path, ranking, header_lines=()):
    rows = [(rank, int(index), repr(float(ranking.scores[index])))
            for rank, index in enumerate(ranking.order, 1)]
    _write_rows(path, header_lines, ('rank', 'feature_index', 'score'), rows)


def read_ranking_csv(path):
    """Read a ranking written by write_ranking_csv.

    Raises:
        DatasetParseError: Naming the offending line when a row is malformed.
    """
    order, scores = [], {}
    with open(path, newline='', encoding='utf-8') as handle:
        header_seen = False
        for line_number, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if not header_seen:
                if line.split(',') != ['rank', 'feature_index', 'score']:
                    raise DatasetParseError("expected header 'rank,feature_index,score'", path, line_number)
                header_seen = True
                continue
            cells = line.split(',')
            try:
                if len(cells) != 3:
                    raise ValueError
                rank, index, score = int(cells[0]), int(cells[1]), float(cells[2])
            except ValueError:
                raise DatasetParseError(f"malformed ranking row '{line}'", path, line_number)
            if rank != len(order) + 1 or index in scores or index < 0 or not np.isfinite(score):
                raise DatasetParseError(f"inconsistent ranking row '{line}'", path, line_number)
            order.append(index)
            scores[index] = score
    if not order:
        raise DatasetParseError("ranking file has no rows", path)
    d = len(order)
    if max(order) >= d:
        raise DatasetParseError(f"feature indices do not form a permutation of 0..{d - 1}", path)
    return FeatureRanking(order=np.array(order), scores=np.array([scores[i] for i in range(d)]))


def write_rwmi_csv(path, R_w, header_lines=()):
    write_matrix_csv(path, R_w, header_lines)
    logger.info(f"Wrote {path}")


def write_trace_csv(path, state, header_lines=()):
    rows = [(iteration, repr(value), repr(change))
            for iteration, (value, change) in enumerate(zip(state.objective_trace, relative_changes(state)), 1)]
    _write_rows(path, header_lines, ('iteration', 'objective', 'relative_change'), rows)


def write_report_csv(path, report, header_lines=()):
    rows = [(step.feature_count,) + tuple(repr(getattr(step, m)) for m in METRICS) for step in report.steps]
    _write_rows(path, header_lines, ('feature_count',) + METRICS, rows)


def write_report_json(path, report, config):
    payload = {
        'classifier': report.classifier,
        'aggregation': 'mean and population std over feature-count steps',
        'feature_counts': report.feature_counts,
        'summary': report.summary(),
        'config': config,
    }
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
    logger.info(f"Wrote {path}")


def write_table_csv(path, columns, rows, header_lines=()):
    _write_rows(path, header_lines, columns, rows)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path

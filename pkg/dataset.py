import csv
import os
from dataclasses import dataclass

import numpy as np
from dotenv import dotenv_values
from sklearn.preprocessing import MinMaxScaler, StandardScaler

from config import logger

SCALINGS = ('standard', 'minmax', 'none')


class DatasetParseError(ValueError):
    """Raised when a dataset file cannot be parsed."""

    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        location = f"{path}:{line_number}: " if path and line_number else ''
        super().__init__(f"{location}{message}")


class LabelValidationError(ValueError):
    """Raised when a label cell is not 0 or 1."""


@dataclass(frozen=True, eq=False)
class MultiLabelDataset:
    """Paired feature and label matrices split into train and test halves."""
    name: str
    X_train: np.ndarray
    Y_train: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray

    def __post_init__(self):
        for field in ('X_train', 'Y_train', 'X_test', 'Y_test'):
            object.__setattr__(self, field, np.array(getattr(self, field), dtype=np.float64))
        if any(getattr(self, f).ndim != 2 for f in ('X_train', 'Y_train', 'X_test', 'Y_test')):
            raise ValueError("Feature and label matrices must be two-dimensional")
        if self.X_train.shape[1] != self.X_test.shape[1]:
            raise ValueError(
                f"Train/test feature widths differ: {self.X_train.shape[1]} vs {self.X_test.shape[1]}")
        if self.Y_train.shape[1] != self.Y_test.shape[1]:
            raise ValueError(
                f"Train/test label widths differ: {self.Y_train.shape[1]} vs {self.Y_test.shape[1]}")
        if self.X_train.shape[0] != self.Y_train.shape[0] or self.X_test.shape[0] != self.Y_test.shape[0]:
            raise ValueError("Feature and label matrices must have the same number of rows")
        if self.n_train < 1 or self.n_test < 1 or self.n_features < 1:
            raise ValueError("Dataset needs at least one train row, one test row and one feature")
        if self.n_labels < 2:
            raise ValueError(f"Dataset needs at least 2 labels, got {self.n_labels}")
        for Y in (self.Y_train, self.Y_test):
            if not np.isin(Y, (0.0, 1.0)).all():
                raise LabelValidationError("Label matrices must be binary")
        for M in (self.X_train, self.Y_train, self.X_test, self.Y_test):
            M.setflags(write=False)

    @property
    def n_train(self):
        return self.X_train.shape[0]

    @property
    def n_test(self):
        return self.X_test.shape[0]

    @property
    def n_features(self):
        return self.X_train.shape[1]

    @property
    def n_labels(self):
        return self.Y_train.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureRanking:
    """Feature indices ordered by descending score."""
    order: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        d = len(self.scores)
        if len(self.order) != d or not np.array_equal(np.sort(self.order), np.arange(d)):
            raise ValueError("Ranking order must be a permutation of the feature indices")

    def top(self, count):
        """Return the indices of the `count` highest-ranked features."""
        return self.order[:count]

    def __len__(self):
        return len(self.order)


def _parse_rows(path):
    """Read a CSV/TSV file into a float matrix.

    Lines starting with '#' and blank lines are skipped. A first data line made
    only of non-numeric cells is treated as a header.

    Raises:
        DatasetParseError: On ragged rows or non-numeric/non-finite cells.
    """
    delimiter = '\t' if path.lower().endswith(('.tsv', '.tab')) else ','
    rows = []
    width = None
    seen_data = False
    with open(path, newline='', encoding='utf-8') as handle:
        for line_number, cells in enumerate(csv.reader(handle, delimiter=delimiter, quoting=csv.QUOTE_NONE), 1):
            if not cells or not ''.join(cells).strip() or cells[0].lstrip().startswith('#'):
                continue
            cells = [cell.strip() for cell in cells]
            try:
                values = [float(cell) for cell in cells]
            except ValueError:
                if not seen_data and not any(_is_number(cell) for cell in cells):
                    logger.debug(f"Skipping header line {line_number} of {path}")
                    seen_data = True
                    continue
                raise DatasetParseError("non-numeric cell", path, line_number)
            seen_data = True
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DatasetParseError(
                    f"expected {width} columns, found {len(values)}", path, line_number)
            if not np.all(np.isfinite(values)):
                raise DatasetParseError("non-finite value", path, line_number)
            rows.append(values)
    if not rows:
        raise DatasetParseError("no data rows", path)
    return np.asarray(rows, dtype=np.float64)


def _is_number(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _split_labels(matrix, label_count, path):
    total_cols = matrix.shape[1]
    if label_count < 1 or label_count >= total_cols:
        raise ValueError(
            f"label_count must be between 1 and {total_cols - 1} for {path}, got {label_count}")
    X = matrix[:, :total_cols - label_count]
    Y = matrix[:, total_cols - label_count:]
    bad = np.argwhere(~np.isin(Y, (0.0, 1.0)))
    if len(bad):
        row, col = bad[0]
        raise LabelValidationError(
            f"{path}: non-binary label value {Y[row, col]!r} in data row {row + 1}, label column {col}")
    return X, Y


def read_manifest(path):
    """Read `label_count=<int>` from a manifest file."""
    values = dotenv_values(path)
    if 'label_count' not in values:
        raise DatasetParseError("manifest has no label_count entry", path)
    try:
        return int(values['label_count'])
    except (TypeError, ValueError):
        raise DatasetParseError(f"label_count is not an integer: {values['label_count']!r}", path)


def load_dataset(train_path, test_path, label_count, scaling='standard', name=None):
    """Load a train/test pair whose last `label_count` columns are labels.

    Args:
        train_path (str): CSV/TSV file holding the training rows.
        test_path (str): CSV/TSV file holding the test rows.
        label_count (int): Number of trailing label columns.
        scaling (str): 'standard', 'minmax' or 'none'. Statistics are fitted on the
            training half and applied to both halves.
        name (str, optional): Dataset identifier; defaults to the training file stem.

    Returns:
        MultiLabelDataset: The split, validated and scaled dataset.
    """
    if scaling not in SCALINGS:
        raise ValueError(f"Unknown scaling '{scaling}', expected one of {SCALINGS}")
    for path in (train_path, test_path):
        if not os.path.exists(path):
            raise FileNotFoundError(f"Dataset file not found: {path}")

    train = _parse_rows(train_path)
    test = _parse_rows(test_path)
    if train.shape[1] != test.shape[1]:
        raise DatasetParseError(
            f"train has {train.shape[1]} columns but test has {test.shape[1]}", test_path)
    X_train, Y_train = _split_labels(train, label_count, train_path)
    X_test, Y_test = _split_labels(test, label_count, test_path)
    X_train, X_test = scale_pair(X_train, X_test, scaling)

    if name is None:
        name = os.path.splitext(os.path.basename(train_path))[0]
    dataset = MultiLabelDataset(name, X_train, Y_train, X_test, Y_test)
    logger.info(
        f"Loaded dataset {name}: n_train={dataset.n_train}, n_test={dataset.n_test}, "
        f"d={dataset.n_features}, c={dataset.n_labels}, scaling={scaling}")
    return dataset


def column_standardize(X):
    """Scale every column to mean 0 and unit (population) standard deviation.

    Constant columns become all-zero columns.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValueError("Cannot standardize an empty matrix")
    return StandardScaler().fit_transform(X)


def scale_pair(X_train, X_test, scaling='standard'):
    """Fit a scaler on the training features and apply it to both halves."""
    if scaling == 'none':
        return X_train.copy(), X_test.copy()
    scaler = StandardScaler() if scaling == 'standard' else MinMaxScaler()
    scaler.fit(X_train)
    return scaler.transform(X_train), scaler.transform(X_test)


def rank_features(scores):
    """Rank features by descending score, ties broken by ascending index.

    Raises:
        ValueError: If any score is NaN or infinite.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError("Scores must be a one-dimensional vector")
    if not np.all(np.isfinite(scores)):
        raise ValueError("Scores must be finite (NaN or Inf found)")
    # stable sort on the negated scores keeps equal scores in index order
    order = np.argsort(-scores, kind='stable')
    return FeatureRanking(order=order, scores=scores)


def write_matrix_csv(path, M, header_lines=()):
    """Write a matrix as CSV with full float precision and '#' header lines."""
    header = '\n'.join(header_lines)
    np.savetxt(path, np.atleast_2d(M), delimiter=',', fmt='%.17g', header=header, comments='# ')


def read_matrix_csv(path):
    """Read a matrix written by write_matrix_csv."""
    return _parse_rows(path)

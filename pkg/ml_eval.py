import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn import metrics

from config import logger

CLASSIFIERS = ('knn3', 'mlknn10')
METRICS = ('micro_f1', 'macro_f1', 'hamming_loss', 'zero_one_loss')


@dataclass(frozen=True, eq=False)
class PredictionSet:
    Y_pred: np.ndarray
    Y_scores: np.ndarray


@dataclass(frozen=True)
class StepRecord:
    feature_count: int
    micro_f1: float
    macro_f1: float
    hamming_loss: float
    zero_one_loss: float


@dataclass
class EvalReport:
    """Per-step metrics of a ranking plus their mean and standard deviation over steps."""
    classifier: str
    steps: list = field(default_factory=list)

    def values(self, metric):
        return np.array([getattr(step, metric) for step in self.steps])

    def summary(self):
        """Mean and population standard deviation of every metric across steps."""
        return {
            metric: {'mean': float(self.values(metric).mean()), 'std': float(self.values(metric).std())}
            for metric in METRICS
        }

    @property
    def feature_counts(self):
        return [step.feature_count for step in self.steps]


def _validate_selection(X_train, X_test, selected, k):
    selected = np.asarray(selected, dtype=np.int64)
    if selected.size == 0:
        raise ValueError("At least one feature must be selected")
    if selected.min() < 0 or selected.max() >= X_train.shape[1]:
        raise ValueError(f"Selected feature indices must lie in [0, {X_train.shape[1]})")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > X_train.shape[0]:
        raise ValueError(f"k={k} exceeds the number of training instances {X_train.shape[0]}")
    return X_train[:, selected], X_test[:, selected]


def nearest_neighbors(train, query, k, exclude_self=False):
    """Indices of the k nearest training rows for each query row.

    Euclidean distance; ties are broken by ascending training index. With
    `exclude_self` the query is the training set and each row skips itself.
    """
    distances = cdist(query, train, metric='euclidean')
    if exclude_self:
        np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind='stable')[:, :k]


def knn_predict(X_train, Y_train, X_test, k, selected):
    """Per-label majority vote over the k nearest training instances."""
    train, test = _validate_selection(X_train, X_test, selected, k)
    neighbors = nearest_neighbors(train, test, k)
    votes = Y_train[neighbors].sum(axis=1)
    return PredictionSet(Y_pred=(votes > k / 2).astype(int), Y_scores=votes / k)


class MLkNN:
    """Multi-label kNN with per-label MAP estimation from neighbor label counts.

    Args:
        k (int): Number of neighbors.
        s (float): Laplace smoothing constant.
    """

    def __init__(self, k=10, s=1.0):
        if s <= 0:
            raise ValueError(f"smoothing must be positive, got {s}")
        self.k = k
        self.s = s

    def fit(self, X, Y):
        """Estimate priors and neighbor-count posteriors from the training data.

        Raises:
            ValueError: If k >= n_train. Leave-one-out neighbor counts exclude the
                instance itself, so only n_train - 1 neighbors exist.
        """
        self._X = np.asarray(X, dtype=np.float64)
        self._Y = np.asarray(Y).astype(int)
        self._num_ins, self._num_labels = self._Y.shape
        if self.k >= self._num_ins:
            raise ValueError(f"k={self.k} needs more than {self.k} training instances for leave-one-out counts")
        self.prior_1 = (self.s + self._Y.sum(axis=0)) / (2 * self.s + self._num_ins)
        self.prior_0 = 1 - self.prior_1
        self.cond_1, self.cond_0 = self._compute_cond()
        return self

    def _neighbor_counts(self, neighbors):
        # number of neighbors carrying each label: (instances × labels)
        return self._Y[neighbors].sum(axis=1)

    def _compute_cond(self):
        neighbors = nearest_neighbors(self._X, self._X, self.k, exclude_self=True)
        deltas = self._neighbor_counts(neighbors)
        c1 = np.zeros((self._num_labels, self.k + 1))
        c0 = np.zeros((self._num_labels, self.k + 1))
        for j in range(self._num_labels):
            has_label = self._Y[:, j] == 1
            c1[j] = np.bincount(deltas[has_label, j], minlength=self.k + 1)
            c0[j] = np.bincount(deltas[~has_label, j], minlength=self.k + 1)
        cond_1 = (self.s + c1) / (self.s * (self.k + 1) + c1.sum(axis=1, keepdims=True))
        cond_0 = (self.s + c0) / (self.s * (self.k + 1) + c0.sum(axis=1, keepdims=True))
        return cond_1, cond_0

    def predict(self, X):
        neighbors = nearest_neighbors(self._X, np.asarray(X, dtype=np.float64), self.k)
        deltas = self._neighbor_counts(neighbors)
        labels = np.arange(self._num_labels)[None, :]
        p1 = self.prior_1[None, :] * self.cond_1[labels, deltas]
        p0 = self.prior_0[None, :] * self.cond_0[labels, deltas]
        scores = p1 / (p1 + p0)
        return PredictionSet(Y_pred=(p1 > p0).astype(int), Y_scores=scores)


def mlknn_predict(X_train, Y_train, X_test, k, smoothing, selected):
    """Fit MLkNN on the selected training columns and predict the test rows."""
    train, test = _validate_selection(X_train, X_test, selected, k)
    return MLkNN(k=k, s=smoothing).fit(train, Y_train).predict(test)


def _check_pair(Y_true, Y_pred):
    Y_true = np.asarray(Y_true).astype(int)
    Y_pred = np.asarray(Y_pred).astype(int)
    if Y_true.shape != Y_pred.shape:
        raise ValueError(f"Shape mismatch: {Y_true.shape} vs {Y_pred.shape}")
    return Y_true, Y_pred


def micro_f1(Y_true, Y_pred):
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    return float(metrics.f1_score(Y_true, Y_pred, average='micro', zero_division=0))


def macro_f1(Y_true, Y_pred):
    """Unweighted mean of per-label F1; a label with no true and no predicted positives scores 0."""
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    return float(metrics.f1_score(Y_true, Y_pred, average='macro', zero_division=0))


def hamming_loss(Y_true, Y_pred):
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    return float(metrics.hamming_loss(Y_true, Y_pred))


def zero_one_loss(Y_true, Y_pred):
    Y_true, Y_pred = _check_pair(Y_true, Y_pred)
    return float(metrics.zero_one_loss(Y_true, Y_pred))


def step_feature_counts(d, all_steps_below=100):
    """Feature counts evaluated for a ranking over d features.

    Top 1%..20% in 1% steps, each max(1, round-half-up(p·d/100)), deduplicated;
    when d < all_steps_below every count 1..d is used instead.
    """
    if d < all_steps_below:
        return list(range(1, d + 1))
    counts = []
    for percent in range(1, 21):
        count = min(d, max(1, math.floor(percent * d / 100 + 0.5)))
        if not counts or count != counts[-1]:
            counts.append(count)
    return counts


def predict(dataset, selected, classifier):
    if classifier == 'knn3':
        return knn_predict(dataset.X_train, dataset.Y_train, dataset.X_test, 3, selected)
    if classifier == 'mlknn10':
        return mlknn_predict(dataset.X_train, dataset.Y_train, dataset.X_test, 10, 1.0, selected)
    raise ValueError(f"Unknown classifier '{classifier}', expected one of {CLASSIFIERS}")


def protocol_eval(dataset, ranking, classifier='knn3', all_steps_below=100):
    """Evaluate growing top-ranked feature subsets with one classifier.

    Args:
        dataset (MultiLabelDataset): Train/test data.
        ranking (FeatureRanking): Ranking over all d features.
        classifier (str): 'knn3' or 'mlknn10'.
        all_steps_below (int): d threshold under which every count 1..d is evaluated.

    Returns:
        EvalReport
    """
    if len(ranking) != dataset.n_features:
        raise ValueError(
            f"Ranking covers {len(ranking)} features but the dataset has {dataset.n_features}")
    report = EvalReport(classifier=classifier)
    for count in step_feature_counts(dataset.n_features, all_steps_below):
        prediction = predict(dataset, ranking.top(count), classifier)
        Y_true, Y_pred = dataset.Y_test, prediction.Y_pred
        report.steps.append(StepRecord(
            feature_count=count,
            micro_f1=micro_f1(Y_true, Y_pred),
            macro_f1=macro_f1(Y_true, Y_pred),
            hamming_loss=hamming_loss(Y_true, Y_pred),
            zero_one_loss=zero_one_loss(Y_true, Y_pred),
        ))
        logger.debug(f"{classifier} with {count} features: {report.steps[-1]}")
    summary = report.summary()
    logger.info(
        f"Evaluated {len(report.steps)} steps with {classifier}: "
        + ', '.join(f"{m}={summary[m]['mean']:.4f}±{summary[m]['std']:.4f}" for m in METRICS))
    return report

"""Composite feature-label graph: kernel adjacencies, MI coupling and transition matrices."""
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.metrics import mutual_info_score

from config import logger
from dataset import write_matrix_csv


@dataclass(frozen=True, eq=False)
class RelevanceGraph:
    """Composite graph over d feature nodes and c label nodes.

    A_features and A_labels are Gaussian-kernel adjacencies with zeroed
    diagonals, MI is the min-max normalized feature-label mutual information,
    and the four P_* matrices are their row-stochastic normalizations.
    """
    A_features: np.ndarray
    A_labels: np.ndarray
    MI: np.ndarray
    P_features: np.ndarray
    P_labels: np.ndarray
    P_fl: np.ndarray
    P_lf: np.ndarray
    sigma_f: float
    sigma_l: float

    @property
    def n_features(self):
        return self.A_features.shape[0]

    @property
    def n_labels(self):
        return self.A_labels.shape[0]

    @cached_property
    def transition_cdfs(self):
        """Row-wise cumulative distributions used for inverse-CDF sampling.

        Each row is rescaled so its last entry is exactly 1.0; a zero-probability
        column can therefore never be selected by a uniform draw in [0, 1).
        """
        cdfs = {}
        for name in ('P_features', 'P_labels', 'P_fl', 'P_lf'):
            cdf = np.cumsum(getattr(self, name), axis=1)
            cdf /= cdf[:, -1:]
            cdf[:, -1] = 1.0
            cdfs[name] = cdf
        return cdfs

    def dump(self, directory):
        """Write every graph matrix as CSV into `directory`."""
        os.makedirs(directory, exist_ok=True)
        header = [f"sigma_f={self.sigma_f!r}", f"sigma_l={self.sigma_l!r}"]
        for name in ('A_features', 'A_labels', 'MI', 'P_features', 'P_labels', 'P_fl', 'P_lf'):
            write_matrix_csv(os.path.join(directory, f"{name}.csv"), getattr(self, name), header)
        logger.info(f"Wrote graph matrices to {directory}")


def median_sigma(columns):
    """Median of the nonzero pairwise Euclidean distances between columns.

    Falls back to 1.0 when every pair of columns coincides.
    """
    distances = pdist(np.asarray(columns, dtype=np.float64).T, metric='euclidean')
    distances = distances[distances > 0]
    if distances.size == 0:
        logger.warning("All columns coincide; using sigma=1.0 for the Gaussian kernel")
        return 1.0
    return float(np.median(distances))


def gaussian_adjacency(columns, sigma):
    """Gaussian-kernel adjacency between the columns of an n×m matrix.

    Args:
        columns (ndarray): n×m matrix; each of the m columns is one node.
        sigma (float): Kernel scale, strictly positive.

    Returns:
        ndarray: Symmetric m×m matrix with entries exp(-||v_i - v_j||² / (2σ²))
        and a zero diagonal.
    """
    if sigma is None or not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2 or columns.shape[1] < 2:
        raise ValueError("gaussian_adjacency needs at least two columns")
    sq_dist = squareform(pdist(columns.T, metric='sqeuclidean'))
    A = np.exp(-sq_dist / (2.0 * sigma ** 2))
    np.fill_diagonal(A, 0.0)
    return A


def discretize_equal_frequency(values, bins):
    """Assign each value to one of `bins` equal-frequency bins.

    Bin edges are the empirical quantiles; repeated edges collapse, so heavily
    tied columns end up with fewer occupied bins.
    """
    edges = np.quantile(values, np.linspace(0.0, 1.0, bins + 1))
    interior = np.unique(edges[1:-1])
    return np.searchsorted(interior, values, side='right')


def mutual_information_matrix(X, Y, bins=5):
    """Raw feature-label mutual information in nats (no normalization)."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    n, d = X.shape
    if n < 2:
        raise ValueError(f"Mutual information needs at least 2 samples, got {n}")
    if bins < 2:
        raise ValueError(f"bins must be at least 2, got {bins}")
    if Y.shape[0] != n:
        raise ValueError("X and Y must have the same number of rows")

    c = Y.shape[1]
    MI = np.zeros((d, c))
    codes = [discretize_equal_frequency(X[:, i], bins) for i in range(d)]
    for j in range(c):
        label = Y[:, j].astype(int)
        if np.all(label == label[0]):
            logger.warning(f"Label column {j} is constant; its MI column is zero")
            continue
        for i in range(d):
            MI[i, j] = mutual_info_score(codes[i], label)
    return MI


def min_max_normalize(M):
    """Scale a matrix globally into [0, 1]; a constant matrix maps to zeros."""
    M = np.asarray(M, dtype=np.float64)
    low, high = M.min(), M.max()
    if high == low:
        return np.zeros_like(M)
    return (M - low) / (high - low)


def estimate_mi(X, Y, bins=5, normalize=True):
    """Feature-label mutual information matrix, min-max normalized by default."""
    MI = mutual_information_matrix(X, Y, bins)
    if not normalize:
        return MI
    if not MI.any():
        logger.warning("Mutual information is zero everywhere")
    return min_max_normalize(MI)


def row_normalize(M):
    """Divide each row by its sum; zero rows become uniform.

    Raises:
        ValueError: If any entry is negative.
    """
    M = np.asarray(M, dtype=np.float64)
    if (M < 0).any():
        raise ValueError("row_normalize requires non-negative entries")
    sums = M.sum(axis=1, keepdims=True)
    P = np.divide(M, sums, out=np.empty_like(M), where=sums > 0)
    P[sums[:, 0] == 0] = 1.0 / M.shape[1]
    return P


def _resolve_sigma(policy, columns):
    if policy == 'median':
        return median_sigma(columns)
    return float(policy)


def _node_adjacency(columns, policy):
    """Kernel adjacency over the columns and the σ it used."""
    # a single node has no neighbors; row_normalize turns this into a self-loop
    if columns.shape[1] == 1:
        return np.zeros((1, 1)), (1.0 if policy == 'median' else float(policy))
    sigma = _resolve_sigma(policy, columns)
    return gaussian_adjacency(columns, sigma), sigma


def build_graph(X, Y, bins=5, sigma_policy='median'):
    """Build the composite relevance graph from features X and labels Y.

    Args:
        X (ndarray): n×d feature matrix.
        Y (ndarray): n×c binary label matrix.
        bins (int): Equal-frequency bins for the MI estimate.
        sigma_policy: 'median' for the median heuristic per graph, or a positive
            number used as a fixed σ for both kernels.

    Returns:
        RelevanceGraph
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    A_features, sigma_f = _node_adjacency(X, sigma_policy)
    A_labels, sigma_l = _node_adjacency(Y, sigma_policy)
    MI = estimate_mi(X, Y, bins)

    graph = RelevanceGraph(
        A_features=A_features,
        A_labels=A_labels,
        MI=MI,
        P_features=row_normalize(A_features),
        P_labels=row_normalize(A_labels),
        P_fl=row_normalize(MI),
        P_lf=row_normalize(MI.T),
        sigma_f=sigma_f,
        sigma_l=sigma_l,
    )
    logger.info(
        f"Built relevance graph: {graph.n_features} feature nodes, {graph.n_labels} label nodes, "
        f"sigma_f={sigma_f:.4g}, sigma_l={sigma_l:.4g}")
    return graph

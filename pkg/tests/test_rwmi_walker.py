import numpy as np
import pytest

from relevance_graph import RelevanceGraph, build_graph, row_normalize
from rwmi_walker import (WALK_CHUNK_SIZE, NodeKind, WalkConfig, WalkNode, WalkSequence, _accumulate_batch,
                         accumulate_pairs, chunk_rng, run_rwmi, sample_walk, step, step_batch)


def make_graph(MI, A_features=None, A_labels=None):
    MI = np.asarray(MI, dtype=np.float64)
    d, c = MI.shape
    A_features = np.ones((d, d)) - np.eye(d) if A_features is None else A_features
    A_labels = np.ones((c, c)) - np.eye(c) if A_labels is None else A_labels
    return RelevanceGraph(
        A_features=A_features, A_labels=A_labels, MI=MI,
        P_features=row_normalize(A_features), P_labels=row_normalize(A_labels),
        P_fl=row_normalize(MI), P_lf=row_normalize(MI.T),
        sigma_f=1.0, sigma_l=1.0)


@pytest.fixture
def five_by_three():
    MI = np.array([
        [0.9, 0.1, 0.0],
        [0.2, 0.5, 0.3],
        [0.0, 0.0, 1.0],
        [0.4, 0.4, 0.2],
        [0.1, 0.6, 0.7],
    ])
    return make_graph(MI)


@pytest.fixture
def data_graph():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 6))
    Y = (rng.random((30, 3)) < 0.5).astype(float)
    Y[:, 0] = (X[:, 0] > 0).astype(float)
    return build_graph(X, Y)


def test_one_hot_row_always_jumps_to_its_label():
    MI = np.array([[0.0, 0.0, 0.7], [0.3, 0.3, 0.3]])
    graph = make_graph(MI)
    rng = chunk_rng(0, 0)
    for _ in range(200):
        assert step(WalkNode(NodeKind.FEATURE, 0), graph, 0.999999, rng) == WalkNode(NodeKind.LABEL, 2)


def test_jump_frequency(five_by_three):
    n = 100_000
    is_label, index = step_batch(np.zeros(n, dtype=bool), np.arange(n) % 5, five_by_three, 0.3, chunk_rng(1, 0))
    assert abs(is_label.mean() - 0.3) < 0.01
    # feature walkers that stayed on the feature side moved to another feature
    assert np.all(index[~is_label] < 5)
    assert np.all(index[is_label] < 3)


def test_label_walkers_use_label_side_tables(five_by_three):
    n = 20_000
    is_label, index = step_batch(np.ones(n, dtype=bool), np.full(n, 2), five_by_three, 0.5, chunk_rng(2, 0))
    # label 2 -> P_lf row 2 has no mass on feature 0 (MI is zero there)
    assert not (index[~is_label] == 0).any()
    # label-label moves never stay on label 2 (zero diagonal)
    assert not (index[is_label] == 2).any()


def test_seeded_walks_repeat(five_by_three):
    first = sample_walk(1, five_by_three, 0.5, 15, chunk_rng(7, 0))
    second = sample_walk(1, five_by_three, 0.5, 15, chunk_rng(7, 0))
    assert first.nodes == second.nodes
    assert len(first) == 16
    assert first.nodes[0] == WalkNode(NodeKind.FEATURE, 1)


def test_accumulate_single_step_pair():
    MI = np.zeros((1, 2))
    MI[0, 1] = 0.8
    walk = WalkSequence((WalkNode(NodeKind.FEATURE, 0), WalkNode(NodeKind.LABEL, 1)))
    accumulator = accumulate_pairs(walk, MI, 0.5, np.zeros((1, 2)))
    assert accumulator[0, 1] == pytest.approx(0.4)
    assert accumulator[0, 0] == 0.0


def test_accumulate_feature_only_walk_is_noop():
    walk = WalkSequence((WalkNode(NodeKind.FEATURE, 0), WalkNode(NodeKind.FEATURE, 2), WalkNode(NodeKind.FEATURE, 1)))
    accumulator = np.full((3, 2), 0.3)
    accumulate_pairs(walk, np.ones((3, 2)), 0.5, accumulator)
    np.testing.assert_array_equal(accumulator, 0.3)


def test_accumulate_counts_distant_pairs():
    walk = WalkSequence((WalkNode(NodeKind.FEATURE, 0), WalkNode(NodeKind.FEATURE, 2), WalkNode(NodeKind.LABEL, 1)))
    accumulator = accumulate_pairs(walk, np.ones((3, 2)), 0.5, np.zeros((3, 2)))
    assert accumulator[0, 1] == pytest.approx(0.25)
    assert accumulator[2, 1] == pytest.approx(0.5)
    assert accumulator.sum() == pytest.approx(0.75)


def test_batch_accumulation_matches_per_walk_loop():
    rng = np.random.default_rng(4)
    d, c, walks, length = 4, 3, 25, 7
    MI = rng.random((d, c))
    is_label = rng.random((walks, length + 1)) < 0.4
    index = np.where(is_label, rng.integers(0, c, (walks, length + 1)), rng.integers(0, d, (walks, length + 1)))

    expected = np.zeros((d, c))
    for w in range(walks):
        nodes = tuple(WalkNode(NodeKind.LABEL if is_label[w, t] else NodeKind.FEATURE, int(index[w, t]))
                      for t in range(length + 1))
        accumulate_pairs(WalkSequence(nodes), MI, 0.6, expected)

    np.testing.assert_allclose(_accumulate_batch(is_label, index, MI, 0.6), expected, rtol=1e-12, atol=1e-12)


def test_one_step_expectation(five_by_three):
    """walk_length=1: raw(f, l) ≈ starts(f) · jump_prob · P_fl(f, l) · decay · MI(f, l)."""
    n_walks, jump_prob, decay = 100_000, 0.999, 0.5
    result = run_rwmi(five_by_three, WalkConfig(n_walks=n_walks, walk_length=1, jump_prob=jump_prob,
                                                decay_factor=decay, seed=3))
    starts = n_walks // 5
    q = jump_prob * five_by_three.P_fl
    expected = starts * q * decay * five_by_three.MI
    standard_error = decay * five_by_three.MI * np.sqrt(starts * q * (1 - q))
    assert np.all(np.abs(result.raw - expected) <= 3 * standard_error + 1e-9)


def test_run_rwmi_is_bit_identical(data_graph):
    config = WalkConfig(n_walks=2 * 6, walk_length=10, seed=11)
    np.testing.assert_array_equal(run_rwmi(data_graph, config).values, run_rwmi(data_graph, config).values)


def test_thread_count_does_not_change_result(data_graph):
    config = WalkConfig(n_walks=2 * WALK_CHUNK_SIZE + 100, walk_length=8, seed=5)
    serial = run_rwmi(data_graph, config, n_jobs=1)
    threaded = run_rwmi(data_graph, config, n_jobs=3)
    np.testing.assert_array_equal(serial.raw, threaded.raw)


def test_different_seeds_differ(data_graph):
    a = run_rwmi(data_graph, WalkConfig(n_walks=200, seed=1))
    b = run_rwmi(data_graph, WalkConfig(n_walks=200, seed=2))
    assert not np.array_equal(a.raw, b.raw)


def test_rwmi_values_are_min_max_normalized(data_graph):
    result = run_rwmi(data_graph, WalkConfig(n_walks=300, walk_length=10))
    assert result.values.min() == 0.0
    assert result.values.max() == 1.0


def test_raw_respects_scaling_bound(data_graph):
    config = WalkConfig(n_walks=100, walk_length=6, decay_factor=0.7)
    raw = run_rwmi(data_graph, config).raw
    assert raw.max() <= config.n_walks * config.walk_length ** 2 * config.decay_factor * data_graph.MI.max()


def test_zero_mi_gives_zero_accumulator():
    graph = make_graph(np.zeros((3, 2)))
    result = run_rwmi(graph, WalkConfig(n_walks=50, walk_length=5))
    np.testing.assert_array_equal(result.raw, 0.0)
    np.testing.assert_array_equal(result.values, 0.0)


def test_run_rwmi_needs_feature_nodes():
    graph = RelevanceGraph(
        A_features=np.zeros((0, 0)), A_labels=np.zeros((2, 2)), MI=np.zeros((0, 2)),
        P_features=np.zeros((0, 0)), P_labels=np.zeros((2, 2)), P_fl=np.zeros((0, 2)), P_lf=np.zeros((2, 0)),
        sigma_f=1.0, sigma_l=1.0)
    with pytest.raises(ValueError):
        run_rwmi(graph, WalkConfig())


@pytest.mark.parametrize('changes', [
    {'n_walks': 0},
    {'walk_length': 0},
    {'jump_prob': 0.0},
    {'jump_prob': 1.0},
    {'decay_factor': 0.0},
    {'decay_factor': 1.5},
])
def test_walk_config_validation(changes):
    with pytest.raises(ValueError):
        WalkConfig(**changes)

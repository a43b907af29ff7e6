import numpy as np
import pytest

from dataset import (DatasetParseError, FeatureRanking, LabelValidationError, MultiLabelDataset,
                     column_standardize, load_dataset, rank_features, read_manifest, read_matrix_csv,
                     write_matrix_csv)


def write_lines(path, lines):
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return str(path)


@pytest.fixture
def csv_pair(tmp_path):
    """Train/test pair with two features and two labels."""
    train = write_lines(tmp_path / 'toy-train.csv', [
        '0.5,1.2,1,0',
        '1.5,0.2,0,1',
        '2.5,3.2,1,1',
    ])
    test = write_lines(tmp_path / 'toy-test.csv', [
        '0.1,0.4,0,1',
        '2.0,2.2,1,0',
    ])
    return train, test


def test_load_dataset_splits_trailing_labels(csv_pair):
    """The last label_count columns become the label matrix."""
    dataset = load_dataset(*csv_pair, label_count=2, scaling='none')
    assert dataset.n_features == 2
    assert dataset.n_labels == 2
    assert dataset.n_train == 3
    assert dataset.n_test == 2
    assert dataset.name == 'toy-train'
    np.testing.assert_array_equal(dataset.X_train[0], [0.5, 1.2])
    np.testing.assert_array_equal(dataset.Y_train[:, 0], [1, 0, 1])


def test_single_row_column_split(tmp_path):
    train = write_lines(tmp_path / 'a.csv', ['0.5,1.2,1,0'])
    test = write_lines(tmp_path / 'b.csv', ['0.5,1.2,1,0'])
    dataset = load_dataset(train, test, label_count=2, scaling='none')
    assert dataset.X_train.shape == (1, 2)
    assert dataset.Y_train.shape == (1, 2)


def test_load_dataset_standardizes_with_training_statistics(csv_pair):
    dataset = load_dataset(*csv_pair, label_count=2)
    np.testing.assert_allclose(dataset.X_train.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(dataset.X_train.std(axis=0), 1.0)
    # test rows use the training mean (1.5) and std for feature 0
    expected = (0.1 - 1.5) / np.std([0.5, 1.5, 2.5])
    assert dataset.X_test[0, 0] == pytest.approx(expected)


def test_load_dataset_reads_tsv_with_header_and_comments(tmp_path):
    train = write_lines(tmp_path / 'a.tsv', ['# exported', 'f1\tf2\tl1\tl2', '1\t2\t0\t1', '3\t4\t1\t0'])
    test = write_lines(tmp_path / 'b.tsv', ['5\t6\t1\t1'])
    dataset = load_dataset(train, test, label_count=2, scaling='none')
    assert dataset.n_train == 2
    np.testing.assert_array_equal(dataset.X_test, [[5, 6]])


def test_ragged_row_reports_line_number(tmp_path):
    train = write_lines(tmp_path / 'a.csv', ['1,2,0,1', '3,4,1', '5,6,1,0'])
    test = write_lines(tmp_path / 'b.csv', ['1,2,0,1'])
    with pytest.raises(DatasetParseError) as exc_info:
        load_dataset(train, test, label_count=2)
    assert exc_info.value.line_number == 2
    assert ':2:' in str(exc_info.value)


def test_non_numeric_cell_is_parse_error(tmp_path):
    train = write_lines(tmp_path / 'a.csv', ['1,2,0,1', '3,x,1,0'])
    test = write_lines(tmp_path / 'b.csv', ['1,2,0,1'])
    with pytest.raises(DatasetParseError) as exc_info:
        load_dataset(train, test, label_count=2)
    assert exc_info.value.line_number == 2


def test_non_binary_label_is_validation_error(tmp_path):
    train = write_lines(tmp_path / 'a.csv', ['1,2,0,1', '3,4,2,0'])
    test = write_lines(tmp_path / 'b.csv', ['1,2,0,1'])
    with pytest.raises(LabelValidationError):
        load_dataset(train, test, label_count=2)


def test_label_count_must_leave_features(csv_pair):
    with pytest.raises(ValueError) as exc_info:
        load_dataset(*csv_pair, label_count=4)
    assert 'label_count' in str(exc_info.value)


def test_missing_file(tmp_path, csv_pair):
    with pytest.raises(FileNotFoundError):
        load_dataset(str(tmp_path / 'missing.csv'), csv_pair[1], label_count=2)


def test_single_label_dataset_rejected():
    with pytest.raises(ValueError):
        MultiLabelDataset('x', np.ones((2, 2)), np.ones((2, 1)), np.ones((1, 2)), np.ones((1, 1)))


def test_dataset_matrices_are_read_only(csv_pair):
    dataset = load_dataset(*csv_pair, label_count=2)
    with pytest.raises(ValueError):
        dataset.X_train[0, 0] = 99.0


def test_read_manifest(tmp_path):
    manifest = tmp_path / 'emotions.manifest'
    manifest.write_text('label_count=6\n')
    assert read_manifest(str(manifest)) == 6


def test_read_manifest_without_entry(tmp_path):
    manifest = tmp_path / 'broken.manifest'
    manifest.write_text('labels=6\n')
    with pytest.raises(DatasetParseError):
        read_manifest(str(manifest))


def test_column_standardize_constant_column():
    result = column_standardize(np.array([[1.0], [1.0], [1.0]]))
    np.testing.assert_array_equal(result[:, 0], [0.0, 0.0, 0.0])


def test_column_standardize_two_values():
    result = column_standardize(np.array([[0.0], [2.0]]))
    np.testing.assert_allclose(result[:, 0], [-1.0, 1.0])


def test_column_standardize_means_and_idempotence():
    X = np.random.default_rng(3).random((3, 2))
    once = column_standardize(X)
    assert np.all(np.abs(once.mean(axis=0)) < 1e-12)
    np.testing.assert_allclose(column_standardize(once), once, atol=1e-10)


def test_column_standardize_rejects_empty():
    with pytest.raises(ValueError):
        column_standardize(np.empty((0, 2)))


def test_rank_features_descending():
    ranking = rank_features([0.1, 0.9, 0.5])
    np.testing.assert_array_equal(ranking.order, [1, 2, 0])


def test_rank_features_tie_break_by_index():
    np.testing.assert_array_equal(rank_features([0.5, 0.5]).order, [0, 1])


def test_rank_features_matches_naive_sort():
    scores = np.round(np.random.default_rng(11).random(40), 2)  # rounding creates ties
    naive = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranking = rank_features(scores)
    np.testing.assert_array_equal(ranking.order, naive)
    assert sorted(ranking.order) == list(range(len(scores)))
    assert all(scores[a] >= scores[b] for a, b in zip(ranking.order, ranking.order[1:]))


def test_rank_features_rejects_nan():
    with pytest.raises(ValueError):
        rank_features([0.1, np.nan])


def test_feature_ranking_requires_permutation():
    with pytest.raises(ValueError):
        FeatureRanking(order=np.array([0, 0]), scores=np.array([1.0, 2.0]))


def test_matrix_csv_round_trip(tmp_path):
    M = np.random.default_rng(5).normal(size=(4, 3)) * 1e3
    path = str(tmp_path / 'm.csv')
    write_matrix_csv(path, M, ['seed=5', 'note=round trip'])
    np.testing.assert_array_equal(read_matrix_csv(path), M)

from unittest.mock import patch

import pytest

from main import EXIT_OK, EXIT_STAGE_FAILURE, EXIT_USAGE, RUN_KEYS, build_parser, main
from pipeline import CONVERTERS, StageError, UsageError


def test_run_keys_cover_every_config_key():
    assert set(RUN_KEYS) == set(CONVERTERS)


def test_unset_flags_are_none():
    """Flags not given stay None so lower config layers survive."""
    args = build_parser().parse_args(['select'])
    assert all(getattr(args, key) is None for key in RUN_KEYS)


def test_flag_spellings():
    args = build_parser().parse_args(
        ['select', '--decay', '0.3', '--disable_rw', '--jump-prob', '0.2', '--max-iter', '5', '--n-jobs', '2'])
    assert args.decay_factor == 0.3
    assert args.disable_rw is True
    assert args.disable_fla is None
    assert args.jump_prob == 0.2
    assert args.max_iter == 5
    assert args.n_jobs == 2


def test_eval_requires_ranking():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['eval'])


def test_grid_mode_choices():
    args = build_parser().parse_args(['grid', '--grid', 'grid.env', '--mode', 'one_at_a_time'])
    assert args.mode == 'one_at_a_time'
    with pytest.raises(SystemExit):
        build_parser().parse_args(['grid', '--grid', 'grid.env', '--mode', 'random'])


def test_main_dispatches_select():
    with patch('main.cmd_select') as mock_select:
        assert main(['select', '--alpha', '0.1']) == EXIT_OK
    resolved = mock_select.call_args[0][0]
    assert resolved.alpha == 0.1


def test_main_dispatches_grid_with_mode():
    with patch('main.cmd_grid') as mock_grid:
        assert main(['grid', '--grid', 'grid.env', '--mode', 'one_at_a_time']) == EXIT_OK
    assert mock_grid.call_args[0][1:] == ('grid.env', 'one_at_a_time')


def test_main_maps_usage_errors():
    with patch('main.cmd_ablate', side_effect=UsageError("bad request")):
        assert main(['ablate']) == EXIT_USAGE


def test_main_maps_stage_failures():
    cause = ValueError("boom")
    error = StageError('fit', cause)
    error.__cause__ = cause
    with patch('main.cmd_select', side_effect=error):
        assert main(['select']) == EXIT_STAGE_FAILURE

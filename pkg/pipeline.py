"""Stage orchestration: load → graph → walk → fit → rank → eval, plus grid search and ablations."""
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace

import numpy as np
from dotenv import dotenv_values
from sklearn.model_selection import train_test_split

import artifacts
from config import DEFAULTS, PUBLISHED_GRID, env_overrides, logger
from dataset import SCALINGS, MultiLabelDataset, load_dataset, rank_features, read_manifest
from ml_eval import CLASSIFIERS, METRICS, protocol_eval
from relevance_graph import build_graph
from rwmi_walker import WalkConfig, run_rwmi
from scmf_optimizer import Hyperparams, ablation_variant, feature_scores, fit

WEIGHT_KEYS = ('alpha', 'beta', 'gamma', 'delta', 'epsilon')
GRID_KEYS = WEIGHT_KEYS + ('k', 'n_walks', 'walk_length', 'jump_prob', 'decay_factor')
GRID_MODES = ('product', 'one_at_a_time')
VALIDATION_FRACTION = 0.2


class StageError(RuntimeError):
    """A pipeline stage failed; `stage` names it and the cause is chained."""

    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {cause}")


class UsageError(ValueError):
    """The request is malformed or asks for a degenerate model."""


@contextmanager
def stage(name):
    """Log a pipeline stage and convert its failures into StageError."""
    logger.info(f"Stage '{name}' started")
    try:
        yield
    except (StageError, UsageError):
        raise
    except Exception as e:
        logger.error(f"Stage '{name}' failed: {str(e)}")
        raise StageError(name, e) from e
    logger.info(f"Stage '{name}' finished")


def _bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off', ''):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _optional(convert):
    def parse(value):
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
        return convert(value)
    return parse


def _sigma(value):
    if str(value).strip().lower() == 'median':
        return 'median'
    sigma = float(value)
    if not sigma > 0:
        raise ValueError(f"sigma must be 'median' or positive, got {value!r}")
    return sigma


def _labels(value):
    if value is None or isinstance(value, int):
        return value
    text = str(value).strip()
    if text.lstrip('-').isdigit():
        return int(text)
    return read_manifest(text)


def _choice(options):
    def parse(value):
        if value not in options:
            raise ValueError(f"expected one of {options}, got {value!r}")
        return value
    return parse


CONVERTERS = {
    'train': _optional(str),
    'test': _optional(str),
    'labels': _labels,
    'scaling': _choice(SCALINGS),
    'bins': int,
    'sigma': _sigma,
    'alpha': float,
    'beta': float,
    'gamma': float,
    'delta': float,
    'epsilon': float,
    'k': _optional(int),
    'max_iter': int,
    'tol': float,
    'abs_tol': _optional(float),
    'd_smoothing': float,
    'n_walks': int,
    'walk_length': int,
    'jump_prob': float,
    'decay_factor': float,
    'seed': int,
    'classifier': _choice(CLASSIFIERS),
    'disable_rw': _bool,
    'disable_fla': _bool,
    'all_steps_below': int,
    'out': str,
    'dump_graph': _bool,
    'n_jobs': int,
}


@dataclass(frozen=True)
class RunConfig:
    train: str
    test: str
    labels: int
    scaling: str
    bins: int
    sigma: object
    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float
    k: int
    max_iter: int
    tol: float
    abs_tol: float
    d_smoothing: float
    n_walks: int
    walk_length: int
    jump_prob: float
    decay_factor: float
    seed: int
    classifier: str
    disable_rw: bool
    disable_fla: bool
    all_steps_below: int
    out: str
    dump_graph: bool
    n_jobs: int

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"bins must be at least 2, got {self.bins}")
        # nested configs validate themselves
        self.hyperparams
        self.walk_config

    @classmethod
    def from_values(cls, values):
        """Build a RunConfig from raw (string or typed) values keyed by config name."""
        unknown = set(values) - set(CONVERTERS)
        if unknown:
            raise UsageError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        typed = {}
        for key, convert in CONVERTERS.items():
            try:
                typed[key] = convert(values.get(key, DEFAULTS[key]))
            except (TypeError, ValueError) as e:
                raise UsageError(f"Invalid value for '{key}': {e}") from e
        try:
            return cls(**typed)
        except ValueError as e:
            raise UsageError(str(e)) from e

    @property
    def hyperparams(self):
        return Hyperparams(
            alpha=self.alpha, beta=self.beta, gamma=self.gamma, delta=self.delta, epsilon=self.epsilon,
            k=self.k, max_iter=self.max_iter, tol=self.tol, d_smoothing=self.d_smoothing,
            abs_tol=self.abs_tol)

    @property
    def walk_config(self):
        return WalkConfig(
            n_walks=self.n_walks, walk_length=self.walk_length, jump_prob=self.jump_prob,
            decay_factor=self.decay_factor, seed=self.seed)

    def items(self):
        return list(asdict(self).items())

    def header(self):
        return artifacts.config_header(self.items())

    def with_values(self, **changes):
        try:
            return replace(self, **{key: CONVERTERS[key](value) for key, value in changes.items()})
        except ValueError as e:
            raise UsageError(str(e)) from e


def read_config_file(path):
    """Parse a flat key=value config file."""
    if not os.path.exists(path):
        raise UsageError(f"Config file not found: {path}")
    return dict(dotenv_values(path))


def resolve_config(config_path=None, overrides=None):
    """Layer defaults, GRW_* environment values, a config file and explicit overrides.

    Args:
        config_path (str, optional): key=value config file.
        overrides (dict, optional): Highest-precedence values (CLI flags); None values are ignored.

    Returns:
        RunConfig
    """
    values = dict(DEFAULTS)
    values.update(env_overrides())
    if config_path:
        values.update(read_config_file(config_path))
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.from_values(values)


@dataclass(eq=False)
class SelectionResult:
    ranking: object
    rwmi: object
    R_w: np.ndarray
    state: object
    graph: object


def _require_data(config):
    missing = [key for key in ('train', 'test', 'labels') if getattr(config, key) is None]
    if missing:
        raise UsageError(f"Missing required settings: {', '.join(missing)}")


def _check_ablation(config):
    if config.disable_rw and config.disable_fla:
        raise UsageError("Disabling both the random-walk and the alignment component leaves a degenerate model")


def load(config):
    _require_data(config)
    with stage('load'):
        return load_dataset(config.train, config.test, config.labels, scaling=config.scaling)


def run_selection(X, Y, config, n_jobs=None):
    """Graph → walk → fit → rank on one feature/label matrix pair."""
    _check_ablation(config)
    hp = config.hyperparams
    n_jobs = config.n_jobs if n_jobs is None else n_jobs

    with stage('graph'):
        graph = build_graph(X, Y, bins=config.bins, sigma_policy=config.sigma)

    rwmi = None
    if config.disable_rw:
        logger.info("Random-walk component disabled; using the normalized MI matrix as R_w")
        hp = ablation_variant(hp, 'RW')
        R_w = graph.MI
    else:
        with stage('walk'):
            rwmi = run_rwmi(graph, config.walk_config, n_jobs=n_jobs)
        R_w = rwmi.values
    if config.disable_fla:
        logger.info("Feature-label alignment component disabled")
        hp = ablation_variant(hp, 'FLA')

    with stage('fit'):
        state = fit(X, Y, R_w, hp, seed=config.seed)
    with stage('rank'):
        ranking = rank_features(feature_scores(state))
    return SelectionResult(ranking=ranking, rwmi=rwmi, R_w=R_w, state=state, graph=graph)


def _ensure_out(config):
    artifacts.ensure_dir(config.out)
    if not os.access(config.out, os.W_OK):
        raise UsageError(f"Output directory is not writable: {config.out}")
    return config.out


def cmd_select(config):
    """Run the full selection pipeline on the training half and write its artifacts.

    Writes ranking.csv, rwmi.csv (the R_w actually used) and trace.csv into the
    output directory, plus graph/ when dump_graph is set.

    Returns:
        FeatureRanking
    """
    _check_ablation(config)
    out = _ensure_out(config)
    dataset = load(config)
    result = run_selection(dataset.X_train, dataset.Y_train, config)

    header = config.header()
    with stage('write'):
        artifacts.write_ranking_csv(os.path.join(out, 'ranking.csv'), result.ranking, header)
        artifacts.write_rwmi_csv(os.path.join(out, 'rwmi.csv'), result.R_w, header)
        artifacts.write_trace_csv(os.path.join(out, 'trace.csv'), result.state, header)
        if config.dump_graph:
            result.graph.dump(os.path.join(out, 'graph'))
    top = ', '.join(str(i) for i in result.ranking.top(min(10, len(result.ranking))))
    logger.info(f"Selection finished for {dataset.name}; top features: {top}")
    return result.ranking


def cmd_eval(config, ranking_path):
    """Evaluate a saved ranking on the test half with the configured classifier.

    Writes eval_<classifier>.csv (one row per step) and eval_<classifier>.json.
    """
    out = _ensure_out(config)
    dataset = load(config)
    with stage('eval'):
        ranking = artifacts.read_ranking_csv(ranking_path)
        if len(ranking) != dataset.n_features:
            raise ValueError(
                f"Ranking covers {len(ranking)} features but {dataset.name} has {dataset.n_features}")
        report = protocol_eval(dataset, ranking, config.classifier, config.all_steps_below)
    with stage('write'):
        stem = os.path.join(out, f"eval_{config.classifier}")
        artifacts.write_report_csv(f"{stem}.csv", report, config.header())
        artifacts.write_report_json(
            f"{stem}.json", report, dict(config.items(), ranking=os.path.abspath(ranking_path)))
    return report


def validation_split(dataset, seed):
    """Carve an 80/20 train/validation split out of the training half."""
    indices = np.arange(dataset.n_train)
    fit_idx, val_idx = train_test_split(indices, test_size=VALIDATION_FRACTION, random_state=seed)
    fit_idx, val_idx = np.sort(fit_idx), np.sort(val_idx)
    return MultiLabelDataset(
        f"{dataset.name}-validation",
        dataset.X_train[fit_idx], dataset.Y_train[fit_idx],
        dataset.X_train[val_idx], dataset.Y_train[val_idx])


def parse_grid(grid_source):
    """Normalize a grid source into {key: [values]}.

    `grid_source` is a dict of key → iterable, or a path to a key=value file whose
    values are comma-separated lists. The value 'published' expands to the key's
    published search range.
    """
    if isinstance(grid_source, str):
        if not os.path.exists(grid_source):
            raise UsageError(f"Grid file not found: {grid_source}")
        raw = {key: value for key, value in dotenv_values(grid_source).items()}
        grid_source = {}
        for key, value in raw.items():
            if value is None or not value.strip():
                raise UsageError(f"Grid key '{key}' has no values")
            if value.strip().lower() == 'published':
                if key not in PUBLISHED_GRID:
                    raise UsageError(f"No published range for grid key '{key}'")
                grid_source[key] = list(PUBLISHED_GRID[key])
            else:
                grid_source[key] = [item.strip() for item in value.split(',') if item.strip()]
    grid = {key: list(values) for key, values in (grid_source or {}).items()}
    if not grid or not all(grid.values()):
        raise UsageError("Grid must name at least one key with at least one value")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise UsageError(f"Unsupported grid keys: {', '.join(sorted(unknown))}")
    return grid


def grid_points(grid, mode='product'):
    """Expand a grid into a list of {key: value} points."""
    if mode == 'product':
        keys = list(grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[key] for key in keys))]
    if mode == 'one_at_a_time':
        # vary one key at a time with the other weights held at 0.5
        base = {key: 0.5 for key in WEIGHT_KEYS}
        points = []
        for key, values in grid.items():
            for value in values:
                point = dict(base)
                point[key] = value
                points.append(point)
        return points
    raise UsageError(f"Unknown grid mode '{mode}', expected one of {GRID_MODES}")


def _evaluate_point(args):
    validation, config = args
    result = run_selection(validation.X_train, validation.Y_train, config, n_jobs=1)
    report = protocol_eval(validation, result.ranking, config.classifier, config.all_steps_below)
    return report.summary()


def cmd_grid(config, grid_source, mode='product'):
    """Score grid points on a validation split of the training half.

    Returns:
        tuple: (best Hyperparams, leaderboard rows sorted by mean Micro-F1, best first)
    """
    _check_ablation(config)
    grid = parse_grid(grid_source)
    points = grid_points(grid, mode)
    out = _ensure_out(config)
    dataset = load(config)
    validation = validation_split(dataset, config.seed)
    configs = [config.with_values(**point) for point in points]
    logger.info(f"Grid search over {len(points)} points ({mode}) on {validation.n_train}/{validation.n_test} split")

    with stage('grid'):
        jobs = [(validation, point_config) for point_config in configs]
        if config.n_jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
                summaries = list(pool.map(_evaluate_point, jobs))
        else:
            summaries = [_evaluate_point(job) for job in jobs]

    keys = sorted({key for point in points for key in point}, key=GRID_KEYS.index)
    leaderboard = []
    for point_config, summary in zip(configs, summaries):
        row = {key: getattr(point_config, key) for key in keys}
        row.update({
            'mean_micro_f1': summary['micro_f1']['mean'],
            'std_micro_f1': summary['micro_f1']['std'],
            'mean_macro_f1': summary['macro_f1']['mean'],
            'mean_hamming_loss': summary['hamming_loss']['mean'],
            'mean_zero_one_loss': summary['zero_one_loss']['mean'],
        })
        leaderboard.append((point_config, row))
    leaderboard.sort(key=lambda entry: -entry[1]['mean_micro_f1'])

    with stage('write'):
        columns = tuple(leaderboard[0][1])
        rows = [tuple(row[column] for column in columns) for _, row in leaderboard]
        artifacts.write_table_csv(os.path.join(out, 'leaderboard.csv'), columns, rows, config.header())

    best_config, best_row = leaderboard[0]
    logger.info(f"Best grid point: {best_row}")
    return best_config.hyperparams, [row for _, row in leaderboard]


ABLATION_VARIANTS = (
    ('full', False, False),
    ('no_rw', True, False),
    ('no_fla', False, True),
)


def cmd_ablate(config):
    """Compare the full model against the RW-dropped and FLA-dropped variants on the test half."""
    out = _ensure_out(config)
    dataset = load(config)
    rows = []
    summaries = {}
    for name, disable_rw, disable_fla in ABLATION_VARIANTS:
        variant = replace(config, disable_rw=disable_rw, disable_fla=disable_fla)
        logger.info(f"Ablation variant '{name}'")
        result = run_selection(dataset.X_train, dataset.Y_train, variant)
        with stage('eval'):
            report = protocol_eval(dataset, result.ranking, config.classifier, config.all_steps_below)
        summary = report.summary()
        summaries[name] = summary
        hp = variant.hyperparams
        if disable_rw:
            hp = ablation_variant(hp, 'RW')
        if disable_fla:
            hp = ablation_variant(hp, 'FLA')
        rows.append((name, hp.gamma, hp.delta) + tuple(
            value for metric in METRICS for value in (summary[metric]['mean'], summary[metric]['std'])))

    columns = ('variant', 'gamma', 'delta') + tuple(
        f"{stat}_{metric}" for metric in METRICS for stat in ('mean', 'std'))
    with stage('write'):
        artifacts.write_table_csv(os.path.join(out, 'ablation.csv'), columns, rows, config.header())
    return summaries

"""Random Walk Mutual Information (RWMI) on the composite relevance graph."""
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from config import logger
from relevance_graph import min_max_normalize

# Walks are simulated in fixed blocks of consecutive walk indices; each block owns a
# random substream, so results do not depend on how many workers run the blocks.
WALK_CHUNK_SIZE = 512


class NodeKind(enum.Enum):
    FEATURE = 'feature'
    LABEL = 'label'


class WalkNode(NamedTuple):
    kind: NodeKind
    index: int


@dataclass(frozen=True)
class WalkConfig:
    n_walks: int = 1000
    walk_length: int = 20
    jump_prob: float = 0.5
    decay_factor: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_walks < 1:
            raise ValueError(f"n_walks must be at least 1, got {self.n_walks}")
        if self.walk_length < 1:
            raise ValueError(f"walk_length must be at least 1, got {self.walk_length}")
        if not 0 < self.jump_prob < 1:
            raise ValueError(f"jump_prob must lie in (0, 1), got {self.jump_prob}")
        if not 0 < self.decay_factor < 1:
            raise ValueError(f"decay_factor must lie in (0, 1), got {self.decay_factor}")


@dataclass(frozen=True, eq=False)
class WalkSequence:
    nodes: tuple

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class RwmiMatrix:
    """Normalized indirect-association matrix R_w plus the raw accumulator."""
    values: np.ndarray
    raw: np.ndarray


def chunk_rng(seed, chunk_index):
    """Independent PCG64 stream for one block of walks."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk_index,))))


def _sample_rows(cdf, rows, uniforms):
    # first column whose cumulative mass exceeds the draw
    return (cdf[rows] <= uniforms[:, None]).sum(axis=1)


def step_batch(is_label, index, graph, jump_prob, rng):
    """Advance a batch of walkers by one step.

    Args:
        is_label (ndarray): Boolean array, True where the walker sits on a label node.
        index (ndarray): Node index within its side of the graph.
        graph (RelevanceGraph): The composite graph.
        jump_prob (float): Probability of crossing to the other side.
        rng (numpy.random.Generator): Random stream; two uniforms are drawn per walker.

    Returns:
        tuple: (is_label, index) arrays after the step.
    """
    cdfs = graph.transition_cdfs
    u_jump = rng.random(len(index))
    u_pick = rng.random(len(index))
    jump = u_jump < jump_prob

    new_is_label = is_label ^ jump
    new_index = np.empty_like(index)
    for from_label, to_label, table in (
            (False, True, 'P_fl'),
            (False, False, 'P_features'),
            (True, False, 'P_lf'),
            (True, True, 'P_labels')):
        mask = (is_label == from_label) & (new_is_label == to_label)
        if mask.any():
            new_index[mask] = _sample_rows(cdfs[table], index[mask], u_pick[mask])
    return new_is_label, new_index


def step(current, graph, jump_prob, rng):
    """Take one random-walk step from `current` (a WalkNode)."""
    is_label = np.array([current.kind is NodeKind.LABEL])
    index = np.array([current.index])
    is_label, index = step_batch(is_label, index, graph, jump_prob, rng)
    return WalkNode(NodeKind.LABEL if is_label[0] else NodeKind.FEATURE, int(index[0]))


def sample_walk(start_feature, graph, jump_prob, walk_length, rng):
    """Sample one walk of `walk_length` steps starting at a feature node."""
    node = WalkNode(NodeKind.FEATURE, start_feature)
    nodes = [node]
    for _ in range(walk_length):
        node = step(node, graph, jump_prob, rng)
        nodes.append(node)
    return WalkSequence(tuple(nodes))


def accumulate_pairs(walk, MI, decay_factor, accumulator):
    """Add decay^distance · MI(f, l) for every feature-label pair in one walk.

    Every ordered position pair i < j with one feature and one label node
    contributes, so repeated co-occurrences count each time.
    """
    nodes = walk.nodes
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            a, b = nodes[i], nodes[j]
            if a.kind is b.kind:
                continue
            f, l = (a.index, b.index) if a.kind is NodeKind.FEATURE else (b.index, a.index)
            accumulator[f, l] += decay_factor ** (j - i) * MI[f, l]
    return accumulator


def _accumulate_batch(is_label, index, MI, decay_factor):
    """Vectorized accumulate_pairs over a batch of walks stored as (walks × positions) arrays."""
    d, c = MI.shape
    raw = np.zeros((d, c))
    positions = is_label.shape[1]
    for distance in range(1, positions):
        a_label, b_label = is_label[:, :-distance], is_label[:, distance:]
        a_index, b_index = index[:, :-distance], index[:, distance:]
        mixed = a_label != b_label
        if not mixed.any():
            continue
        f = np.where(a_label, b_index, a_index)[mixed]
        l = np.where(a_label, a_index, b_index)[mixed]
        counts = np.bincount(f * c + l, minlength=d * c).reshape(d, c)
        raw += decay_factor ** distance * counts * MI
    return raw


def _walk_chunk(chunk_index, graph, config):
    start = chunk_index * WALK_CHUNK_SIZE
    stop = min(start + WALK_CHUNK_SIZE, config.n_walks)
    rng = chunk_rng(config.seed, chunk_index)

    size = stop - start
    is_label = np.zeros((size, config.walk_length + 1), dtype=bool)
    index = np.zeros((size, config.walk_length + 1), dtype=np.int64)
    index[:, 0] = np.arange(start, stop) % graph.n_features
    for t in range(config.walk_length):
        is_label[:, t + 1], index[:, t + 1] = step_batch(
            is_label[:, t], index[:, t], graph, config.jump_prob, rng)

    logger.debug(f"Walk chunk {chunk_index}: walks {start}..{stop - 1}")
    return _accumulate_batch(is_label, index, graph.MI, config.decay_factor)


def run_rwmi(graph, config, n_jobs=1):
    """Run `config.n_walks` seeded walks and return the normalized RWMI matrix.

    Walk w starts at feature node w mod d. Per-chunk raw accumulators are summed
    in chunk order and min-max normalized once at the end.

    Args:
        graph (RelevanceGraph): Composite graph.
        config (WalkConfig): Walk parameters and seed.
        n_jobs (int): Worker threads for the chunks.

    Returns:
        RwmiMatrix
    """
    if graph.n_features == 0 or graph.n_labels == 0:
        raise ValueError("run_rwmi needs at least one feature node and one label node")

    n_chunks = -(-config.n_walks // WALK_CHUNK_SIZE)
    logger.info(
        f"Running {config.n_walks} walks of length {config.walk_length} "
        f"(jump_prob={config.jump_prob}, decay={config.decay_factor}, seed={config.seed}) "
        f"in {n_chunks} chunks")

    if n_jobs > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            partials = list(pool.map(lambda j: _walk_chunk(j, graph, config), range(n_chunks)))
    else:
        partials = [_walk_chunk(j, graph, config) for j in range(n_chunks)]

    raw = np.zeros_like(graph.MI)
    for partial in partials:
        raw += partial
    return RwmiMatrix(values=min_max_normalize(raw), raw=raw)

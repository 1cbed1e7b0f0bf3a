"""Distortion-minimising graph embeddings in products of stereographic factors.

The loss is the mean squared relative distortion

    D_avg = mean over pairs (i, j) of (d_graph(i, j) / d_M(v_i, v_j) - 1)^2

where ``d_M`` is the l2 product distance. Training samples unordered pairs
uniformly without replacement, differentiates the loss on a fresh tape and
hands the gradients to :class:`~kstereo.optim.RiemannianSGD`.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import autodiff as ad
from . import stereographic as st
from .graph import Graph, all_pairs_shortest_paths
from .optim import OptimConfig, RiemannianSGD, StepRejected, Strategy

log = logging.getLogger(__name__)

SIGMA_INIT = 1e-2
EPS_D = 1e-9
MAX_BATCH_PAIRS = 4096
MAX_CONSECUTIVE_REJECTS = 10


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 20000
    batch_pairs: Optional[int] = None
    optim: OptimConfig = field(default_factory=OptimConfig)
    eval_every: int = 500
    sigma_init: float = SIGMA_INIT

    def pairs_per_batch(self, node_count):
        total = node_count * (node_count - 1) // 2
        if self.batch_pairs is None:
            return min(MAX_BATCH_PAIRS, total)
        if not 1 <= self.batch_pairs <= total:
            raise ValueError(f"batch_pairs must lie in [1, {total}]")
        return self.batch_pairs


@dataclass
class EmbeddingState:
    """Per-factor point blocks of shape ``(node_count, factor.dim)``."""

    manifold: st.ProductManifold
    points: List[np.ndarray]
    seed: int = 0
    tangents: Optional[List[np.ndarray]] = None

    @property
    def node_count(self):
        return self.points[0].shape[0]

    def coordinates(self):
        """All coordinates with factors concatenated in order."""
        return np.concatenate(self.points, axis=1)


@dataclass
class TrainResult:
    state: EmbeddingState
    history: List[tuple]
    rejected_steps: int = 0

    @property
    def final_d_avg(self):
        return self.history[-1][1]


def init_embeddings(graph, manifold, seed, sigma=SIGMA_INIT):
    """Map small Gaussian tangent vectors at the origin onto every factor."""
    n = graph.node_count if isinstance(graph, Graph) else int(graph)
    rng = np.random.default_rng([seed, 0])
    tangents = [rng.normal(scale=sigma, size=(n, f.dim)) if sigma > 0 else np.zeros((n, f.dim))
                for f in manifold.factors]
    points = [np.asarray(st.exp_map_origin(t, f.kappa)) for t, f in zip(tangents, manifold.factors)]
    return EmbeddingState(manifold, points, seed, tangents)


def embedded_distances(points, kappas, i, j):
    """Product distances between rows ``i`` and ``j`` of every factor block."""
    return st.product_distance([ad.take(p, i) for p in points],
                               [ad.take(p, j) for p in points], kappas)


def d_avg_loss(points, kappas, distances, pairs, eps=EPS_D):
    """Mean squared relative distortion over ``pairs = (i, j)``.

    ``points``/``kappas`` may be tape variables, in which case the result is
    a scalar :class:`~kstereo.autodiff.Var`.
    """
    i, j = pairs
    target = np.asarray(distances)[i, j]
    ratio = target / (embedded_distances(points, kappas, i, j) + eps)
    err = ratio - 1.0
    return ad.mean(err * err)


def all_pairs(node_count):
    return np.triu_indices(node_count, 1)


def evaluate(state, distances, chunk=1 << 20):
    """Full-batch ``D_avg`` over all unordered pairs."""
    i_all, j_all = all_pairs(state.node_count)
    if i_all.size == 0:
        return 0.0
    kappas = state.manifold.kappas
    total = 0.0
    for start in range(0, i_all.size, chunk):
        i, j = i_all[start:start + chunk], j_all[start:start + chunk]
        total += float(d_avg_loss(state.points, kappas, distances, (i, j))) * i.size
    return total / i_all.size


class PairSampler:
    """Uniform unordered pairs without replacement within a batch."""

    def __init__(self, node_count, batch, seed):
        self.i, self.j = all_pairs(node_count)
        self.batch = batch
        self.rng = np.random.default_rng([seed, 1])

    def __call__(self):
        total = self.i.size
        if self.batch >= total:
            return self.i, self.j
        pick = np.sort(self.rng.choice(total, size=self.batch, replace=False))
        return self.i[pick], self.j[pick]


def train(graph, manifold, config, distances=None, callback=None):
    """Embed a connected graph by minimising ``D_avg``.

    Parameters
    ----------
    graph : Graph
        Connected input graph (see ``largest_connected_component``).
    manifold : ProductManifold
        Factor layout and initial curvatures. It is copied, not mutated.
    config : TrainConfig
    distances : ndarray, optional
        Precomputed hop distances; computed with APSP when omitted.
    callback : callable, optional
        ``callback(iteration, optimizer)`` after every accepted step.

    Returns
    -------
    TrainResult
        Final state and ``history`` of ``(iteration, full-batch D_avg)``.
    """
    if distances is None:
        distances = all_pairs_shortest_paths(graph)
    manifold = copy.deepcopy(manifold)
    seed = config.optim.seed
    opt_cfg = config.optim
    if opt_cfg.strategy in (Strategy.EUCLIDEAN, Strategy.WARMSTART):
        for f in manifold.factors:
            f.curvature.value = 0.0
    state = init_embeddings(graph, manifold, seed, config.sigma_init)
    params = state.tangents if opt_cfg.strategy is Strategy.TANGENT else state.points
    opt = RiemannianSGD(manifold.factors, params, opt_cfg)
    sampler = PairSampler(state.node_count, config.pairs_per_batch(state.node_count), seed)

    def loss_fn(points, kappas):
        return d_avg_loss(points, kappas, distances, batch)

    def snapshot():
        state.points = [np.asarray(p) for p in opt.points()]
        if opt.tangent:
            state.tangents = [p.copy() for p in opt.params]
        return evaluate(state, distances)

    history = [(0, snapshot())]
    rejected = consecutive = 0
    for it in range(1, config.iterations + 1):
        batch = sampler()
        try:
            opt.step(loss_fn)
        except StepRejected as exc:
            rejected += 1
            consecutive += 1
            log.debug("iteration %d rejected: %s", it, exc)
            if consecutive > MAX_CONSECUTIVE_REJECTS:
                raise TrainingAborted(
                    f"{consecutive} consecutive rejected steps at iteration {it}; "
                    f"curvatures={manifold.kappas}") from exc
            continue
        consecutive = 0
        if callback is not None:
            callback(it, opt)
        if it % config.eval_every == 0 or it == config.iterations:
            history.append((it, snapshot()))
    if history[-1][0] != config.iterations:
        history.append((config.iterations, snapshot()))
    if not opt.tangent:
        state.tangents = None
    return TrainResult(state, history, rejected)

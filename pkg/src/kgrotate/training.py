"""Training configuration, initialisation, batch gradients and the training loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.sparse as sp

from .data import KnowledgeGraph
from .exceptions import ConfigError, Divergence, UnknownKey
from .losses import LossKind, loss_and_grad
from .optim import OptimizerState, adam_step
from .sampling import Side, sample_entities, self_adversarial_weights
from .scoring import TWO_PI, EmbeddingTable, ModelKind, get_model, wrap_phase

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    ``init_range`` defaults to ``(gamma + 2) / dim`` and ``decay_step`` to
    ``max_steps // 2``.  Phase parameters take Adam steps scaled by
    ``phase_lr_scale`` (default ``pi / init_range``), which puts one unit of
    entity coordinate and half a turn of phase on the same footing.
    """

    model: str = "rotate"
    dim: int = 500
    batch_size: int = 512
    negatives: int = 64
    alpha: float = 1.0
    gamma: float = 12.0
    loss: str = "adv"
    lr: float = 1e-4
    max_steps: int = 1000
    valid_every: int = 0
    seed: int = 0
    modulus: float = 1.0
    init_range: float | None = None
    decay_step: int | None = None
    decay_factor: float = 0.1
    filter_negatives: bool = True
    adversarial_margin: bool = False
    phase_lr_scale: float | None = None
    dtype: str = "float32"
    workers: int = 1

    def __post_init__(self):
        self.model = ModelKind.parse(self.model).value
        self.loss = LossKind.parse(self.loss).value
        for name in ("dim", "batch_size", "negatives", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_steps < 0 or self.valid_every < 0:
            raise ConfigError("max_steps and valid_every must be >= 0")
        if self.gamma <= 0 and self.model in ("rotate", "protate", "transe"):
            raise ConfigError("gamma must be > 0")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ConfigError("alpha must be finite and >= 0")
        if self.modulus <= 0:
            raise ConfigError("modulus must be > 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def resolved_init_range(self) -> float:
        return self.init_range if self.init_range is not None else (self.gamma + 2.0) / self.dim

    @property
    def resolved_phase_lr_scale(self) -> float:
        if self.phase_lr_scale is not None:
            return self.phase_lr_scale
        return math.pi / self.resolved_init_range

    @property
    def resolved_decay_step(self) -> int:
        return self.decay_step if self.decay_step is not None else self.max_steps // 2

    @property
    def adversarial(self) -> bool:
        return self.loss == "adv" or (self.loss == "margin" and self.adversarial_margin)

    def lr_at(self, step: int) -> float:
        return self.lr * (self.decay_factor if 0 < self.resolved_decay_step <= step else 1.0)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise UnknownKey(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def init_embeddings(
    config: TrainConfig, num_entities: int, num_relations: int, rng: np.random.Generator
) -> EmbeddingTable:
    """Uniform initialisation: coordinates in ``[-u, u]``, phases in ``[0, 2pi)``."""
    kind = ModelKind.parse(config.model)
    model = get_model(kind)
    u = config.resolved_init_range
    dtype = np.dtype(config.dtype)
    k = config.dim

    def draw(rows: int, phase: bool) -> np.ndarray:
        if phase:
            # float32 rounding can land exactly on 2pi, hence the wrap
            return wrap_phase(rng.uniform(0.0, TWO_PI, size=(rows, k)).astype(dtype))
        return rng.uniform(-u, u, size=(rows, k)).astype(dtype)

    entity = {p: draw(num_entities, model.entity_phase) for p in model.entity_parts}
    relation = {p: draw(num_relations, model.relation_phase) for p in model.relation_parts}
    return EmbeddingTable(kind, entity, relation, config.modulus)


def _scatter_rows(idx: np.ndarray, grads: np.ndarray, num_rows: int) -> np.ndarray:
    idx = idx.reshape(-1)
    grads = grads.reshape(len(idx), -1)
    m = sp.csr_matrix(
        (np.ones(len(idx), dtype=grads.dtype), (idx, np.arange(len(idx)))), shape=(num_rows, len(idx))
    )
    return np.asarray(m @ grads)


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, (a, b) in enumerate(zip(g.shape, shape)) if b == 1 and a != 1)
    return g.sum(axis=axes, keepdims=True) if axes else g


@dataclass
class BatchResult:
    loss: float
    grads: dict[str, np.ndarray]
    pos_scores: np.ndarray
    neg_scores: np.ndarray
    weights: np.ndarray


def batch_loss_and_grad(
    table: EmbeddingTable,
    positives: np.ndarray,
    neg_entities: np.ndarray,
    side: Side | str,
    loss: str,
    gamma: float,
    alpha: float = 1.0,
    adversarial: bool | None = None,
    weights: np.ndarray | None = None,
) -> BatchResult:
    """Mean per-positive loss of a batch and its analytic gradient for every parameter.

    ``neg_entities[i]`` holds the replacement entities for ``positives[i]`` on
    ``side``.  Self-adversarial weights are computed from the current scores and
    treated as constants; pass ``weights`` to pin them explicitly.
    """
    side = Side(side)
    kind = LossKind.parse(loss)
    if adversarial is None:
        adversarial = kind is LossKind.SELF_ADVERSARIAL
    model = table.model
    positives = np.asarray(positives, dtype=np.int64)
    neg_entities = np.asarray(neg_entities, dtype=np.int64)
    b, n = neg_entities.shape
    heads, rels, tails = positives[:, 0], positives[:, 1], positives[:, 2]

    h = table.entities(heads)
    r = table.relations(rels)
    t = table.entities(tails)
    f_pos, back_pos = model.vjp(h, r, t)

    neg = table.entities(neg_entities)
    r_b = tuple(p[:, None] for p in r)
    if side is Side.TAIL:
        f_neg, back_neg = model.vjp(tuple(p[:, None] for p in h), r_b, neg)
    else:
        f_neg, back_neg = model.vjp(neg, r_b, tuple(p[:, None] for p in t))

    if weights is None:
        weights = self_adversarial_weights(f_neg, alpha) if adversarial else np.full((b, n), 1.0 / n)
    per_pos, d_pos, d_neg = loss_and_grad(kind, -f_pos.astype(np.float64), -f_neg.astype(np.float64), weights, gamma)
    mean_loss = float(per_pos.mean())

    # d = -f, and the batch loss is a mean over positives
    dtype = table.dtype
    gh, gr, gt = back_pos((-d_pos / b).astype(dtype))
    gnh, gnr, gnt = back_neg((-d_neg / b).astype(dtype))

    grads = {key: np.zeros_like(v) for key, v in table.parameters().items()}
    num_e, num_r = table.num_entities, table.num_relations
    for i, part in enumerate(model.relation_parts):
        g = gr[i] + _reduce_to(gnr[i], (b, 1, table.dim))[:, 0]
        grads[f"relation.{part}"] += _scatter_rows(rels, g, num_r)
    for i, part in enumerate(model.entity_parts):
        key = f"entity.{part}"
        if side is Side.TAIL:
            g_head = gh[i] + _reduce_to(gnh[i], (b, 1, table.dim))[:, 0]
            grads[key] += _scatter_rows(heads, g_head, num_e)
            grads[key] += _scatter_rows(tails, gt[i], num_e)
            grads[key] += _scatter_rows(neg_entities, gnt[i], num_e)
        else:
            g_tail = gt[i] + _reduce_to(gnt[i], (b, 1, table.dim))[:, 0]
            grads[key] += _scatter_rows(tails, g_tail, num_e)
            grads[key] += _scatter_rows(heads, gh[i], num_e)
            grads[key] += _scatter_rows(neg_entities, gnh[i], num_e)
    return BatchResult(mean_loss, grads, f_pos, f_neg, weights)


def batch_loss(
    table: EmbeddingTable,
    positives: np.ndarray,
    neg_entities: np.ndarray,
    side: Side | str,
    loss: str,
    gamma: float,
    weights: np.ndarray | None = None,
) -> float:
    """Forward-only batch loss with fixed ``weights`` (uniform if ``None``)."""
    side = Side(side)
    positives = np.asarray(positives, dtype=np.int64)
    neg_entities = np.asarray(neg_entities, dtype=np.int64)
    negs = np.repeat(positives[:, None, :], neg_entities.shape[1], axis=1)
    negs[..., side.column] = neg_entities
    f_pos = table.score_triples(positives)
    f_neg = table.score_triples(negs.reshape(-1, 3)).reshape(neg_entities.shape)
    per_pos, _, _ = loss_and_grad(loss, -f_pos, -f_neg, weights, gamma)
    return float(per_pos.mean())


@dataclass
class Checkpoint:
    config: TrainConfig
    table: EmbeddingTable
    optimizer: OptimizerState
    step: int
    rng_state: dict
    history: list[dict] = field(default_factory=list)
    best: EmbeddingTable | None = None
    best_step: int | None = None

    @property
    def best_table(self) -> EmbeddingTable:
        return self.best if self.best is not None else self.table


def _side_for_step(step: int) -> Side:
    return Side.HEAD if step % 2 == 0 else Side.TAIL


def _draw_batch(train: np.ndarray, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    if batch_size >= len(train):
        return train[rng.permutation(len(train))]
    return train[rng.choice(len(train), size=batch_size, replace=False)]


def _parallel_batch(
    table: EmbeddingTable, positives, neg_ents, side, config: TrainConfig, pool: ThreadPoolExecutor | None
) -> BatchResult:
    """Split the batch over workers; contributions are merged in chunk order."""
    common = dict(
        side=side, loss=config.loss, gamma=config.gamma, alpha=config.alpha, adversarial=config.adversarial
    )
    if pool is None or config.workers == 1 or len(positives) < config.workers:
        return batch_loss_and_grad(table, positives, neg_ents, **common)
    chunks = np.array_split(np.arange(len(positives)), config.workers)
    parts = list(pool.map(lambda c: batch_loss_and_grad(table, positives[c], neg_ents[c], **common), chunks))
    b = len(positives)
    grads = {k: np.zeros_like(v) for k, v in parts[0].grads.items()}
    loss = 0.0
    for c, part in zip(chunks, parts):
        scale = len(c) / b
        loss += part.loss * scale
        for k in grads:
            grads[k] += part.grads[k] * np.asarray(scale, dtype=grads[k].dtype)
    return BatchResult(
        loss,
        grads,
        np.concatenate([p.pos_scores for p in parts]),
        np.concatenate([p.neg_scores for p in parts]),
        np.concatenate([p.weights for p in parts]),
    )


def new_checkpoint(graph: KnowledgeGraph, config: TrainConfig) -> Checkpoint:
    rng = np.random.default_rng(config.seed)
    table = init_embeddings(config, graph.num_entities, graph.num_relations, rng)
    state = OptimizerState.zeros_like(table.parameters())
    return Checkpoint(config, table, state, 0, rng.bit_generator.state)


def train(
    graph: KnowledgeGraph,
    config: TrainConfig,
    checkpoint: Checkpoint | None = None,
    validate: Callable[[EmbeddingTable], dict] | None = None,
    metrics_path: str | os.PathLike | None = None,
    log_every: int = 100,
    select: str = "MRR",
) -> Checkpoint:
    """Run ``config.max_steps`` Adam steps (resuming from ``checkpoint`` if given).

    Every ``valid_every`` steps ``validate(table)`` (default: filtered ranking
    on the valid split) is called; its record goes to the history and, when
    ``metrics_path`` is set, to a JSON-lines log.  The table with the highest
    value of the ``select`` metric is kept as ``checkpoint.best``.
    """
    from .evaluation import evaluate

    if len(graph.train) == 0:
        raise ValueError("training split is empty")
    cp = checkpoint if checkpoint is not None else new_checkpoint(graph, config)
    rng = np.random.default_rng()
    rng.bit_generator.state = cp.rng_state
    table = cp.table
    params = table.parameters()
    phase_keys = table.phase_keys()
    lr_scale = {k: config.resolved_phase_lr_scale for k in phase_keys}

    if validate is None and len(graph.valid):
        def validate(tab):
            return evaluate(tab, graph, "valid", categories=False).overall.to_dict()

    log_file = open(metrics_path, "a", encoding="utf-8") if metrics_path else None
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    best_value = max((h.get(select, -np.inf) for h in cp.history), default=-np.inf)
    window: list[float] = []
    try:
        while cp.step < config.max_steps:
            side = _side_for_step(cp.step)
            positives = _draw_batch(graph.train, config.batch_size, rng)
            neg_ents, _ = sample_entities(positives, side, config.negatives, graph, rng, config.filter_negatives)
            res = _parallel_batch(table, positives, neg_ents, side, config, pool)
            if not math.isfinite(res.loss):
                raise Divergence(f"non-finite loss at step {cp.step}")
            adam_step(params, res.grads, cp.optimizer, config.lr_at(cp.step), phase_keys, lr_scale)
            cp.step += 1
            window.append(res.loss)
            if log_every and cp.step % log_every == 0:
                logger.info("step %d loss %.6f", cp.step, float(np.mean(window)))
            if config.valid_every and validate is not None and (
                cp.step % config.valid_every == 0 or cp.step == config.max_steps
            ):
                record = {"step": cp.step, "loss": float(np.mean(window))}
                record.update(validate(table))
                window = []
                cp.history.append(record)
                if log_file:
                    log_file.write(json.dumps(record) + "\n")
                    log_file.flush()
                if record.get(select, -np.inf) > best_value:
                    best_value = record[select]
                    cp.best = table.copy()
                    cp.best_step = cp.step
    finally:
        if log_file:
            log_file.close()
        if pool:
            pool.shutdown()
    cp.rng_state = rng.bit_generator.state
    return cp

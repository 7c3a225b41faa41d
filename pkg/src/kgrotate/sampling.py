"""Negative sampling: triple corruption and self-adversarial weights."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .data import KnowledgeGraph

logger = logging.getLogger(__name__)

MAX_RETRIES = 128


class Side(str, enum.Enum):
    HEAD = "head"
    TAIL = "tail"

    @property
    def column(self) -> int:
        return 0 if self is Side.HEAD else 2

    def other(self) -> "Side":
        return Side.TAIL if self is Side.HEAD else Side.HEAD


class SamplingMode(str, enum.Enum):
    UNIFORM = "uniform"
    SELF_ADVERSARIAL = "self_adversarial"


@dataclass(frozen=True)
class SamplerConfig:
    n: int = 64
    alpha: float = 1.0
    mode: SamplingMode = SamplingMode.SELF_ADVERSARIAL
    filter_true: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")


@dataclass
class NegativeBatch:
    positive: np.ndarray
    negatives: np.ndarray
    side: Side
    weights: np.ndarray
    exhausted: bool = False


def worker_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """Independent generator for ``worker`` derived from the global seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(worker)]))


def sample_entities(
    positives: np.ndarray,
    side: Side,
    n: int,
    graph: KnowledgeGraph,
    rng: np.random.Generator,
    filter_true: bool = True,
    max_retries: int = MAX_RETRIES,
) -> tuple[np.ndarray, bool]:
    """Replacement entities of shape ``(len(positives), n)`` for the corrupted slot.

    With ``filter_true`` any candidate forming an observed triple is redrawn, up
    to ``max_retries`` rounds; survivors are then accepted and the returned flag
    is ``True``.
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    num = graph.num_entities
    ents = rng.integers(num, size=(len(positives), n))
    if not filter_true:
        return ents, False
    col = side.column
    candidate = np.repeat(positives[:, None, :], n, axis=1)
    bad = np.ones(ents.shape, dtype=bool)
    for _ in range(max_retries):
        candidate[..., col] = ents
        bad[bad] = graph.filter.contains_many(candidate[bad])
        count = int(bad.sum())
        if count == 0:
            return ents, False
        ents[bad] = rng.integers(num, size=count)
    candidate[..., col] = ents
    bad[bad] = graph.filter.contains_many(candidate[bad])
    return ents, bool(bad.any())


def corrupt(
    positive,
    side: Side | str,
    n: int,
    graph: KnowledgeGraph,
    rng: np.random.Generator,
    filter_true: bool = True,
) -> NegativeBatch:
    """Draw ``n`` corrupted copies of ``positive`` with one entity slot replaced."""
    if n < 1:
        raise ValueError("n must be >= 1")
    side = Side(side)
    positive = np.asarray(positive, dtype=np.int64).reshape(3)
    ents, exhausted = sample_entities(positive[None], side, n, graph, rng, filter_true)
    negatives = np.repeat(positive[None], n, axis=0)
    negatives[:, side.column] = ents[0]
    if exhausted:
        logger.warning("no unobserved corruption found for %s after %d retries", positive.tolist(), MAX_RETRIES)
    return NegativeBatch(positive, negatives, side, np.full(n, 1.0 / n), exhausted)


def self_adversarial_weights(neg_scores, alpha: float) -> np.ndarray:
    """Temperature softmax over each row of negative scores (higher score, more weight)."""
    z = alpha * np.asarray(neg_scores, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def uniform_weights(shape) -> np.ndarray:
    shape = tuple(np.atleast_1d(shape))
    return np.full(shape, 1.0 / shape[-1])

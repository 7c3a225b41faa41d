"""Per-positive training losses over distances.

Each function accepts either one positive (``pos_d`` scalar, ``neg_ds`` of
length n) or a batch (``pos_d`` shape ``(b,)``, ``neg_ds`` shape ``(b, n)``) and
returns one loss per positive.  For score-based models pass ``d = -f``.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit

from .exceptions import WeightMismatch


class LossKind(str, enum.Enum):
    NEGATIVE_SAMPLING = "ns"
    SELF_ADVERSARIAL = "adv"
    MARGIN_RANKING = "margin"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        aliases = {"negative_sampling": "ns", "self_adversarial": "adv", "margin_ranking": "margin"}
        value = str(value).lower()
        return cls(aliases.get(value, value))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def _weights(neg_ds, weights):
    neg_ds = np.asarray(neg_ds, dtype=np.float64)
    if weights is None:
        return neg_ds, np.full(neg_ds.shape, 1.0 / neg_ds.shape[-1])
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != neg_ds.shape:
        raise WeightMismatch(f"weights shape {weights.shape} != negatives shape {neg_ds.shape}")
    return neg_ds, weights


def ns_loss(pos_d, neg_ds, gamma: float):
    neg_ds = np.asarray(neg_ds, dtype=np.float64)
    return -log_sigmoid(gamma - np.asarray(pos_d)) - log_sigmoid(neg_ds - gamma).mean(axis=-1)


def self_adversarial_loss(pos_d, neg_ds, weights, gamma: float):
    neg_ds, weights = _weights(neg_ds, weights)
    return -log_sigmoid(gamma - np.asarray(pos_d)) - (weights * log_sigmoid(neg_ds - gamma)).sum(axis=-1)


def margin_ranking_loss(pos_d, neg_ds, weights, gamma: float):
    neg_ds, weights = _weights(neg_ds, weights)
    hinge = np.maximum(0.0, gamma + np.asarray(pos_d)[..., None] - neg_ds)
    return (weights * hinge).sum(axis=-1)


def loss_and_grad(kind: LossKind, pos_d, neg_ds, weights, gamma: float):
    """Per-positive loss with its derivatives w.r.t. ``pos_d`` and ``neg_ds``.

    ``weights`` are treated as constants.  ``None`` means uniform ``1/n``.
    """
    kind = LossKind.parse(kind)
    pos_d = np.asarray(pos_d, dtype=np.float64)
    neg_ds, weights = _weights(neg_ds, weights)
    if kind is LossKind.MARGIN_RANKING:
        slack = gamma + pos_d[..., None] - neg_ds
        active = (slack > 0).astype(np.float64)
        loss = (weights * np.maximum(slack, 0.0)).sum(axis=-1)
        return loss, (weights * active).sum(axis=-1), -weights * active
    loss = -log_sigmoid(gamma - pos_d) - (weights * log_sigmoid(neg_ds - gamma)).sum(axis=-1)
    # d/dx [-log sigmoid(x)] = -sigmoid(-x)
    d_pos = expit(pos_d - gamma)
    d_neg = -weights * expit(gamma - neg_ds)
    return loss, d_pos, d_neg

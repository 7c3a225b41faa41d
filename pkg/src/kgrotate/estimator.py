"""scikit-learn compatible estimator wrapping training, scoring and evaluation."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import KnowledgeGraph
from .evaluation import EvaluationResult, MetricReport, evaluate, rank_triples
from .sampling import Side
from .training import TrainConfig, train
from .validation import check_triples


class KGEmbedding(BaseEstimator):
    """Knowledge graph embedding model with a fit/score interface.

    ``fit`` accepts either a :class:`KnowledgeGraph` (its train split is used and
    its valid split drives best-model selection) or an ``(N, 3)`` integer array
    of training triples.  Scores follow the convention "higher is more
    plausible"; ``score`` returns the filtered MRR so that the estimator plugs
    into model-selection utilities.

    Parameters mirror :class:`kgrotate.training.TrainConfig`.
    """

    def __init__(
        self,
        model="rotate",
        dim=500,
        batch_size=512,
        negatives=64,
        alpha=1.0,
        gamma=12.0,
        loss="adv",
        lr=1e-4,
        max_steps=1000,
        valid_every=0,
        seed=0,
        modulus=1.0,
        init_range=None,
        decay_step=None,
        decay_factor=0.1,
        filter_negatives=True,
        adversarial_margin=False,
        phase_lr_scale=None,
        dtype="float32",
        workers=1,
    ):
        self.model = model
        self.dim = dim
        self.batch_size = batch_size
        self.negatives = negatives
        self.alpha = alpha
        self.gamma = gamma
        self.loss = loss
        self.lr = lr
        self.max_steps = max_steps
        self.valid_every = valid_every
        self.seed = seed
        self.modulus = modulus
        self.init_range = init_range
        self.decay_step = decay_step
        self.decay_factor = decay_factor
        self.filter_negatives = filter_negatives
        self.adversarial_margin = adversarial_margin
        self.phase_lr_scale = phase_lr_scale
        self.dtype = dtype
        self.workers = workers

    def _config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.get_params())

    def _as_graph(self, X, n_entities=None, n_relations=None) -> KnowledgeGraph:
        if isinstance(X, KnowledgeGraph):
            return X
        X = check_triples(X)
        n_e = n_entities if n_entities is not None else int(X[:, [0, 2]].max()) + 1
        n_r = n_relations if n_relations is not None else int(X[:, 1].max()) + 1
        return KnowledgeGraph([str(i) for i in range(n_e)], [str(i) for i in range(n_r)], X)

    def fit(self, X, y=None, n_entities=None, n_relations=None):
        graph = self._as_graph(X, n_entities, n_relations)
        self.checkpoint_ = train(graph, self._config())
        self.table_ = self.checkpoint_.best_table
        self.graph_ = graph
        self.n_entities_ = graph.num_entities
        self.n_relations_ = graph.num_relations
        return self

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        X = check_triples(X, self.n_entities_, self.n_relations_)
        return self.table_.score_triples(X).astype(np.float64)

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X)

    def rank(self, X, side="tail", graph: KnowledgeGraph | None = None) -> np.ndarray:
        """Filtered ranks of ``X`` against the filter index of ``graph`` (default: the fitted graph)."""
        check_is_fitted(self, "table_")
        X = check_triples(X, self.n_entities_, self.n_relations_)
        return rank_triples(self.table_, X, Side(side), graph or self.graph_)[0]

    def evaluate(self, graph: KnowledgeGraph | None = None, split="test") -> EvaluationResult:
        check_is_fitted(self, "table_")
        return evaluate(self.table_, graph or self.graph_, split)

    def score(self, X, y=None) -> float:
        """Filtered MRR of ``X`` with both corruption sides pooled."""
        ranks = np.concatenate([self.rank(X, "head"), self.rank(X, "tail")])
        return MetricReport.from_ranks(ranks).mrr

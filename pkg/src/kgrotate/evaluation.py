"""Filtered link-prediction ranking, MR/MRR/Hits@N and the Countries AUC-PR protocol."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import KnowledgeGraph, RelationCategory, relation_categories
from .exceptions import EmptySplit, IdOutOfRange, NotACountriesGraph
from .sampling import Side
from .scoring import EmbeddingTable

HITS_AT = (1, 3, 10)
# bound on the number of floats materialised per scoring chunk
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class RankResult:
    triple: tuple[int, int, int]
    side: Side
    rank: float
    num_candidates: int


@dataclass
class MetricReport:
    mr: float
    mrr: float
    hits: dict[int, float]
    count: int

    @classmethod
    def from_ranks(cls, ranks: Iterable[float], hits_at: Sequence[int] = HITS_AT) -> "MetricReport":
        ranks = np.asarray(list(ranks), dtype=np.float64)
        if len(ranks) == 0:
            return cls(float("nan"), float("nan"), {n: float("nan") for n in hits_at}, 0)
        # correctly rounded sums make the report independent of summation order
        n = len(ranks)
        return cls(
            mr=math.fsum(ranks) / n,
            mrr=math.fsum(1.0 / ranks) / n,
            hits={k: int(np.count_nonzero(ranks <= k)) / n for k in hits_at},
            count=n,
        )

    def to_dict(self) -> dict:
        out = {"MR": self.mr, "MRR": self.mrr}
        out.update({f"H@{n}": v for n, v in self.hits.items()})
        out["count"] = self.count
        return out


@dataclass
class EvaluationResult:
    overall: MetricReport
    by_side: dict[Side, MetricReport]
    by_category: dict[RelationCategory, dict[Side, MetricReport]] = field(default_factory=dict)
    ranks: list[RankResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "by_side": {s.value: r.to_dict() for s, r in self.by_side.items()},
            "by_category": {
                c.value: {s.value: r.to_dict() for s, r in sides.items()}
                for c, sides in self.by_category.items()
            },
        }

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    def to_text(self) -> str:
        """Aligned table with columns MR, MRR, H@1, H@3, H@10."""
        rows = [("overall", self.overall)]
        rows += [(f"predict {s.value}", r) for s, r in self.by_side.items()]
        for cat, sides in self.by_category.items():
            rows += [(f"{cat.value} / {s.value}", r) for s, r in sides.items()]
        header = f"{'':<18}{'MR':>10}{'MRR':>8}" + "".join(f"{'H@' + str(n):>8}" for n in self.overall.hits)
        lines = [header]
        for name, rep in rows:
            lines.append(
                f"{name:<18}{rep.mr:>10.1f}{rep.mrr:>8.3f}" + "".join(f"{v:>8.3f}" for v in rep.hits.values())
            )
        return "\n".join(lines)


def _score_candidates(table: EmbeddingTable, triples: np.ndarray, side: Side) -> np.ndarray:
    """Scores of every entity substituted into ``side`` for each triple: ``(B, E)``."""
    model = table.model
    num_e = table.num_entities
    rels = table.relations(triples[:, 1])
    out = np.empty((len(triples), num_e), dtype=np.float64)
    step = max(1, _CHUNK_ELEMENTS // max(1, len(triples) * table.dim))
    for lo in range(0, num_e, step):
        cand = tuple(p[None, lo:lo + step] for p in table.entities(slice(None)))
        if side is Side.TAIL:
            h = tuple(p[:, None] for p in table.entities(triples[:, 0]))
            s = model.score(h, tuple(p[:, None] for p in rels), cand)
        else:
            t = tuple(p[:, None] for p in table.entities(triples[:, 2]))
            s = model.score(cand, tuple(p[:, None] for p in rels), t)
        out[:, lo:lo + step] = s
    return out


def _filtered_ranks(scores: np.ndarray, triples: np.ndarray, side: Side, graph: KnowledgeGraph):
    ranks = np.empty(len(triples))
    n_cand = np.empty(len(triples), dtype=np.int64)
    col = side.column
    for i, (h, r, t) in enumerate(triples.tolist()):
        row = scores[i]
        target = (h, r, t)[col]
        known = graph.filter.known_tails(h, r) if side is Side.TAIL else graph.filter.known_heads(r, t)
        keep = np.ones(len(row), dtype=bool)
        keep[known] = False
        keep[target] = False
        true_score = row[target]
        competitors = row[keep]
        ranks[i] = 1.0 + np.count_nonzero(competitors > true_score) + 0.5 * np.count_nonzero(competitors == true_score)
        n_cand[i] = int(keep.sum()) + 1
    return ranks, n_cand


def rank_triples(
    table: EmbeddingTable, triples: np.ndarray, side: Side | str, graph: KnowledgeGraph, batch_size: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Filtered, tie-averaged ranks for a set of triples on one corruption side."""
    side = Side(side)
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    table.check_ids(triples)
    ranks, n_cand = [], []
    for lo in range(0, len(triples), batch_size):
        chunk = triples[lo:lo + batch_size]
        r, n = _filtered_ranks(_score_candidates(table, chunk, side), chunk, side, graph)
        ranks.append(r)
        n_cand.append(n)
    if not ranks:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    return np.concatenate(ranks), np.concatenate(n_cand)


def rank_triple(table: EmbeddingTable, triple, side: Side | str, graph: KnowledgeGraph) -> RankResult:
    """Rank of ``triple`` among all filtered corruptions of one side.

    rank = 1 + #(higher-scored candidates) + 0.5 * #(equally-scored candidates),
    where every other observed triple is removed from the candidate set.
    """
    triple = np.asarray(triple, dtype=np.int64).reshape(1, 3)
    if triple.min() < 0 or triple[0, [0, 2]].max() >= table.num_entities or triple[0, 1] >= table.num_relations:
        raise IdOutOfRange(f"triple {triple[0].tolist()} outside the embedding table")
    ranks, n_cand = rank_triples(table, triple, side, graph)
    return RankResult(tuple(triple[0].tolist()), Side(side), float(ranks[0]), int(n_cand[0]))


def evaluate(
    table: EmbeddingTable,
    graph: KnowledgeGraph,
    split: str = "test",
    categories: bool = True,
    category_split: str = "train",
) -> EvaluationResult:
    """Rank both sides of every triple in ``split``; pool sides for the overall report."""
    triples = graph.split(split)
    if len(triples) == 0:
        raise EmptySplit(split)
    results: list[RankResult] = []
    side_ranks: dict[Side, np.ndarray] = {}
    for side in (Side.HEAD, Side.TAIL):
        ranks, n_cand = rank_triples(table, triples, side, graph)
        side_ranks[side] = ranks
        results.extend(
            RankResult(tuple(t), side, float(rk), int(n)) for t, rk, n in zip(triples.tolist(), ranks, n_cand)
        )
    overall = MetricReport.from_ranks(np.concatenate([side_ranks[Side.HEAD], side_ranks[Side.TAIL]]))
    by_side = {s: MetricReport.from_ranks(r) for s, r in side_ranks.items()}
    by_category: dict[RelationCategory, dict[Side, MetricReport]] = {}
    if categories and len(graph.split(category_split)):
        cats = relation_categories(graph, category_split)
        rel_cat = [cats[r].category if r in cats else None for r in triples[:, 1].tolist()]
        for cat in RelationCategory:
            mask = np.array([c is cat for c in rel_cat], dtype=bool)
            if mask.any():
                by_category[cat] = {s: MetricReport.from_ranks(side_ranks[s][mask]) for s in side_ranks}
    return EvaluationResult(overall, by_side, by_category, results)


# --------------------------------------------------------------------------
# Countries
# --------------------------------------------------------------------------

LOCATED_IN = "locatedIn"
NUM_REGIONS = 5


def find_regions(graph: KnowledgeGraph, relation: int | None = None) -> np.ndarray:
    """Entity ids of the regions: ``locatedIn`` tails that are never ``locatedIn`` heads."""
    if relation is None:
        if LOCATED_IN not in graph.relation_names:
            raise NotACountriesGraph(f"no {LOCATED_IN!r} relation")
        relation = graph.relation_id(LOCATED_IN)
    triples = graph.all_triples()
    located = triples[triples[:, 1] == relation]
    regions = np.setdiff1d(np.unique(located[:, 2]), np.unique(located[:, 0]))
    if len(regions) != NUM_REGIONS:
        raise NotACountriesGraph(f"expected {NUM_REGIONS} regions, found {len(regions)}")
    return regions


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Precision and recall at every distinct score threshold, descending."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    order = np.argsort(-scores, kind="mergesort")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    # last index of each block of tied scores
    ends = np.r_[np.flatnonzero(np.diff(scores) != 0), len(scores) - 1]
    tp = tp[ends]
    predicted = ends + 1
    precision = tp / predicted
    recall = tp / max(labels.sum(), 1)
    return scores[ends], precision, recall


def average_precision(scores, labels) -> float:
    """Step-interpolated area under the precision-recall curve."""
    _, precision, recall = pr_curve(scores, labels)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class CountriesResult:
    auc_pr: float
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["threshold", "precision", "recall"])
            for row in zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()):
                w.writerow([repr(float(x)) for x in row])


def countries_scores(
    table: EmbeddingTable, graph: KnowledgeGraph, split: str = "test", regions: Sequence[int] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled ``(score, is_true_region)`` pairs for every held-out ``locatedIn(c, ?)`` query."""
    rel = graph.relation_id(LOCATED_IN) if LOCATED_IN in graph.relation_names else None
    regions = np.asarray(regions if regions is not None else find_regions(graph, rel), dtype=np.int64)
    if len(regions) != NUM_REGIONS:
        raise NotACountriesGraph(f"expected {NUM_REGIONS} regions, got {len(regions)}")
    queries = graph.split(split)
    queries = queries[np.isin(queries[:, 2], regions)]
    if len(queries) == 0:
        raise EmptySplit(split)
    cand = np.repeat(queries, len(regions), axis=0)
    cand[:, 2] = np.tile(regions, len(queries))
    scores = table.score_triples(cand).astype(np.float64)
    labels = cand[:, 2] == np.repeat(queries[:, 2], len(regions))
    return scores, labels


def countries_auc_pr(
    table: EmbeddingTable, graph: KnowledgeGraph, split: str = "test", regions: Sequence[int] | None = None
) -> CountriesResult:
    scores, labels = countries_scores(table, graph, split, regions)
    thresholds, precision, recall = pr_curve(scores, labels)
    return CountriesResult(average_precision(scores, labels), thresholds, precision, recall)


def read_regions(directory: str | os.PathLike, graph: KnowledgeGraph) -> list[int] | None:
    """Region ids from an optional ``regions.dict`` / ``regions.txt`` beside the dataset."""
    for name in ("regions.dict", "regions.txt"):
        path = Path(directory) / name
        if path.is_file():
            names = [line.rstrip("\n").split("\t")[-1] for line in open(path, encoding="utf-8") if line.strip()]
            return [graph.entity_id(n) for n in names]
    return None

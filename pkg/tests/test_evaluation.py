import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from oracles import brute_force_auc_pr, brute_force_report
from kgrotate.data import KnowledgeGraph
from kgrotate.evaluation import (
    MetricReport,
    average_precision,
    countries_auc_pr,
    evaluate,
    find_regions,
    rank_triple,
    rank_triples,
)
from kgrotate.exceptions import EmptySplit, IdOutOfRange, NotACountriesGraph
from kgrotate.scoring import EmbeddingTable, ModelKind
from kgrotate.synthetic import countries_like
from kgrotate.training import TrainConfig, init_embeddings


def distmult_table(entity_vec, relation_vec):
    return EmbeddingTable(
        ModelKind.DISTMULT,
        {"vec": np.asarray(entity_vec, dtype=np.float64)},
        {"vec": np.asarray(relation_vec, dtype=np.float64)},
    )


def scalar_table(values):
    """1-d DistMult table where score(h, 0, t) = x_h * x_t."""
    return distmult_table(np.asarray(values, dtype=np.float64)[:, None], [[1.0]])


class TestMetricReport:
    def test_hand_ranks(self):
        rep = MetricReport.from_ranks([1, 2, 4])
        assert rep.mr == pytest.approx(7 / 3)
        assert rep.mrr == pytest.approx(0.583333, abs=1e-6)
        assert rep.hits == pytest.approx({1: 1 / 3, 3: 2 / 3, 10: 1.0})

    def test_perfect(self):
        rep = MetricReport.from_ranks(np.ones(7))
        assert (rep.mr, rep.mrr) == (1.0, 1.0)


class TestRankTriple:
    def test_top_score_is_rank_one(self):
        g = KnowledgeGraph.from_named_triples([("a", "r", "b")], entities=list("abcde"))
        tab = scalar_table([1.0, 5.0, 1.0, 1.0, 1.0])
        assert rank_triple(tab, (0, 0, 1), "tail", g).rank == 1.0

    def test_third_then_filtered(self):
        # tail candidates score x_t (head value 1); the true tail is third highest
        tab = scalar_table([1.0, 5.0, 4.0, 3.0, 0.5])
        raw = KnowledgeGraph.from_named_triples([("a", "r", "d")], entities=list("abcde"))
        assert rank_triple(tab, (0, 0, 3), "tail", raw).rank == 3.0
        filtered = KnowledgeGraph.from_named_triples(
            [("a", "r", "b"), ("a", "r", "c")], test=[("a", "r", "d")], entities=list("abcde")
        )
        res = rank_triple(tab, (0, 0, 3), "tail", filtered)
        assert res.rank == 1.0 and res.num_candidates == 3

    def test_ties_are_averaged(self):
        g = KnowledgeGraph.from_named_triples([("a", "r", "b")], entities=list("abcd"))
        tab = scalar_table([1.0, 2.0, 2.0, 2.0])
        assert rank_triple(tab, (0, 0, 1), "tail", g).rank == 2.0

    def test_out_of_range(self, tiny_graph):
        tab = scalar_table([1.0, 2.0])
        with pytest.raises(IdOutOfRange):
            rank_triple(tab, (0, 0, 7), "tail", tiny_graph)


def test_filtered_never_exceeds_raw(rng):
    g = random_graph(rng, 10, 2, 40, n_test=10)
    tab = init_embeddings(TrainConfig(model="rotate", dim=4, gamma=1.0), 10, 2, rng)
    bare = KnowledgeGraph(g.entity_names, g.relation_names, g.test[:0], test=g.test)
    for side in ("head", "tail"):
        filt, _ = rank_triples(tab, g.test, side, g)
        raw, _ = rank_triples(tab, g.test, side, bare)
        assert np.all(filt <= raw)


def test_monotone_transform_keeps_ranks(rng):
    g = random_graph(rng, 9, 1, 20, n_test=8)
    tab = distmult_table(rng.normal(size=(9, 1)), [[1.0]])
    cubed = distmult_table(tab.entity["vec"] ** 3, [[1.0]])
    for side in ("head", "tail"):
        np.testing.assert_array_equal(rank_triples(tab, g.test, side, g)[0], rank_triples(cubed, g.test, side, g)[0])


@pytest.mark.parametrize("model", ["rotate", "transe", "complex"])
def test_matches_brute_force(model):
    rng = np.random.default_rng(8)
    for _ in range(5):
        g = random_graph(rng, 8, 3, 20, n_test=6, n_valid=3)
        tab = init_embeddings(TrainConfig(model=model, dim=3, gamma=1.0, dtype="float64"), 8, 3, rng)
        assert evaluate(tab, g, "test").overall.to_dict() == brute_force_report(tab, g)


def test_brute_force_with_ties():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 8, 2, 15, n_test=6)
    tab = distmult_table(rng.integers(-1, 2, size=(8, 2)), rng.integers(-1, 2, size=(2, 2)))
    assert evaluate(tab, g).overall.to_dict() == brute_force_report(tab, g)


def test_report_structure(rng):
    g = random_graph(rng, 10, 3, 40, n_test=8)
    tab = init_embeddings(TrainConfig(model="rotate", dim=4), 10, 3, rng)
    res = evaluate(tab, g)
    assert res.overall.count == 16
    assert {s.value for s in res.by_side} == {"head", "tail"}
    assert sum(r.count for sides in res.by_category.values() for r in sides.values()) == 16
    assert res.overall.hits[1] <= res.overall.hits[3] <= res.overall.hits[10]
    assert res.overall.hits[1] <= res.overall.mrr <= 1.0
    assert "MRR" in res.to_text().splitlines()[0]


def test_empty_split(tiny_graph):
    with pytest.raises(EmptySplit):
        evaluate(scalar_table([1.0, 2.0]), tiny_graph, "test")


class TestAucPr:
    def test_hand_fixture(self):
        # three queries, five regions each
        scores = [0.9, 0.1, 0.2, 0.3, 0.0, 0.5, 0.8, 0.4, 0.1, 0.2, 0.6, 0.6, 0.1, 0.0, 0.7]
        labels = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0]
        assert average_precision(scores, labels) == pytest.approx(brute_force_auc_pr(scores, labels), rel=1e-12)

    def test_all_ties(self):
        labels = np.tile([1, 0, 0, 0, 0], 6)
        assert average_precision(np.zeros(30), labels) == pytest.approx(0.2)

    def test_perfect(self):
        assert average_precision([3, 1, 1, 0], [1, 0, 0, 0]) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=2, max_size=30))
    def test_against_enumeration_and_monotone_invariance(self, pairs):
        scores = np.array([p[0] for p in pairs], dtype=float)
        labels = np.array([p[1] for p in pairs])
        if not labels.any():
            return
        ap = average_precision(scores, labels)
        assert ap == pytest.approx(brute_force_auc_pr(scores, labels), rel=1e-12)
        assert average_precision(np.exp(scores) * 3 + 1, labels) == pytest.approx(ap, rel=1e-12)


@pytest.fixture(scope="module")
def s1():
    return countries_like(seed=0)["S1"]


class TestCountries:
    def test_five_regions(self, s1):
        regions = find_regions(s1)
        assert len(regions) == 5
        assert all(s1.entity_names[r].startswith("region") for r in regions)

    def test_oracle_table_scores_one(self, s1):
        # DistMult with one dimension per region and country vectors one-hot
        # on their true region ranks every query perfectly.
        regions = list(find_regions(s1))
        rel = s1.relation_id("locatedIn")
        ent = np.zeros((s1.num_entities, 5))
        for r_idx, r in enumerate(regions):
            ent[r, r_idx] = 1.0
        for h, _, t in s1.all_triples()[s1.all_triples()[:, 1] == rel].tolist():
            if t in regions:
                ent[h, regions.index(t)] = 1.0
        res = countries_auc_pr(distmult_table(ent, np.ones((2, 5))), s1)
        assert res.auc_pr == 1.0
        assert res.recall[-1] == 1.0

    def test_pr_csv(self, s1, tmp_path, rng):
        tab = init_embeddings(TrainConfig(model="rotate", dim=8), s1.num_entities, 2, rng)
        res = countries_auc_pr(tab, s1)
        res.to_csv(tmp_path / "pr.csv")
        lines = (tmp_path / "pr.csv").read_text().splitlines()
        assert lines[0] == "threshold,precision,recall"
        assert len(lines) == len(res.thresholds) + 1
        assert 0.0 < res.auc_pr <= 1.0

    def test_not_a_countries_graph(self, tiny_graph):
        with pytest.raises(NotACountriesGraph):
            find_regions(tiny_graph)

import numpy as np
import pytest

from kgrotate.evaluation import find_regions
from kgrotate.synthetic import countries_like, pattern_graph


@pytest.fixture(scope="module")
def tasks():
    return countries_like(seed=3)


def as_set(triples):
    return {tuple(t) for t in triples.tolist()}


def test_countries_schema(tasks):
    for g in tasks.values():
        assert g.relation_names == ["locatedIn", "neighborOf"]
        assert len(find_regions(g)) == 5
        assert len(g.valid) == len(g.test) == 24
        assert not as_set(g.train) & as_set(g.test)


def test_tasks_are_nested(tasks):
    s1, s2, s3 = (as_set(tasks[k].train) for k in ("S1", "S2", "S3"))
    assert s3 < s2 < s1


def test_held_out_countries_keep_a_training_neighbour(tasks):
    g = tasks["S3"]
    nb = g.relation_id("neighborOf")
    neighbours = g.train[g.train[:, 1] == nb]
    held = set(g.test[:, 0]) | set(g.valid[:, 0])
    for c in held:
        ns = set(neighbours[neighbours[:, 0] == c][:, 2].tolist())
        assert ns - held


def test_s2_removes_subregion_links(tasks):
    g = tasks["S2"]
    loc = g.relation_id("locatedIn")
    located = as_set(g.train[g.train[:, 1] == loc])
    for c in g.test[:, 0].tolist():
        assert not any(h == c for h, _, _ in located)


def test_countries_deterministic():
    a, b = countries_like(seed=11)["S1"], countries_like(seed=11)["S1"]
    np.testing.assert_array_equal(a.train, b.train)


class TestPatternGraph:
    def test_counts(self):
        g, spec = pattern_graph(seed=0)
        assert g.num_entities == 500
        per_rel = np.bincount(g.train[:, 1], minlength=g.num_relations)
        for name in (spec.symmetric, *spec.inverse, *spec.composition):
            assert per_rel[g.relation_id(name)] >= 500
        held = np.concatenate([g.valid, g.test])
        assert set(held[:, 1].tolist()) <= {g.relation_id(d) for d in spec.distractors}

    def test_patterns_hold_exactly(self):
        g, spec = pattern_graph(seed=0)
        facts = as_set(g.all_triples())
        rel = {name: g.relation_id(name) for name in g.relation_names}

        def tail(r, h):
            return next(t for (hh, rr, t) in facts if hh == h and rr == r)

        for h in range(0, 500, 37):
            t = tail(rel[spec.symmetric], h)
            assert (t, rel[spec.symmetric], h) in facts
            t = tail(rel[spec.inverse[0]], h)
            assert (t, rel[spec.inverse[1]], h) in facts
            mid = tail(rel[spec.composition[1]], h)
            assert (h, rel[spec.composition[0]], tail(rel[spec.composition[2]], mid)) in facts

    def test_distractor_not_symmetric(self):
        g, spec = pattern_graph(seed=0)
        facts = as_set(g.all_triples())
        r = g.relation_id(spec.distractors[0])
        assert not any((t, r, h) in facts for h, rr, t in facts if rr == r)

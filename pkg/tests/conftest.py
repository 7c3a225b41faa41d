import numpy as np
import pytest

from kgrotate.data import KnowledgeGraph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_graph():
    """Two entities, two relations, three training triples."""
    return KnowledgeGraph.from_named_triples([("a", "r", "b"), ("b", "r", "a"), ("a", "s", "b")])


def write_dataset(path, entities, relations, train=(), valid=(), test=()):
    path.mkdir(parents=True, exist_ok=True)
    (path / "entities.dict").write_text("".join(f"{i}\t{e}\n" for i, e in enumerate(entities)))
    (path / "relations.dict").write_text("".join(f"{i}\t{r}\n" for i, r in enumerate(relations)))
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        (path / f"{name}.txt").write_text("".join("\t".join(row) + "\n" for row in rows))
    return path


def random_graph(rng, n_entities, n_relations, n_train, n_test=0, n_valid=0):
    total = n_train + n_test + n_valid
    triples = np.stack(
        [rng.integers(n_entities, size=4 * total), rng.integers(n_relations, size=4 * total), rng.integers(n_entities, size=4 * total)],
        1,
    )
    _, first = np.unique(triples, axis=0, return_index=True)
    triples = triples[np.sort(first)][:total]
    return KnowledgeGraph(
        [f"e{i}" for i in range(n_entities)],
        [f"r{i}" for i in range(n_relations)],
        triples[:n_train],
        triples[n_train:n_train + n_valid],
        triples[n_train + n_valid:],
    )


_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Report one acceptance criterion: print a PASS/FAIL line, then assert."""

    def _record(number, title, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
        _ACCEPTANCE.append(line)
        print(line)
        assert passed, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

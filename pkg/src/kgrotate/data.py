"""Knowledge-graph datasets: loading, filter index and relation categories.

A dataset directory holds ``entities.dict`` and ``relations.dict`` (``id<TAB>name``
per line) plus ``train.txt``, ``valid.txt`` and ``test.txt`` with one
``head<TAB>relation<TAB>tail`` triple per line.  Triples are kept in memory as
``(N, 3)`` int64 arrays in ``(head, relation, tail)`` column order.
"""

from __future__ import annotations

import enum
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import EmptySplit, MalformedLine, MissingFile, UnknownSymbol

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
DATA_ROOT_ENV = "KGE_DATA_ROOT"


def as_triples(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"triples must have shape (N, 3), got {arr.shape}")
    return arr


def unique_triples(triples: np.ndarray) -> np.ndarray:
    """Deduplicate rows, keeping first-occurrence order."""
    triples = as_triples(triples)
    if len(triples) == 0:
        return triples
    _, first = np.unique(triples, axis=0, return_index=True)
    return triples[np.sort(first)]


class FilterIndex:
    """Membership index over every observed triple.

    Besides ``contains`` it answers the two neighbourhood queries needed for
    filtered ranking: the known tails of ``(h, r, ?)`` and the known heads of
    ``(?, r, t)``.
    """

    def __init__(self, triples: np.ndarray, num_entities: int, num_relations: int):
        triples = unique_triples(triples)
        self.num_entities = int(num_entities)
        self.num_relations = int(num_relations)
        self._keys = np.unique(self._encode(triples))
        self._tails: dict[tuple[int, int], np.ndarray] = {}
        self._heads: dict[tuple[int, int], np.ndarray] = {}
        tails: dict[tuple[int, int], list[int]] = {}
        heads: dict[tuple[int, int], list[int]] = {}
        for h, r, t in triples.tolist():
            tails.setdefault((h, r), []).append(t)
            heads.setdefault((r, t), []).append(h)
        self._tails = {key: np.array(sorted(v), dtype=np.int64) for key, v in tails.items()}
        self._heads = {key: np.array(sorted(v), dtype=np.int64) for key, v in heads.items()}

    def _encode(self, triples: np.ndarray) -> np.ndarray:
        triples = as_triples(triples)
        return (triples[:, 0] * self.num_relations + triples[:, 1]) * self.num_entities + triples[:, 2]

    def __len__(self) -> int:
        return len(self._keys)

    def contains(self, triple: Sequence[int]) -> bool:
        return bool(self.contains_many(np.asarray([triple]))[0])

    def contains_many(self, triples: np.ndarray) -> np.ndarray:
        keys = self._encode(triples)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            return np.zeros(len(keys), dtype=bool)
        return self._keys[pos] == keys

    def known_tails(self, head: int, relation: int) -> np.ndarray:
        return self._tails.get((int(head), int(relation)), np.zeros(0, dtype=np.int64))

    def known_heads(self, relation: int, tail: int) -> np.ndarray:
        return self._heads.get((int(relation), int(tail)), np.zeros(0, dtype=np.int64))


def filter_contains(index: FilterIndex, triple: Sequence[int]) -> bool:
    return index.contains(triple)


@dataclass(frozen=True)
class KnowledgeGraph:
    entity_names: list[str]
    relation_names: list[str]
    train: np.ndarray
    valid: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    filter: FilterIndex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.entity_names)) != len(self.entity_names):
            raise ValueError("entity names must be unique")
        if len(set(self.relation_names)) != len(self.relation_names):
            raise ValueError("relation names must be unique")
        for name in SPLITS:
            arr = as_triples(getattr(self, name))
            if len(arr) and (
                arr.min() < 0
                or arr[:, [0, 2]].max() >= self.num_entities
                or arr[:, 1].max() >= self.num_relations
            ):
                raise ValueError(f"{name} split references ids outside the vocabularies")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self,
            "filter",
            FilterIndex(self.all_triples(), self.num_entities, self.num_relations),
        )

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test])

    def counts(self) -> tuple[int, int, int, int, int]:
        return (self.num_entities, self.num_relations, len(self.train), len(self.valid), len(self.test))

    def entity_id(self, name: str) -> int:
        return self.entity_names.index(name)

    def relation_id(self, name: str) -> int:
        return self.relation_names.index(name)

    @classmethod
    def from_named_triples(
        cls,
        train: Iterable[tuple[str, str, str]],
        valid: Iterable[tuple[str, str, str]] = (),
        test: Iterable[tuple[str, str, str]] = (),
        entities: Iterable[str] = (),
    ) -> "KnowledgeGraph":
        """Build a graph from name triples, assigning ids by first appearance.

        Names in ``entities`` are numbered first, which fixes the id order and
        allows entities that occur in no triple.
        """
        splits = [list(train), list(valid), list(test)]
        ents: dict[str, int] = {e: i for i, e in enumerate(dict.fromkeys(entities))}
        rels: dict[str, int] = {}
        for triples in splits:
            for h, r, t in triples:
                ents.setdefault(h, len(ents))
                rels.setdefault(r, len(rels))
                ents.setdefault(t, len(ents))
        arrays = [
            as_triples([(ents[h], rels[r], ents[t]) for h, r, t in triples])
            for triples in splits
        ]
        return cls(list(ents), list(rels), *arrays)


def _read_dict(path: Path) -> list[str]:
    if not path.is_file():
        raise MissingFile(str(path))
    names: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLine(f"{path}:{lineno}: expected 'id<TAB>name'")
            try:
                idx = int(parts[0])
            except ValueError:
                raise MalformedLine(f"{path}:{lineno}: id {parts[0]!r} is not an integer") from None
            if idx != len(names):
                raise MalformedLine(f"{path}:{lineno}: ids must be contiguous from 0, got {idx}")
            names.append(parts[1])
    if len(set(names)) != len(names):
        raise MalformedLine(f"{path}: duplicate names")
    return names


def _read_triples(path: Path, entities: Mapping[str, int], relations: Mapping[str, int]) -> np.ndarray:
    if not path.is_file():
        raise MissingFile(str(path))
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedLine(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            h, r, t = parts
            try:
                rows.append((entities[h], relations[r], entities[t]))
            except KeyError as exc:
                raise UnknownSymbol(f"{path}:{lineno}: unknown symbol {exc.args[0]!r}") from None
    triples = as_triples(rows)
    deduped = unique_triples(triples)
    if len(deduped) != len(triples):
        warnings.warn(f"{path}: dropped {len(triples) - len(deduped)} duplicate triples", stacklevel=3)
    return deduped


def resolve_dataset_dir(path: str | os.PathLike) -> Path:
    """Resolve ``path`` directly, or relative to ``$KGE_DATA_ROOT``."""
    path = Path(path)
    if path.is_dir() or path.is_absolute():
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root and (Path(root) / path).is_dir():
        return Path(root) / path
    return path


def load_dataset(directory: str | os.PathLike) -> KnowledgeGraph:
    directory = resolve_dataset_dir(directory)
    if not directory.is_dir():
        raise MissingFile(str(directory))
    entities = _read_dict(directory / "entities.dict")
    relations = _read_dict(directory / "relations.dict")
    ent_ids = {name: i for i, name in enumerate(entities)}
    rel_ids = {name: i for i, name in enumerate(relations)}
    splits = [_read_triples(directory / f"{s}.txt", ent_ids, rel_ids) for s in SPLITS]
    graph = KnowledgeGraph(entities, relations, *splits)
    logger.info("loaded %s: %d entities, %d relations, %d/%d/%d triples", directory, *graph.counts())
    return graph


def save_dataset(graph: KnowledgeGraph, directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fname, names in (("entities.dict", graph.entity_names), ("relations.dict", graph.relation_names)):
        with open(directory / fname, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(f"{i}\t{name}\n" for i, name in enumerate(names))
    for split in SPLITS:
        with open(directory / f"{split}.txt", "w", encoding="utf-8", newline="\n") as f:
            for h, r, t in graph.split(split).tolist():
                f.write(f"{graph.entity_names[h]}\t{graph.relation_names[r]}\t{graph.entity_names[t]}\n")
    return directory


class RelationCategory(str, enum.Enum):
    ONE_TO_ONE = "1-to-1"
    ONE_TO_N = "1-to-N"
    N_TO_ONE = "N-to-1"
    N_TO_N = "N-to-N"


@dataclass(frozen=True)
class CategoryInfo:
    category: RelationCategory
    tph: float
    hpt: float


CATEGORY_THRESHOLD = 1.5


def categorize(tph: float, hpt: float, threshold: float = CATEGORY_THRESHOLD) -> RelationCategory:
    # many heads per tail with few tails per head is labelled 1-to-N, as in the
    # footnote naming this package follows; the unnamed quadrant becomes N-to-1
    if tph < threshold and hpt < threshold:
        return RelationCategory.ONE_TO_ONE
    if tph >= threshold and hpt >= threshold:
        return RelationCategory.N_TO_N
    if tph < threshold:
        return RelationCategory.ONE_TO_N
    return RelationCategory.N_TO_ONE


def relation_categories(graph: KnowledgeGraph, split: str = "train") -> dict[int, CategoryInfo]:
    """Mean tails-per-head / heads-per-tail and the resulting category of each relation.

    Only relations that occur in ``split`` are returned.
    """
    triples = unique_triples(graph.split(split))
    if len(triples) == 0:
        raise EmptySplit(split)
    out: dict[int, CategoryInfo] = {}
    for r in np.unique(triples[:, 1]).tolist():
        pairs = triples[triples[:, 1] == r]
        n_pairs = len(pairs)
        tph = n_pairs / len(np.unique(pairs[:, 0]))
        hpt = n_pairs / len(np.unique(pairs[:, 2]))
        out[r] = CategoryInfo(categorize(tph, hpt), tph, hpt)
    return out


def category_counts(categories: Mapping[int, CategoryInfo]) -> dict[RelationCategory, int]:
    counts = {c: 0 for c in RelationCategory}
    for info in categories.values():
        counts[info.category] += 1
    return counts

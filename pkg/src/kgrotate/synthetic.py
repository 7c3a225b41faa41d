"""Synthetic knowledge graphs with known relation structure.

``countries_like`` builds a geography with the same schema and task
construction as the Countries benchmark (``locatedIn`` / ``neighborOf``; tasks
S1-S3 remove progressively more ``locatedIn`` facts around held-out
countries).  ``pattern_graph`` places entities on a discrete torus and defines
relations as translations, so symmetric, inverse and composed relations hold
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .data import KnowledgeGraph, as_triples

LOCATED_IN = "locatedIn"
NEIGHBOR_OF = "neighborOf"


@dataclass(frozen=True)
class Geography:
    country_subregion: np.ndarray
    subregion_region: np.ndarray
    borders: list[tuple[int, int]]
    positions: np.ndarray

    @property
    def country_region(self) -> np.ndarray:
        return self.subregion_region[self.country_subregion]

    def neighbors(self, country: int) -> list[int]:
        return sorted({b for a, b in self.borders if a == country} | {a for a, b in self.borders if b == country})


def make_geography(
    rng: np.random.Generator,
    n_countries: int = 244,
    n_subregions: int = 23,
    n_regions: int = 5,
    island_fraction: float = 0.15,
) -> Geography:
    """Countries scattered around subregion centres, bordered via a Delaunay mesh."""
    region_angle = np.linspace(0, 2 * np.pi, n_regions, endpoint=False)
    region_centre = 10.0 * np.stack([np.cos(region_angle), np.sin(region_angle)], 1)
    # every region receives at least one subregion
    subregion_region = np.r_[np.arange(n_regions), rng.integers(n_regions, size=n_subregions - n_regions)]
    subregion_region.sort()
    subregion_centre = region_centre[subregion_region] + rng.normal(scale=2.5, size=(n_subregions, 2))
    country_subregion = np.r_[np.arange(n_subregions), rng.integers(n_subregions, size=n_countries - n_subregions)]
    rng.shuffle(country_subregion)
    positions = subregion_centre[country_subregion] + rng.normal(scale=1.0, size=(n_countries, 2))

    tri = Delaunay(positions)
    edges = set()
    for simplex in tri.simplices:
        for i in range(3):
            a, b = sorted((int(simplex[i]), int(simplex[(i + 1) % 3])))
            edges.add((a, b))
    lengths = {e: np.linalg.norm(positions[e[0]] - positions[e[1]]) for e in edges}
    cutoff = np.quantile(list(lengths.values()), 0.8)
    islands = set(rng.choice(n_countries, size=int(island_fraction * n_countries), replace=False).tolist())
    borders = sorted(
        e for e in edges if lengths[e] <= cutoff and e[0] not in islands and e[1] not in islands
    )
    return Geography(country_subregion, subregion_region, borders, positions)


def countries_like(
    seed: int = 0,
    n_countries: int = 244,
    n_subregions: int = 23,
    n_regions: int = 5,
    n_test: int = 24,
    n_valid: int = 24,
) -> dict[str, KnowledgeGraph]:
    """Tasks ``S1``, ``S2`` and ``S3`` over one random geography.

    Held-out (valid/test) countries each border at least one training country.
    S1 drops their ``locatedIn(c, region)``; S2 also drops
    ``locatedIn(c, subregion)``; S3 also drops ``locatedIn(n, region)`` for every
    neighbour ``n`` of a held-out country.
    """
    rng = np.random.default_rng(seed)
    geo = make_geography(rng, n_countries, n_subregions, n_regions)
    countries = [f"country_{i:03d}" for i in range(n_countries)]
    subregions = [f"subregion_{i:02d}" for i in range(n_subregions)]
    regions = [f"region_{i}" for i in range(n_regions)]
    entities = countries + subregions + regions
    sub_id = {i: n_countries + i for i in range(n_subregions)}
    reg_id = {i: n_countries + n_subregions + i for i in range(n_regions)}
    located, neighbor = 0, 1

    candidates = [c for c in range(n_countries) if geo.neighbors(c)]
    order = rng.permutation(candidates).tolist()
    held: list[int] = []
    for c in order:
        if len(held) == n_test + n_valid:
            break
        trial = set(held) | {c}
        # every held-out country keeps a training neighbour
        if all(any(n not in trial for n in geo.neighbors(x)) for x in trial):
            held.append(c)
    if len(held) < n_test + n_valid:
        raise RuntimeError("geography too sparse to choose held-out countries")
    test, valid = sorted(held[:n_test]), sorted(held[n_test:])
    held_set = set(held)

    region_of = geo.country_region
    base = []
    for c in range(n_countries):
        base.append((c, located, sub_id[int(geo.country_subregion[c])]))
        base.append((c, located, reg_id[int(region_of[c])]))
    for s in range(n_subregions):
        base.append((sub_id[s], located, reg_id[int(geo.subregion_region[s])]))
    for a, b in geo.borders:
        base.append((a, neighbor, b))
        base.append((b, neighbor, a))

    def queries(cs):
        return as_triples([(c, located, reg_id[int(region_of[c])]) for c in cs])

    held_neighbors = {n for c in held for n in geo.neighbors(c)} - held_set
    drop_s1 = {(c, located, reg_id[int(region_of[c])]) for c in held}
    drop_s2 = drop_s1 | {(c, located, sub_id[int(geo.country_subregion[c])]) for c in held}
    drop_s3 = drop_s2 | {(n, located, reg_id[int(region_of[n])]) for n in held_neighbors}
    tasks = {}
    for name, drop in (("S1", drop_s1), ("S2", drop_s2), ("S3", drop_s3)):
        train = as_triples([t for t in base if t not in drop])
        tasks[name] = KnowledgeGraph(list(entities), [LOCATED_IN, NEIGHBOR_OF], train, queries(valid), queries(test))
    return tasks


@dataclass(frozen=True)
class PatternSpec:
    """Names of the relations carrying each pattern in :func:`pattern_graph`."""

    symmetric: str = "symmetric"
    inverse: tuple[str, str] = ("inverse_a", "inverse_b")
    composition: tuple[str, str, str] = ("composed", "step_a", "step_b")
    distractors: tuple[str, ...] = ("distractor", "shift")


# translations on the torus Z_20 x Z_25; composed = step_a + step_b, the
# symmetric shift has order two and the inverse pair cancel
_GRID = (20, 25)
_SHIFTS = {
    "symmetric": (10, 0),
    "inverse_a": (3, 4),
    "inverse_b": (-3, -4),
    "step_a": (1, 0),
    "step_b": (0, 1),
    "composed": (1, 1),
    "distractor": (7, 9),
    "shift": (2, 11),
}


def pattern_graph(seed: int = 0, holdout: float = 0.2, noise_triples: int = 0) -> tuple[KnowledgeGraph, PatternSpec]:
    """500 entities on a 20x25 torus; every relation is a fixed translation.

    Each relation has one triple per entity (500).  The pattern relations stay
    whole in the training split so that every pattern keeps all of its
    supporting triples.  A ``holdout`` fraction of the distractor triples is
    split evenly into valid and test.  ``noise_triples`` random facts of an
    extra ``random`` relation can be added to the training split.
    """
    rng = np.random.default_rng(seed)
    rows, cols = _GRID
    n = rows * cols
    coords = np.stack(np.divmod(np.arange(n), cols), 1)
    relations = list(_SHIFTS)
    spec = PatternSpec()
    triples = []
    for r, name in enumerate(relations):
        dr, dc = _SHIFTS[name]
        tail = ((coords[:, 0] + dr) % rows) * cols + (coords[:, 1] + dc) % cols
        triples.append(np.stack([np.arange(n), np.full(n, r), tail], 1))
    triples = np.concatenate(triples)
    distractor_ids = [relations.index(d) for d in spec.distractors]
    pool = triples[np.isin(triples[:, 1], distractor_ids)]
    perm = rng.permutation(len(pool))
    n_hold = int(round(holdout * len(pool)))
    valid = pool[np.sort(perm[: n_hold // 2])]
    test = pool[np.sort(perm[n_hold // 2: n_hold])]
    held = {tuple(t) for t in pool[perm[:n_hold]].tolist()}
    train = np.array([t for t in triples.tolist() if tuple(t) not in held], dtype=np.int64).reshape(-1, 3)
    if noise_triples:
        relations.append("random")
        pairs = rng.integers(n, size=(noise_triples, 2))
        noise = np.stack([pairs[:, 0], np.full(noise_triples, len(relations) - 1), pairs[:, 1]], 1)
        train = np.unique(np.concatenate([train, noise]), axis=0)
    entities = [f"e{r:02d}_{c:02d}" for r, c in coords.tolist()]
    return KnowledgeGraph(entities, relations, train, valid, test), spec

"""Relation-phase analysis: symmetry, inversion and composition residuals.

Residuals are mean circular distances (radians) over embedding dimensions:

* symmetry     - distance of each phase to the nearest of {0, pi}
* inversion    - distance of ``theta1 + theta2`` to 0
* composition  - distance of ``theta2 + theta3 - theta1`` to 0
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionMismatch, WrongModelKind
from .scoring import TWO_PI, EmbeddingTable, ModelKind, circular_distance, wrap_phase

DEFAULT_BINS = 60


@dataclass(frozen=True)
class PhaseProfile:
    relation: int
    theta: np.ndarray

    def histogram(self, bins: int = DEFAULT_BINS) -> tuple[np.ndarray, np.ndarray]:
        """Counts over ``bins`` equal bins of ``[0, 2pi)`` and the bin edges."""
        if bins < 2:
            raise ValueError("bins must be >= 2")
        idx = np.minimum((self.theta / TWO_PI * bins).astype(np.int64), bins - 1)
        return np.bincount(idx, minlength=bins), np.linspace(0.0, TWO_PI, bins + 1)

    def conjugate(self) -> "PhaseProfile":
        return PhaseProfile(self.relation, wrap_phase(-self.theta))


def relation_phases(table: EmbeddingTable, relation: int) -> PhaseProfile:
    if table.kind not in (ModelKind.ROTATE, ModelKind.PROTATE):
        raise WrongModelKind(f"phase analysis needs rotate or protate, got {table.kind.value}")
    theta = np.asarray(table.relation["phase"][relation], dtype=np.float64)
    return PhaseProfile(int(relation), wrap_phase(theta))


def profile_from_phases(theta, relation: int = -1) -> PhaseProfile:
    return PhaseProfile(relation, wrap_phase(np.asarray(theta, dtype=np.float64)))


def _same_dim(*profiles: PhaseProfile) -> None:
    if len({p.theta.shape for p in profiles}) != 1:
        raise DimensionMismatch("phase profiles differ in dimension")


def symmetry_residual(profile: PhaseProfile) -> float:
    d = np.minimum(circular_distance(profile.theta, 0.0), circular_distance(profile.theta, np.pi))
    return float(d.mean())


def inversion_residual(p1: PhaseProfile, p2: PhaseProfile) -> float:
    _same_dim(p1, p2)
    return float(circular_distance(p1.theta + p2.theta, 0.0).mean())


def composition_residual(p1: PhaseProfile, p2: PhaseProfile, p3: PhaseProfile) -> float:
    """How far ``p1`` is from the rotation ``p2`` followed by ``p3``."""
    _same_dim(p1, p2, p3)
    return float(circular_distance(p2.theta + p3.theta - p1.theta, 0.0).mean())


def export_histogram(profile: PhaseProfile, bins: int, path: str | os.PathLike) -> None:
    counts, edges = profile.histogram(bins)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([f"{lo:.12g}", f"{hi:.12g}", int(c)])


def pattern_report(
    table: EmbeddingTable,
    relation_names: Sequence[str],
    inverse_pairs: Iterable[tuple[int, int]] = (),
    compositions: Iterable[tuple[int, int, int]] = (),
) -> dict:
    """JSON-ready residuals: symmetry for every relation plus the requested pairs and triples."""
    profiles = [relation_phases(table, r) for r in range(table.num_relations)]
    report = {
        "symmetry": {relation_names[p.relation]: symmetry_residual(p) for p in profiles},
        "inversion": [
            {"relations": [relation_names[a], relation_names[b]], "residual": inversion_residual(profiles[a], profiles[b])}
            for a, b in inverse_pairs
        ],
        "composition": [
            {
                "relations": [relation_names[a], relation_names[b], relation_names[c]],
                "residual": composition_residual(profiles[a], profiles[b], profiles[c]),
            }
            for a, b, c in compositions
        ],
    }
    return report


def write_pattern_report(report: dict, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)

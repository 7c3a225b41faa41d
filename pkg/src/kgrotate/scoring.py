"""Score and distance functions for RotatE, pRotatE, TransE, DistMult and ComplEx.

Two layers live here.  The raw functions (``rotate_distance``, ``complex_score``
...) take plain numpy vectors and are what the identity checks and tests call.
The :class:`ScoringModel` subclasses work on the planar parameter layout used by
:class:`EmbeddingTable` (separate real/imaginary arrays, relation phases in
radians), broadcast over leading axes, and return analytic gradients for
training.

Every model reports a *score* ``f`` where higher means more plausible; for
distance models ``f = -d``.  All distances use the L1 norm over complex moduli.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .exceptions import DimensionMismatch, IdOutOfRange, NegativeModulus

TWO_PI = 2.0 * np.pi


class ModelKind(str, enum.Enum):
    ROTATE = "rotate"
    PROTATE = "protate"
    TRANSE = "transe"
    DISTMULT = "distmult"
    COMPLEX = "complex"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model {value!r}; expected one of {[m.value for m in cls]}") from None


def wrap_phase(theta):
    """Reduce phases into ``[0, 2pi)``."""
    out = np.mod(theta, TWO_PI)
    # mod can round up to exactly 2pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def circular_distance(theta, phi=0.0):
    """Shortest arc length between two angles, in ``[0, pi]``."""
    d = np.mod(np.abs(np.asarray(theta) - np.asarray(phi)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def _check_dims(*arrays) -> None:
    dims = {np.shape(a)[-1] if np.ndim(a) else 1 for a in arrays}
    if len(dims) != 1:
        raise DimensionMismatch(f"vectors have mismatched dimensions {sorted(dims)}")


# --------------------------------------------------------------------------
# raw functions on plain vectors
# --------------------------------------------------------------------------


def rotate_distance(h, theta_r, t) -> float:
    """``sum_i |h_i * exp(i theta_r_i) - t_i|`` for complex ``h``, ``t``."""
    h = np.asarray(h, dtype=complex)
    t = np.asarray(t, dtype=complex)
    theta_r = np.asarray(theta_r, dtype=float)
    _check_dims(h, theta_r, t)
    return np.abs(h * np.exp(1j * theta_r) - t).sum(axis=-1)


def rotate_distance_polar(m_h, theta_h, m_t, theta_t, theta_r) -> float:
    """RotatE distance written with entity moduli and phases."""
    m_h, theta_h, m_t, theta_t, theta_r = (
        np.asarray(a, dtype=float) for a in (m_h, theta_h, m_t, theta_t, theta_r)
    )
    _check_dims(m_h, theta_h, m_t, theta_t, theta_r)
    if np.any(m_h < 0) or np.any(m_t < 0):
        raise NegativeModulus("moduli must be non-negative")
    s = np.sin((theta_h + theta_r - theta_t) / 2.0)
    return np.sqrt((m_h - m_t) ** 2 + 4.0 * m_h * m_t * s * s).sum(axis=-1)


def protate_distance(theta_h, theta_r, theta_t, modulus: float = 1.0) -> float:
    """Phase-only RotatE: every entity component has modulus ``modulus``."""
    theta_h, theta_r, theta_t = (np.asarray(a, dtype=float) for a in (theta_h, theta_r, theta_t))
    _check_dims(theta_h, theta_r, theta_t)
    return 2.0 * modulus * np.abs(np.sin((theta_h + theta_r - theta_t) / 2.0)).sum(axis=-1)


def transe_distance(h, r, t) -> float:
    h, r, t = (np.asarray(a, dtype=float) for a in (h, r, t))
    _check_dims(h, r, t)
    return np.abs(h + r - t).sum(axis=-1)


def distmult_score(h, r, t) -> float:
    h, r, t = (np.asarray(a, dtype=float) for a in (h, r, t))
    _check_dims(h, r, t)
    return (h * r * t).sum(axis=-1)


def complex_score(h, r, t) -> float:
    h, r, t = (np.asarray(a, dtype=complex) for a in (h, r, t))
    _check_dims(h, r, t)
    return np.real(r * h * np.conj(t)).sum(axis=-1)


def inverse_relation_check(h, t, theta_r) -> tuple[float, float]:
    """Distance of ``(h, r, t)`` and of ``(t, conj(r), h)``; equal for unit-modulus ``r``."""
    theta_r = np.asarray(theta_r, dtype=float)
    forward = rotate_distance(h, theta_r, t)
    backward = rotate_distance(t, wrap_phase(-theta_r), h)
    return float(forward), float(backward)


def transe_degeneration_error(h, r, t, c: float) -> float:
    """Gap between pRotatE on scaled phases and TransE on the originals.

    Phases are ``c * x`` with modulus ``1 / c``; the gap vanishes as ``c -> 0``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    h, r, t = (np.asarray(a, dtype=float) for a in (h, r, t))
    # phases are deliberately not wrapped: sin(x/2) changes sign across 2pi
    p = protate_distance(c * h, c * r, c * t, modulus=1.0 / c)
    return float(abs(p - transe_distance(h, r, t)))


# --------------------------------------------------------------------------
# planar-layout scoring models with analytic gradients
# --------------------------------------------------------------------------


def _safe_div(num, den):
    out = np.zeros(np.broadcast_shapes(np.shape(num), np.shape(den)), dtype=np.result_type(num, den))
    return np.divide(num, den, out=out, where=den > 0)


class ScoringModel:
    """Score function over planar parameter parts.

    ``h``, ``r`` and ``t`` are tuples of arrays (one per part), broadcastable
    against each other with the embedding axis last.
    """

    kind: ClassVar[ModelKind]
    entity_parts: ClassVar[tuple[str, ...]]
    relation_parts: ClassVar[tuple[str, ...]]
    entity_phase: ClassVar[bool] = False
    relation_phase: ClassVar[bool] = False
    is_distance: ClassVar[bool] = True

    def __init__(self, modulus: float = 1.0):
        self.modulus = float(modulus)

    def score(self, h, r, t):
        return self.vjp(h, r, t)[0]

    def vjp(self, h, r, t):
        """Return ``(f, backward)``.

        ``backward(upstream)`` gives the gradients ``(gh, gr, gt)`` of
        ``sum(upstream * f)``, each a tuple of arrays at the broadcast shape.
        """
        raise NotImplementedError


class RotatE(ScoringModel):
    kind = ModelKind.ROTATE
    entity_parts = ("re", "im")
    relation_parts = ("phase",)
    relation_phase = True

    def score(self, h, r, t):
        (hr, hi), (theta,), (tr, ti) = h, r, t
        cos, sin = np.cos(theta), np.sin(theta)
        a = hr * cos - hi * sin - tr
        b = hr * sin + hi * cos - ti
        return -np.sqrt(a * a + b * b).sum(axis=-1)

    def vjp(self, h, r, t):
        (hr, hi), (theta,), (tr, ti) = h, r, t
        cos, sin = np.cos(theta), np.sin(theta)
        rot_re = hr * cos - hi * sin
        rot_im = hr * sin + hi * cos
        a = rot_re - tr
        b = rot_im - ti
        mod = np.sqrt(a * a + b * b)
        f = -mod.sum(axis=-1)

        def backward(upstream):
            w = -np.asarray(upstream, dtype=mod.dtype)[..., None]
            ga = _safe_div(a, mod) * w
            gb = _safe_div(b, mod) * w
            gh = (ga * cos + gb * sin, gb * cos - ga * sin)
            gr = (gb * rot_re - ga * rot_im,)
            return gh, gr, (-ga, -gb)

        return f, backward


class PRotatE(ScoringModel):
    kind = ModelKind.PROTATE
    entity_parts = ("phase",)
    relation_parts = ("phase",)
    entity_phase = True
    relation_phase = True

    def vjp(self, h, r, t):
        half = (h[0] + r[0] - t[0]) / 2.0
        half_sin = np.sin(half)
        f = -2.0 * self.modulus * np.abs(half_sin).sum(axis=-1)

        def backward(upstream):
            w = -np.asarray(upstream, dtype=half.dtype)[..., None]
            g = w * self.modulus * np.sign(half_sin) * np.cos(half)
            return (g,), (g,), (-g,)

        return f, backward


class TransE(ScoringModel):
    kind = ModelKind.TRANSE
    entity_parts = ("vec",)
    relation_parts = ("vec",)

    def vjp(self, h, r, t):
        diff = h[0] + r[0] - t[0]
        f = -np.abs(diff).sum(axis=-1)

        def backward(upstream):
            g = -np.asarray(upstream, dtype=diff.dtype)[..., None] * np.sign(diff)
            return (g,), (g,), (-g,)

        return f, backward


class DistMult(ScoringModel):
    kind = ModelKind.DISTMULT
    entity_parts = ("vec",)
    relation_parts = ("vec",)
    is_distance = False

    def vjp(self, h, r, t):
        (hv,), (rv,), (tv,) = h, r, t
        f = (hv * rv * tv).sum(axis=-1)

        def backward(upstream):
            w = np.asarray(upstream, dtype=f.dtype)[..., None]
            return (w * rv * tv,), (w * hv * tv,), (w * hv * rv,)

        return f, backward


class ComplEx(ScoringModel):
    kind = ModelKind.COMPLEX
    entity_parts = ("re", "im")
    relation_parts = ("re", "im")
    is_distance = False

    def vjp(self, h, r, t):
        (hr, hi), (rr, ri), (tr, ti) = h, r, t
        rh_re = rr * hr - ri * hi
        rh_im = rr * hi + ri * hr
        f = (rh_re * tr + rh_im * ti).sum(axis=-1)

        def backward(upstream):
            w = np.asarray(upstream, dtype=f.dtype)[..., None]
            gh = (w * (rr * tr + ri * ti), w * (rr * ti - ri * tr))
            gr = (w * (hr * tr + hi * ti), w * (hr * ti - hi * tr))
            return gh, gr, (w * rh_re, w * rh_im)

        return f, backward


MODELS: dict[ModelKind, type[ScoringModel]] = {
    cls.kind: cls for cls in (RotatE, PRotatE, TransE, DistMult, ComplEx)
}


def get_model(kind, modulus: float = 1.0) -> ScoringModel:
    return MODELS[ModelKind.parse(kind)](modulus=modulus)


@dataclass
class EmbeddingTable:
    """Parameter store for one model.

    ``entity`` and ``relation`` map part names (see ``ScoringModel.entity_parts``)
    to ``(num_rows, k)`` arrays.  Phase parts are kept in ``[0, 2pi)``.
    """

    kind: ModelKind
    entity: dict[str, np.ndarray]
    relation: dict[str, np.ndarray]
    modulus: float = 1.0
    model: ScoringModel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.kind = ModelKind.parse(self.kind)
        if self.modulus <= 0:
            raise ValueError("modulus must be positive")
        self.model = get_model(self.kind, self.modulus)
        if set(self.entity) != set(self.model.entity_parts) or set(self.relation) != set(self.model.relation_parts):
            raise ValueError(f"parameter parts do not match model {self.kind.value}")
        shapes = {a.shape[1] for a in (*self.entity.values(), *self.relation.values())}
        if len(shapes) != 1:
            raise DimensionMismatch("all parameter rows must share dimension k")

    @property
    def dim(self) -> int:
        return next(iter(self.entity.values())).shape[1]

    @property
    def num_entities(self) -> int:
        return next(iter(self.entity.values())).shape[0]

    @property
    def num_relations(self) -> int:
        return next(iter(self.relation.values())).shape[0]

    @property
    def dtype(self):
        return next(iter(self.entity.values())).dtype

    def parameters(self) -> dict[str, np.ndarray]:
        """Flat ``{"entity.re": array, ...}`` view in a fixed order."""
        out = {f"entity.{p}": self.entity[p] for p in self.model.entity_parts}
        out.update({f"relation.{p}": self.relation[p] for p in self.model.relation_parts})
        return out

    def phase_keys(self) -> set[str]:
        keys = set()
        if self.model.entity_phase:
            keys.add("entity.phase")
        if self.model.relation_phase:
            keys.add("relation.phase")
        return keys

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.kind,
            {k: v.copy() for k, v in self.entity.items()},
            {k: v.copy() for k, v in self.relation.items()},
            self.modulus,
        )

    def astype(self, dtype) -> "EmbeddingTable":
        return EmbeddingTable(
            self.kind,
            {k: v.astype(dtype) for k, v in self.entity.items()},
            {k: v.astype(dtype) for k, v in self.relation.items()},
            self.modulus,
        )

    def entities(self, idx) -> tuple[np.ndarray, ...]:
        return tuple(self.entity[p][idx] for p in self.model.entity_parts)

    def relations(self, idx) -> tuple[np.ndarray, ...]:
        return tuple(self.relation[p][idx] for p in self.model.relation_parts)

    def check_ids(self, triples: np.ndarray) -> None:
        triples = np.asarray(triples)
        if triples.size == 0:
            return
        if (
            triples.min() < 0
            or triples[..., [0, 2]].max() >= self.num_entities
            or triples[..., 1].max() >= self.num_relations
        ):
            raise IdOutOfRange("triple ids outside the embedding table")

    def score_triples(self, triples) -> np.ndarray:
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        self.check_ids(triples)
        return self.model.score(
            self.entities(triples[:, 0]), self.relations(triples[:, 1]), self.entities(triples[:, 2])
        )

    def score_tails(self, head: int, relation: int) -> np.ndarray:
        """Scores of ``(head, relation, e)`` for every entity ``e``."""
        h = self.entities(np.array([head]))
        r = self.relations(np.array([relation]))
        return self.model.score(h, r, self.entities(slice(None)))

    def score_heads(self, relation: int, tail: int) -> np.ndarray:
        """Scores of ``(e, relation, tail)`` for every entity ``e``."""
        h = self.entities(slice(None))
        r = self.relations(np.array([relation]))
        t = self.entities(np.array([tail]))
        return self.model.score(h, r, t)

    # dense complex views, convenient for analysis and tests

    def entity_complex(self) -> np.ndarray:
        if self.kind in (ModelKind.ROTATE, ModelKind.COMPLEX):
            return self.entity["re"] + 1j * self.entity["im"]
        if self.kind is ModelKind.PROTATE:
            return self.modulus * np.exp(1j * self.entity["phase"])
        raise TypeError(f"{self.kind.value} entities are real-valued")

    def relation_phases(self) -> np.ndarray:
        if "phase" in self.relation:
            return self.relation["phase"]
        if self.kind is ModelKind.COMPLEX:
            return wrap_phase(np.arctan2(self.relation["im"], self.relation["re"]))
        raise TypeError(f"{self.kind.value} relations carry no phase")


def score(table: EmbeddingTable, triple) -> float:
    """Plausibility of a single triple (negated distance for distance models)."""
    return float(table.score_triples(np.asarray(triple).reshape(1, 3))[0])

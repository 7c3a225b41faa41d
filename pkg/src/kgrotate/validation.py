"""Input validation helpers in the style of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import IdOutOfRange


def check_triples(X, n_entities: int | None = None, n_relations: int | None = None, allow_empty: bool = False) -> np.ndarray:
    """Validate an ``(N, 3)`` array of integer ``(head, relation, tail)`` ids."""
    arr = np.asarray(X)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected triples of shape (N, 3), got {arr.shape}")
    if arr.size == 0:
        if not allow_empty:
            raise ValueError("empty triple array")
        return np.zeros((0, 3), dtype=np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("triple ids must be integers")
    arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise IdOutOfRange("negative id in triples")
    if n_entities is not None and arr[:, [0, 2]].max() >= n_entities:
        raise IdOutOfRange(f"entity id >= {n_entities}")
    if n_relations is not None and arr[:, 1].max() >= n_relations:
        raise IdOutOfRange(f"relation id >= {n_relations}")
    return arr

"""Bias-corrected Adam over a dict of named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import ShapeMismatch
from .scoring import wrap_phase


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray], **kwargs) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    phase_keys=(),
    lr_scale: Mapping[str, float] | None = None,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One Adam update, in place.

    Parameters named in ``phase_keys`` are wrapped back into ``[0, 2pi)``.
    ``lr_scale`` optionally multiplies the step size per parameter.
    """
    if not state.m:
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape or state.m[key].shape != p.shape:
            raise ShapeMismatch(f"{key}: parameter {p.shape}, gradient {g.shape}, state {state.m[key].shape}")

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for key, p in params.items():
        g = grads[key]
        m, v = state.m[key], state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        step_size = lr * (lr_scale.get(key, 1.0) if lr_scale else 1.0) / bc1
        denom = np.sqrt(v / bc2) + state.eps
        p -= (step_size * m / denom).astype(p.dtype, copy=False)
        if key in phase_keys:
            p[...] = wrap_phase(p)
    return params, state

"""AdamW with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .tensor import Tensor


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 3e-4
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper) -> "AdamWState":
        return cls(**hyper, m=[np.zeros(p.shape) for p in params], v=[np.zeros(p.shape) for p in params])


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> list[np.ndarray]:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if max_norm <= 0 or total <= max_norm:
        return list(grads)
    scale = max_norm / (total + 1e-12)
    return [g * scale for g in grads]


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamWState,
) -> tuple[Sequence[Tensor], AdamWState]:
    """One in-place update: ``p -= lr*wd*p`` then the bias-corrected Adam step."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(f"{len(params)} params, {len(grads)} grads, {len(state.m)} moment slots")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape}, grad {g.shape}, moment {state.m[i].shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        if state.weight_decay:
            p.data *= 1.0 - state.lr * state.weight_decay
        p.data -= state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
    return params, state

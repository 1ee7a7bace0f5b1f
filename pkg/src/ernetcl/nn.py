"""Stateless building blocks shared by both encoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import tensor as T
from .errors import RangeError, ShapeError
from .tensor import Tensor, _result

TRAIN = "train"
EVAL = "eval"


@dataclass
class AffineParams:
    weight: Tensor  # [out_dim, in_dim]
    bias: Tensor  # [out_dim]

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"affine weight {self.weight.shape} and bias {self.bias.shape} disagree")

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "AffineParams":
        w = T.alloc((out_dim, in_dim), "scaled_uniform", rng, fan_in=in_dim, requires_grad=True)
        return cls(w, T.alloc((out_dim,), "zeros", requires_grad=True))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class NormParams:
    gain: Tensor
    bias: Tensor
    eps: float = 1e-5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"layer norm eps must be positive, got {self.eps}")
        if self.gain.shape != self.bias.shape or self.gain.ndim != 1:
            raise ShapeError(f"norm gain {self.gain.shape} and bias {self.bias.shape} disagree")

    @classmethod
    def init(cls, dim: int, eps: float = 1e-5) -> "NormParams":
        return cls(T.alloc((dim,), "ones", requires_grad=True), T.alloc((dim,), "zeros", requires_grad=True), eps)


def lengths_to_mask(lengths, max_len: int) -> np.ndarray:
    """Boolean ``[B, max_len]`` mask with ``lengths[i]`` leading True entries."""
    lengths = np.atleast_1d(np.asarray(lengths, dtype=int))
    return np.arange(max_len)[None, :] < lengths[:, None]


def mask_rows(x: Tensor, mask: np.ndarray) -> Tensor:
    """Zero the rows of ``x`` (shape ``[..., L, d]``) where ``mask`` (``[..., L]``) is False."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:-1]:
        raise ShapeError(f"row mask {mask.shape} does not fit tensor {x.shape}")
    if mask.all():
        return x
    return T.mul(x, Tensor(np.broadcast_to(mask[..., None], x.shape).astype(np.float64)))


def matvec(x: Tensor, weight: Tensor) -> Tensor:
    """``x @ weight.T`` along the trailing axis; ``x`` may be a single vector."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"trailing extent of {x.shape} does not match weight {weight.shape}")
    if x.ndim == 1:
        return T.reshape(T.matmul(T.reshape(x, (1, -1)), T.transpose(weight)), (weight.shape[0],))
    return T.matmul(x, T.transpose(weight))


def linear(x: Tensor, p: AffineParams) -> Tensor:
    return T.add(matvec(x, p.weight), p.bias)


def layer_norm(x: Tensor, p: NormParams) -> Tensor:
    """Standardize each trailing vector (population variance), then scale and shift."""
    d = x.shape[-1]
    if p.gain.shape != (d,):
        raise ShapeError(f"layer_norm: input {x.shape} vs gain {p.gain.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + p.eps)
    xhat = centered * inv_std
    out = xhat * p.gain.data + p.bias.data

    def bw(g):
        gx = g * p.gain.data
        dx = inv_std * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(out, (x, p.gain, p.bias), bw, "layer_norm")


def dropout(
    x: Tensor,
    rate: float,
    mode: str = EVAL,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Inverted dropout. Eval mode returns ``x`` itself.

    A precomputed keep-``mask`` may be passed to freeze the draw.
    """
    if not 0.0 <= rate < 1.0:
        raise RangeError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode == EVAL or rate == 0.0:
        return x
    if mode != TRAIN:
        raise ValueError(f"unknown mode {mode!r}")
    if mask is None:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        mask = rng.random(x.shape) >= rate
    scale = np.where(mask, 1.0 / (1.0 - rate), 0.0)
    return T.mul(x, Tensor(scale))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _result(s, (x,), bw, "softmax")


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return _result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _result(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")

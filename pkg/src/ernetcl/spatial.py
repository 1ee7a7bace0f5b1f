"""Spatial encoder: every utterance attends to every valid utterance of its
own conversation through multi-head self-attention. No positional encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from . import tensor as T
from .errors import ConfigError, EmptyError, ShapeError
from .nn import AffineParams, NormParams
from .tensor import Tensor

MASK_VALUE = -1e9


@dataclass
class MhaParams:
    """Per-head projections stacked row-wise: rows ``i*d_k:(i+1)*d_k`` of
    ``query`` are head ``i``'s ``[d_k, d]`` query map (same for key/value).
    Q/K/V carry no bias; the output map does."""

    query: Tensor  # [H*d_k, d]
    key: Tensor
    value: Tensor
    out: AffineParams  # [d, H*d_k]
    heads: int

    def __post_init__(self):
        d = self.query.shape[1]
        if self.heads < 1 or d % self.heads:
            raise ConfigError(f"{self.heads} heads do not divide model dim {d}")
        for w in (self.query, self.key, self.value):
            if w.shape != (d, d):
                raise ShapeError(f"projection shape {w.shape}, expected {(d, d)}")
        if (self.out.out_dim, self.out.in_dim) != (d, d):
            raise ShapeError(f"output projection {self.out.weight.shape}, expected {(d, d)}")

    @property
    def d_k(self) -> int:
        return self.query.shape[1] // self.heads

    @classmethod
    def init(cls, dim: int, heads: int, rng: np.random.Generator) -> "MhaParams":
        if heads < 1 or dim % heads:
            raise ConfigError(f"{heads} heads do not divide model dim {dim}")
        q, k, v = (T.alloc((dim, dim), "scaled_uniform", rng, fan_in=dim, requires_grad=True) for _ in range(3))
        return cls(q, k, v, AffineParams.init(dim, dim, rng), heads)


@dataclass
class SeLayerParams:
    mha: MhaParams
    norm: NormParams
    dropout_rate: float = 0.0

    @classmethod
    def init(cls, dim: int, heads: int, rng: np.random.Generator, dropout_rate: float = 0.0) -> "SeLayerParams":
        return cls(MhaParams.init(dim, heads, rng), NormParams.init(dim), dropout_rate)


def _key_mask(mask, shape: tuple) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape[:-1]:
        raise ShapeError(f"mask {mask.shape} does not fit input {shape}")
    if not mask.any(axis=-1).all():
        raise EmptyError("attention needs at least one valid position per sequence")
    return mask


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask) -> Tensor:
    """``softmax(q k^T / sqrt(d_k)) v`` with masked keys excluded.

    Shapes are ``[..., L, d_k]``; ``mask`` is ``[..., L]`` and marks valid keys.
    """
    if q.shape != k.shape or k.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"attention shapes q {q.shape}, k {k.shape}, v {v.shape} disagree")
    mask = _key_mask(mask, k.shape)
    scores = T.mul(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(q.shape[-1]))
    # mask broadcast over the query axis: [..., 1, L]
    scores = T.masked_fill(scores, ~mask[..., None, :], MASK_VALUE)
    return T.matmul(nn.softmax(scores, axis=-1), v)


def attention_weights(q: np.ndarray, k: np.ndarray, mask) -> np.ndarray:
    """Attention weight matrix for inspection, no graph."""
    with T.no_grad():
        scores = T.Tensor(q @ np.swapaxes(k, -1, -2) / math.sqrt(q.shape[-1]))
        scores = T.masked_fill(scores, ~np.asarray(mask, dtype=bool)[..., None, :], MASK_VALUE)
        return nn.softmax(scores).data


def multi_head_attention(x: Tensor, mask, p: MhaParams) -> Tensor:
    d = x.shape[-1]
    if d != p.query.shape[1]:
        raise ShapeError(f"input dim {d} vs attention dim {p.query.shape[1]}")
    q_all, k_all, v_all = nn.matvec(x, p.query), nn.matvec(x, p.key), nn.matvec(x, p.value)
    dk = p.d_k
    heads = []
    for i in range(p.heads):
        lo, hi = i * dk, (i + 1) * dk
        heads.append(
            scaled_dot_attention(T.slice(q_all, lo, hi, -1), T.slice(k_all, lo, hi, -1), T.slice(v_all, lo, hi, -1), mask)
        )
    return nn.linear(T.concat(heads, axis=-1), p.out)


def se_layer(
    x: Tensor,
    mask,
    p: SeLayerParams,
    mode: str = nn.EVAL,
    rng: np.random.Generator | None = None,
) -> Tensor:
    mask = _key_mask(mask, x.shape)
    a = nn.dropout(multi_head_attention(x, mask, p.mha), p.dropout_rate, mode, rng)
    return nn.mask_rows(nn.layer_norm(T.add(x, a), p.norm), mask)

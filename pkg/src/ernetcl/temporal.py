"""Temporal encoder: bidirectional GRU, half-width projection, dropout,
residual sum and layer normalization, stacked over the utterance sequence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from . import tensor as T
from .errors import EmptyError, ShapeError
from .nn import AffineParams, NormParams
from .tensor import Tensor


@dataclass
class GruDirection:
    """Gate weights for one direction: update ``z``, reset ``r``, candidate ``h``."""

    W_z: Tensor
    U_z: Tensor
    b_z: Tensor
    W_r: Tensor
    U_r: Tensor
    b_r: Tensor
    W_h: Tensor
    U_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "GruDirection":
        fields = {}
        for gate in "zrh":
            fields[f"W_{gate}"] = T.alloc((hidden, input_dim), "scaled_uniform", rng, fan_in=input_dim, requires_grad=True)
            fields[f"U_{gate}"] = T.alloc((hidden, hidden), "scaled_uniform", rng, fan_in=hidden, requires_grad=True)
            fields[f"b_{gate}"] = T.alloc((hidden,), "zeros", requires_grad=True)
        return cls(**fields)

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden(self) -> int:
        return self.U_z.shape[0]


@dataclass
class GruParams:
    fwd: GruDirection
    bwd: GruDirection

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator) -> "GruParams":
        return cls(GruDirection.init(dim, dim, rng), GruDirection.init(dim, dim, rng))


@dataclass
class TeLayerParams:
    gru: GruParams
    proj: AffineParams
    norm: NormParams
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.proj.in_dim != 2 * self.gru.fwd.hidden:
            raise ShapeError(f"projection expects {self.proj.in_dim} inputs, BiGRU gives {2 * self.gru.fwd.hidden}")

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, dropout_rate: float = 0.0) -> "TeLayerParams":
        gru = GruParams.init(dim, rng)
        return cls(gru, AffineParams.init(2 * dim, dim, rng), NormParams.init(dim), dropout_rate)


def _gru_update(xz: Tensor, xr: Tensor, xh: Tensor, h_prev: Tensor, p: GruDirection) -> Tensor:
    # xz/xr/xh already hold W x + b for each gate
    z = nn.sigmoid(T.add(xz, nn.matvec(h_prev, p.U_z)))
    r = nn.sigmoid(T.add(xr, nn.matvec(h_prev, p.U_r)))
    cand = nn.tanh(T.add(xh, nn.matvec(T.mul(r, h_prev), p.U_h)))
    return T.add(T.mul(T.sub(1.0, z), h_prev), T.mul(z, cand))


def gru_cell(x_t: Tensor, h_prev: Tensor, p: GruDirection) -> Tensor:
    """One GRU step: ``h_t = (1 - z) * h_prev + z * h_cand``."""
    if x_t.shape[-1] != p.input_dim or h_prev.shape[-1] != p.hidden:
        raise ShapeError(f"gru_cell: x {x_t.shape} / h {h_prev.shape} vs params ({p.input_dim}, {p.hidden})")
    xz = T.add(nn.matvec(x_t, p.W_z), p.b_z)
    xr = T.add(nn.matvec(x_t, p.W_r), p.b_r)
    xh = T.add(nn.matvec(x_t, p.W_h), p.b_h)
    return _gru_update(xz, xr, xh, h_prev, p)


def _as_batch(x: Tensor, length) -> tuple[Tensor, np.ndarray, bool]:
    if x.ndim == 2:
        x = T.reshape(x, (1,) + x.shape)
        squeeze = True
    elif x.ndim == 3:
        squeeze = False
    else:
        raise ShapeError(f"expected [L, d] or [B, L, d], got {x.shape}")
    lengths = np.atleast_1d(np.asarray(length, dtype=int))
    if lengths.shape != (x.shape[0],):
        raise ShapeError(f"{lengths.size} lengths given for a batch of {x.shape[0]}")
    if (lengths < 1).any():
        raise EmptyError("sequence length must be at least 1")
    if (lengths > x.shape[1]).any():
        raise ShapeError(f"length {lengths.max()} exceeds padded extent {x.shape[1]}")
    return x, nn.lengths_to_mask(lengths, x.shape[1]), squeeze


def _run_direction(x: Tensor, mask: np.ndarray, p: GruDirection, reverse: bool) -> Tensor:
    B, L, _ = x.shape
    xz = T.add(nn.matvec(x, p.W_z), p.b_z)
    xr = T.add(nn.matvec(x, p.W_r), p.b_r)
    xh = T.add(nn.matvec(x, p.W_h), p.b_h)
    h = Tensor(np.zeros((B, p.hidden)))
    outputs: list[Tensor] = [None] * L  # type: ignore[list-item]
    steps = range(L - 1, -1, -1) if reverse else range(L)
    for t in steps:
        h_new = _gru_update(T.select(xz, t, 1), T.select(xr, t, 1), T.select(xh, t, 1), h, p)
        col = mask[:, t]
        if col.all():
            h = h_new
            outputs[t] = h
        else:
            keep = Tensor(np.broadcast_to(col[:, None], h.shape).astype(np.float64))
            # padded steps leave the state untouched and emit zeros
            h = T.add(T.mul(h_new, keep), T.mul(h, T.sub(1.0, keep)))
            outputs[t] = T.mul(h, keep)
    return T.stack(outputs, axis=1)


def bigru(x: Tensor, length, p: GruParams) -> Tensor:
    """Run both directions over the first ``length`` rows; padded rows come out zero.

    ``x`` is ``[L, d]`` with an int length, or ``[B, L, d]`` with one length
    per conversation. Output has trailing extent ``2 * hidden``.
    """
    xb, mask, squeeze = _as_batch(x, length)
    if xb.shape[-1] != p.fwd.input_dim:
        raise ShapeError(f"bigru: input dim {xb.shape[-1]} vs GRU input {p.fwd.input_dim}")
    out = T.concat([_run_direction(xb, mask, p.fwd, False), _run_direction(xb, mask, p.bwd, True)], axis=-1)
    return T.reshape(out, out.shape[1:]) if squeeze else out


def te_layer(
    x: Tensor,
    length,
    p: TeLayerParams,
    mode: str = nn.EVAL,
    rng: np.random.Generator | None = None,
) -> Tensor:
    xb, mask, squeeze = _as_batch(x, length)
    g = bigru(xb, mask.sum(axis=1), p.gru)
    f = nn.dropout(nn.linear(g, p.proj), p.dropout_rate, mode, rng)
    out = nn.mask_rows(nn.layer_norm(T.add(xb, f), p.norm), mask)
    return T.reshape(out, out.shape[1:]) if squeeze else out

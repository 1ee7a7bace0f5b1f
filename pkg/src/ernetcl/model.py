"""The full network: stacked temporal layers, then stacked spatial layers,
then a softmax classifier. Also the configuration record, the plain
cross-entropy loss and the binary checkpoint format."""

from __future__ import annotations

import copy
import dataclasses
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import nn
from . import tensor as T
from .errors import ConfigError, FormatError, LabelError, ShapeError
from .nn import AffineParams
from .spatial import SeLayerParams, se_layer
from .temporal import TeLayerParams, te_layer
from .tensor import Tensor

LOG_FLOOR = 1e-12
PAD_LABEL = -1


@dataclass
class ModelConfig:
    feature_dim: int = 0  # 0: take it from the data
    num_classes: int = 0  # 0: take it from the data
    depth_te: int = 4
    depth_se: int = 4
    heads: int = 4
    dropout_rate: float = 0.2
    max_epochs: int = 100
    sigma: float = 0.4
    delta: float = 10.0
    learning_rate: float = 1e-5
    batch_size: int = 128
    weight_decay: float = 3e-4
    seed: int = 2023
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 0.0  # 0 disables clipping
    norm_eps: float = 1e-5

    def validate(self) -> "ModelConfig":
        if self.depth_te < 0 or self.depth_se < 0:
            raise ConfigError("encoder depths must be >= 0")
        if not 0.0 < self.sigma <= 1.0:
            raise ConfigError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.delta < 1.0:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.heads < 1:
            raise ConfigError("heads must be >= 1")
        if self.feature_dim < 0 or self.num_classes < 0:
            raise ConfigError("feature_dim and num_classes must be >= 0")
        if self.feature_dim and self.depth_se and self.feature_dim % self.heads:
            raise ConfigError(f"{self.heads} heads do not divide feature_dim {self.feature_dim}")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0")
        return self

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" for f in dataclasses.fields(self))

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        A ``preset = <name>`` line seeds the remaining defaults from one of
        :data:`PRESETS` before the other keys are applied.
        """
        pairs: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs[key] = value
        base = cls()
        if "preset" in pairs:
            name = pairs.pop("preset")
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
            base = PRESETS[name]
        known = {f.name: f for f in dataclasses.fields(cls)}
        changes = {}
        for key, value in pairs.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kind = known[key].type
            try:
                changes[key] = int(value) if kind == "int" else float(value)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: cannot read {value!r} as {kind}") from exc
        return base.replace(**changes).validate()

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        return cls.from_text(Path(path).read_text())


PRESETS: dict[str, ModelConfig] = {
    "MELD": ModelConfig(num_classes=7, learning_rate=1e-5, delta=10.0, sigma=0.4, batch_size=128,
                        depth_te=4, depth_se=4, dropout_rate=0.2),
    "IEMOCAP": ModelConfig(num_classes=6, learning_rate=1e-4, delta=9.0, sigma=0.7, batch_size=64,
                           depth_te=2, depth_se=6, dropout_rate=0.1),
    "EmoryNLP": ModelConfig(num_classes=7, learning_rate=1e-5, delta=7.0, sigma=0.6, batch_size=128,
                            depth_te=4, depth_se=3, dropout_rate=0.2),
    "DailyDialog": ModelConfig(num_classes=7, learning_rate=1e-5, delta=9.0, sigma=0.6, batch_size=128,
                               depth_te=3, depth_se=6, dropout_rate=0.2),
}


@dataclass
class ModelParams:
    te_layers: list[TeLayerParams] = field(default_factory=list)
    se_layers: list[SeLayerParams] = field(default_factory=list)
    classifier: AffineParams | None = None

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield from named_tensors(self.te_layers, "te")
        yield from named_tensors(self.se_layers, "se")
        yield from named_tensors(self.classifier, "classifier")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def copy(self) -> "ModelParams":
        out = copy.deepcopy(self)
        for t in out.parameters():
            t.grad = None
        return out


def named_tensors(obj, prefix: str) -> Iterator[tuple[str, Tensor]]:
    if isinstance(obj, Tensor):
        yield prefix, obj
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            yield from named_tensors(item, f"{prefix}.{i}")
    elif dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            yield from named_tensors(getattr(obj, f.name), f"{prefix}.{f.name}")


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    cfg.validate()
    d, k = cfg.feature_dim, cfg.num_classes
    if d < 1 or k < 1:
        raise ConfigError("feature_dim and num_classes must be set before initializing")
    if cfg.depth_se and d % cfg.heads:
        raise ConfigError(f"{cfg.heads} heads do not divide feature_dim {d}")
    te = [TeLayerParams.init(d, rng, cfg.dropout_rate) for _ in range(cfg.depth_te)]
    for layer in te:
        layer.norm.eps = cfg.norm_eps
    se = [SeLayerParams.init(d, cfg.heads, rng, cfg.dropout_rate) for _ in range(cfg.depth_se)]
    for layer in se:
        layer.norm.eps = cfg.norm_eps
    return ModelParams(te, se, AffineParams.init(d, k, rng))


def encode(
    features,
    lengths,
    params: ModelParams,
    mode: str = nn.EVAL,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Utterance representations after both encoder stacks, ``[B, L, d]``."""
    x = T.as_tensor(features)
    if x.ndim != 3:
        raise ShapeError(f"expected features [B, L, d], got {x.shape}")
    d = params.classifier.in_dim
    if x.shape[-1] != d:
        raise ShapeError(f"feature dim {x.shape[-1]} does not match model dim {d}")
    lengths = np.asarray(lengths, dtype=int)
    mask = nn.lengths_to_mask(lengths, x.shape[1])
    x = nn.mask_rows(x, mask)
    for layer in params.te_layers:
        x = te_layer(x, lengths, layer, mode, rng)
    for layer in params.se_layers:
        x = se_layer(x, mask, layer, mode, rng)
    return x


def forward(batch, params: ModelParams, mode: str = nn.EVAL, rng: np.random.Generator | None = None) -> Tensor:
    """Class probabilities ``[B, L, K]`` for a batch (anything with
    ``features`` and ``lengths``)."""
    h = encode(batch.features, batch.lengths, params, mode, rng)
    return nn.softmax(nn.linear(h, params.classifier), axis=-1)


def predict(probs) -> np.ndarray | int:
    """Arg-max over the trailing axis; ties go to the lowest index."""
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    out = np.argmax(p, axis=-1)
    return int(out) if out.ndim == 0 else out


def weighted_nll(probs: Tensor, labels, weights, valid_mask) -> Tensor:
    """``-(1/N) * sum(weights * log p[true])`` over valid slots, N = valid count."""
    labels = np.asarray(labels)
    valid = np.asarray(valid_mask, dtype=bool)
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), valid.shape)
    if labels.shape != valid.shape or probs.shape[:-1] != valid.shape:
        raise ShapeError(f"probs {probs.shape}, labels {labels.shape}, mask {valid.shape} disagree")
    k = probs.shape[-1]
    picked = labels[valid]
    if picked.size == 0:
        raise ShapeError("no valid utterances to score")
    if (picked < 0).any() or (picked >= k).any():
        bad = picked[(picked < 0) | (picked >= k)][0]
        raise LabelError(f"label {bad} outside [0, {k})")
    onehot = np.zeros(probs.shape)
    idx = np.nonzero(valid)
    onehot[idx + (picked,)] = 1.0
    p_true = T.sum(T.mul(probs, Tensor(onehot)), axis=-1)
    logp = T.log(p_true, floor=LOG_FLOOR)
    w = np.where(valid, weights, 0.0)
    return T.mul(T.sum(T.mul(logp, Tensor(w))), -1.0 / picked.size)


def standard_loss(probs: Tensor, labels, valid_mask) -> Tensor:
    return weighted_nll(probs, labels, 1.0, valid_mask)


# ---------------------------------------------------------------------------
# checkpoints
#
# layout (little-endian):
#   magic b"ERNETCL\0" | u32 version | u32 header_len | header (utf-8 key = value)
#   u32 n_blocks | n_blocks * (u32 name_len | name | u32 rank | rank * u64 extent | f64 payload)

MAGIC = b"ERNETCL\x00"
FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, cfg: ModelConfig, params: ModelParams) -> None:
    header = cfg.to_text().encode()
    blocks = list(params.named_parameters())
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(blocks)))
        for name, t in blocks:
            raw = name.encode()
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}Q", *t.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, ModelParams]:
    buf = Path(path).read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"{path}: truncated checkpoint")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    cfg = ModelConfig.from_text(take(header_len).decode())
    params = init_params(cfg, np.random.default_rng(0))
    slots = dict(params.named_parameters())
    (count,) = struct.unpack("<I", take(4))
    if count != len(slots):
        raise FormatError(f"{path}: {count} parameter blocks, config implies {len(slots)}")
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode()
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        n = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        if name not in slots:
            raise FormatError(f"{path}: unexpected parameter {name!r}")
        if slots[name].shape != tuple(shape):
            raise FormatError(f"{path}: {name} has shape {tuple(shape)}, expected {slots[name].shape}")
        slots[name].data[...] = data
    if pos != len(buf):
        raise FormatError(f"{path}: trailing bytes after last block")
    return cfg, params

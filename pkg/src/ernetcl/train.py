"""Epoch loop, model selection and evaluation."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import curriculum, nn
from .curriculum import CurriculumSchedule, cl_loss
from .data import Dataset, make_batches
from .errors import ConfigError
from .metrics import MetricsReport, build_report
from .model import ModelConfig, ModelParams, forward, init_params, predict, standard_loss
from .optim import AdamWState, adamw_step, clip_grad_norm
from .tensor import backward, no_grad

log = logging.getLogger(__name__)


@dataclass
class Flags:
    no_te: bool = False
    no_se: bool = False
    no_cl: bool = False


@dataclass
class RunHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_weighted_f1: list[float] = field(default_factory=list)
    val_micro_f1: list[float] = field(default_factory=list)
    mean_weight: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def deterministic_view(self) -> dict[str, list[float]]:
        """Everything except wall-clock timings."""
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_weighted_f1": self.val_weighted_f1,
            "val_micro_f1": self.val_micro_f1,
            "mean_weight": self.mean_weight,
        }


@dataclass
class TrainResult:
    config: ModelConfig
    params: ModelParams
    history: RunHistory
    best_epoch: int  # 0 means the initial parameters were never beaten


def resolve_config(cfg: ModelConfig, train_ds: Dataset, val_ds: Dataset | None = None, flags: Flags | None = None) -> ModelConfig:
    """Fill data-dependent fields and apply ablation flags; reject mismatches."""
    flags = flags or Flags()
    d, k = train_ds.feature_dim, train_ds.num_classes
    if len(train_ds) == 0:
        raise ConfigError("training set is empty")
    if val_ds is not None and len(val_ds):
        if val_ds.feature_dim != d:
            raise ConfigError(f"validation features are {val_ds.feature_dim}-dim, training features {d}-dim")
        if val_ds.num_classes != k:
            k = max(k, val_ds.num_classes)
    if cfg.feature_dim and cfg.feature_dim != d:
        raise ConfigError(f"config feature_dim {cfg.feature_dim} but data has {d}")
    if cfg.num_classes and cfg.num_classes < k:
        raise ConfigError(f"config num_classes {cfg.num_classes} but data uses {k} classes")
    out = cfg.replace(feature_dim=d, num_classes=cfg.num_classes or k)
    if flags.no_te:
        out = out.replace(depth_te=0)
    if flags.no_se:
        out = out.replace(depth_se=0)
    return out.validate()


def _rngs(seed: int) -> tuple[np.random.Generator, ...]:
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def predict_dataset(params: ModelParams, ds: Dataset, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray, float]:
    """Gold labels, predictions and the plain cross-entropy over ``ds``."""
    gold, pred = [], []
    total, count = 0.0, 0
    with no_grad():
        for batch in make_batches(ds, batch_size):
            probs = forward(batch, params, nn.EVAL)
            n = int(batch.valid_mask.sum())
            total += standard_loss(probs, batch.labels, batch.valid_mask).item() * n
            count += n
            gold.append(batch.labels[batch.valid_mask])
            pred.append(predict(probs)[batch.valid_mask])
    return np.concatenate(gold), np.concatenate(pred), total / max(count, 1)


def evaluate(params: ModelParams, ds: Dataset, batch_size: int = 64) -> MetricsReport:
    d, k = params.classifier.in_dim, params.classifier.out_dim
    if ds.feature_dim != d:
        raise ConfigError(f"checkpoint expects {d}-dim features, data has {ds.feature_dim}")
    if ds.num_classes > k:
        raise ConfigError(f"checkpoint has {k} classes, data declares {ds.num_classes}")
    names = list(ds.label_names) + [str(i) for i in range(ds.num_classes, k)]
    gold, pred, _ = predict_dataset(params, ds, batch_size)
    return build_report(gold, pred, names, ds.neutral_index)


def train(
    cfg: ModelConfig,
    train_ds: Dataset,
    val_ds: Dataset | None = None,
    flags: Flags | None = None,
) -> TrainResult:
    """Minimize the curriculum loss with AdamW, keeping the parameters with
    the best validation weighted F1. Fully determined by ``cfg.seed``."""
    flags = flags or Flags()
    cfg = resolve_config(cfg, train_ds, val_ds, flags)
    val_ds = val_ds if val_ds is not None and len(val_ds) else train_ds
    init_rng, shuffle_rng, drop_rng = _rngs(cfg.seed)
    params = init_params(cfg, init_rng)
    plist = params.parameters()
    state = AdamWState.for_params(
        plist, lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps, weight_decay=cfg.weight_decay
    )
    history = RunHistory()
    best, best_key, best_epoch = params.copy(), (-math.inf, -math.inf), 0
    sched = CurriculumSchedule(cfg.sigma, cfg.delta, max(cfg.max_epochs, 1))

    for t in range(1, cfg.max_epochs + 1):
        start = time.perf_counter()
        loss_sum, n_sum, w_sum = 0.0, 0, 0.0
        batches = make_batches(train_ds, cfg.batch_size, shuffle_rng, shuffle=True)
        for batch in batches:
            if flags.no_cl:
                w = np.ones(batch.size)
            else:
                w = curriculum.weights(t, batch.conv_difficulties, sched)
            probs = forward(batch, params, nn.TRAIN, drop_rng)
            loss = cl_loss(probs, batch.labels, w, batch.valid_mask)
            backward(loss, plist)
            grads = [p.grad for p in plist]
            if cfg.grad_clip > 0:
                grads = clip_grad_norm(grads, cfg.grad_clip)
            adamw_step(plist, grads, state)
            n = int(batch.valid_mask.sum())
            loss_sum += loss.item() * n
            n_sum += n
            w_sum += float(w.sum())

        gold, pred, val_loss = predict_dataset(params, val_ds, cfg.batch_size)
        report = build_report(gold, pred, [str(i) for i in range(cfg.num_classes)])
        history.train_loss.append(loss_sum / n_sum)
        history.val_loss.append(val_loss)
        history.val_weighted_f1.append(report.weighted_f1)
        history.val_micro_f1.append(report.micro_f1)
        history.mean_weight.append(w_sum / len(train_ds))
        history.epoch_seconds.append(time.perf_counter() - start)
        # ties on weighted F1 go to the lower validation loss
        key = (report.weighted_f1, -val_loss)
        if key > best_key:
            best, best_key, best_epoch = params.copy(), key, t
        log.info(
            "epoch %d/%d loss %.4f val_loss %.4f val_wf1 %.4f val_mf1 %.4f",
            t, cfg.max_epochs, history.train_loss[-1], val_loss, report.weighted_f1, report.micro_f1,
        )
    return TrainResult(cfg, best, history, best_epoch)

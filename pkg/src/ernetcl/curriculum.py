"""Emotion-shift difficulty, the epoch-dependent weight schedule, and the
curriculum-weighted cross-entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, EmptyError, RangeError, ShapeError
from .model import weighted_nll
from .tensor import Tensor


@dataclass(frozen=True)
class CurriculumSchedule:
    sigma: float
    delta: float
    max_epochs: int

    def check(self) -> None:
        if not self.sigma > 0 or self.sigma > 1:
            raise ConfigError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")

    @classmethod
    def from_config(cls, cfg) -> "CurriculumSchedule":
        return cls(cfg.sigma, cfg.delta, cfg.max_epochs)


def speaker_shift_counts(conv) -> dict:
    """Map each speaker to ``(shifts, utterances)`` over their own
    chronological subsequence. ``conv`` needs ``speakers`` and ``labels``."""
    return shift_counts(conv.speakers, conv.labels)


def shift_counts(speakers: Sequence[Hashable], labels: Sequence[int]) -> dict:
    if len(speakers) != len(labels):
        raise ShapeError(f"{len(speakers)} speakers vs {len(labels)} labels")
    last: dict = {}
    counts: dict = {}
    for spk, lab in zip(speakers, labels):
        shifts, n = counts.get(spk, (0, 0))
        if spk in last and last[spk] != lab:
            shifts += 1
        counts[spk] = (shifts, n + 1)
        last[spk] = lab
    return counts


def difficulty(conv) -> float:
    """Mean over speakers of shift count divided by utterance count; in [0, 1]."""
    if len(conv.labels) == 0:
        raise EmptyError("difficulty of an empty conversation is undefined")
    counts = shift_counts(conv.speakers, conv.labels)
    # fsum makes the value independent of speaker order
    return math.fsum(s / n for s, n in counts.values()) / len(counts)


def epoch_ratio(t: int, sched: CurriculumSchedule) -> float:
    if not 1 <= t <= sched.max_epochs:
        raise RangeError(f"epoch {t} outside [1, {sched.max_epochs}]")
    return t / (sched.delta * sched.max_epochs)


def weight(t: int, d: float, sched: CurriculumSchedule) -> float:
    sched.check()
    return float(expit((epoch_ratio(t, sched) - d) / sched.sigma))


def weights(t: int, difficulties, sched: CurriculumSchedule) -> np.ndarray:
    """Vectorized :func:`weight` over an array of difficulty scores."""
    sched.check()
    return expit((epoch_ratio(t, sched) - np.asarray(difficulties, dtype=np.float64)) / sched.sigma)


def cl_loss(probs: Tensor, labels, conv_weights, valid_mask) -> Tensor:
    """Cross-entropy where every utterance of conversation ``i`` is scaled by
    ``conv_weights[i]``; still normalized by the raw valid-utterance count."""
    conv_weights = np.asarray(conv_weights, dtype=np.float64)
    valid = np.asarray(valid_mask, dtype=bool)
    if conv_weights.shape != (valid.shape[0],):
        raise ShapeError(f"{conv_weights.size} weights for {valid.shape[0]} conversations")
    return weighted_nll(probs, labels, conv_weights[:, None] * valid, valid)

"""Brute-force references kept deliberately separate from the package code."""

import math

import numpy as np


def pairwise_shift_counts(speakers, labels):
    """For each speaker, count consecutive pairs (i < j, nothing by that
    speaker strictly between) whose labels differ, by explicit pair search."""
    out = {}
    n = len(speakers)
    for s in set(speakers):
        shifts = 0
        for i in range(n):
            for j in range(i + 1, n):
                if speakers[i] != s or speakers[j] != s:
                    continue
                if any(speakers[k] == s for k in range(i + 1, j)):
                    continue
                shifts += labels[i] != labels[j]
        out[s] = (shifts, sum(1 for x in speakers if x == s))
    return out


def pairwise_difficulty(speakers, labels):
    counts = pairwise_shift_counts(speakers, labels)
    return math.fsum(sh / ut for sh, ut in counts.values()) / len(counts)


def brute_metrics(y, p, k, exclude=()):
    """Per-sample loops only; no confusion matrix."""
    f1 = []
    for c in range(k):
        tp = sum(1 for a, b in zip(y, p) if a == c and b == c)
        fp = sum(1 for a, b in zip(y, p) if a != c and b == c)
        fn = sum(1 for a, b in zip(y, p) if a == c and b != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    kept = [c for c in range(k) if c not in exclude]
    support = [sum(1 for a in y if a == c) for c in kept]
    weighted = sum(f1[c] * s for c, s in zip(kept, support)) / sum(support) if sum(support) else 0.0
    macro = sum(f1[c] for c in kept) / len(kept)
    tp = sum(1 for a, b in zip(y, p) if a == b and a in kept)
    fp = sum(1 for a, b in zip(y, p) if b in kept and a != b)
    fn = sum(1 for a, b in zip(y, p) if a in kept and a != b)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    micro = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return {"weighted": weighted, "macro": macro, "micro": micro, "f1": f1}


def random_conversation(rng, max_len=12, max_speakers=4, max_labels=5):
    n = int(rng.integers(1, max_len + 1))
    speakers = [f"s{int(rng.integers(max_speakers))}" for _ in range(n)]
    labels = [int(rng.integers(max_labels)) for _ in range(n)]
    return speakers, labels

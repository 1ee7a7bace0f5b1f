import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ernetcl.curriculum import (
    CurriculumSchedule,
    cl_loss,
    difficulty,
    epoch_ratio,
    speaker_shift_counts,
    weight,
    weights,
)
from ernetcl.data import Conversation, Utterance
from ernetcl.errors import ConfigError, EmptyError, RangeError, ShapeError
from ernetcl.model import standard_loss
from ernetcl.tensor import Tensor

from oracles import pairwise_difficulty, pairwise_shift_counts

MELD = CurriculumSchedule(sigma=0.4, delta=10, max_epochs=100)


def conv(speakers, labels):
    return Conversation("c", [Utterance(s, l, np.zeros(1)) for s, l in zip(speakers, labels)])


def test_no_shift():
    assert speaker_shift_counts(conv(["a"] * 3, [0, 0, 0])) == {"a": (0, 3)}


def test_every_pair_shifts():
    assert speaker_shift_counts(conv(["a"] * 4, [0, 1, 0, 1])) == {"a": (3, 4)}


def test_interleaved_speakers():
    c = conv(["s1", "s2", "s1", "s2", "s1"], [0, 2, 0, 2, 1])
    expected = pairwise_shift_counts(c.speakers, c.labels)
    assert expected == {"s1": (1, 3), "s2": (0, 2)}
    assert speaker_shift_counts(c) == expected
    assert difficulty(c) == pytest.approx(1 / 6, abs=1e-15)


def test_constant_emotions_zero_difficulty():
    assert difficulty(conv(["a", "b", "a", "b"], [1, 2, 1, 2])) == 0.0


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_alternating_single_speaker(n):
    assert difficulty(conv(["a"] * n, [i % 2 for i in range(n)])) == pytest.approx((n - 1) / n, abs=1e-15)


def test_empty_conversation():
    with pytest.raises(EmptyError):
        difficulty(conv([], []))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.integers(0, 4)), min_size=1, max_size=15), st.permutations(range(5)))
def test_difficulty_matches_oracle_bounded_and_relabel_invariant(pairs, perm):
    speakers = [s for s, _ in pairs]
    labels = [l for _, l in pairs]
    d = difficulty(conv(speakers, labels))
    assert d == pytest.approx(pairwise_difficulty(speakers, labels), abs=1e-15)
    assert 0.0 <= d <= 1.0
    assert difficulty(conv(speakers, [perm[l] for l in labels])) == d


@pytest.mark.parametrize("t,delta,T,expected", [(50, 10, 100, 0.05), (100, 1, 100, 1.0), (100, 10, 100, 0.1)])
def test_epoch_ratio(t, delta, T, expected):
    assert epoch_ratio(t, CurriculumSchedule(0.5, delta, T)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("t", [0, 101])
def test_epoch_ratio_range(t):
    with pytest.raises(RangeError):
        epoch_ratio(t, MELD)


def test_weight_at_ratio_equals_difficulty():
    assert weight(50, epoch_ratio(50, MELD), MELD) == 0.5


def test_weight_named_values():
    # high-precision references computed with 30-digit mpmath
    assert abs(weight(100, 0.0, MELD) - 0.562176500885798104) < 1e-6
    assert abs(weight(10, 0.0, CurriculumSchedule(0.5, 1, 10)) - 0.880797077977882444) < 1e-6


@pytest.mark.parametrize("sigma", [0.0, -0.2])
def test_weight_rejects_nonpositive_sigma(sigma):
    with pytest.raises(ConfigError):
        weight(1, 0.0, CurriculumSchedule(sigma, 10, 100))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(1.0, 20.0), st.integers(2, 200), st.floats(0, 1), st.floats(0, 1))
def test_weight_monotone(sigma, delta, T, d1, d2):
    sched = CurriculumSchedule(sigma, delta, T)
    w = weights(1, [d1], sched)
    assert 0 < w[0] < 1
    seq = [weight(t, d1, sched) for t in range(1, T + 1)]
    assert all(b > a for a, b in zip(seq, seq[1:]))
    if abs(d1 - d2) > 1e-6:
        lo, hi = sorted((d1, d2))
        for t in (1, T // 2 or 1, T):
            assert weight(t, lo, sched) > weight(t, hi, sched)


def test_vectorized_weights_agree():
    ds = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(weights(7, ds, MELD), [weight(7, d, MELD) for d in ds])


def _probs_batch(rng, B=3, L=4, K=5):
    logits = rng.normal(size=(B, L, K))
    probs = np.exp(logits) / np.exp(logits).sum(-1, keepdims=True)
    lengths = rng.integers(1, L + 1, size=B)
    mask = np.arange(L)[None, :] < lengths[:, None]
    labels = np.where(mask, rng.integers(K, size=(B, L)), -1)
    return Tensor(probs), labels, mask


def test_unit_weights_reduce_to_standard_loss(rng):
    for _ in range(20):
        probs, labels, mask = _probs_batch(rng)
        a = cl_loss(probs, labels, np.ones(3), mask).item()
        assert abs(a - standard_loss(probs, labels, mask).item()) < 1e-12


def test_zero_weights_annihilate(rng):
    probs, labels, mask = _probs_batch(rng)
    assert cl_loss(probs, labels, np.zeros(3), mask).item() == 0.0


def test_half_weight_hand_value():
    probs = Tensor([[[0.5, 0.5], [0.75, 0.25]]])
    # 0.5 * (ln 2 + ln 4) / 2 from 30-digit mpmath
    assert abs(cl_loss(probs, [[0, 1]], [0.5], [[True, True]]).item() - 0.519860385419958982) < 1e-12


def test_weight_count_must_match(rng):
    probs, labels, mask = _probs_batch(rng)
    with pytest.raises(ShapeError):
        cl_loss(probs, labels, np.ones(2), mask)

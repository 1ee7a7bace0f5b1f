import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ernetcl import nn
from ernetcl import tensor as T
from ernetcl.errors import ConfigError, EmptyError
from ernetcl.model import PRESETS, named_tensors
from ernetcl.spatial import (
    MhaParams,
    SeLayerParams,
    attention_weights,
    multi_head_attention,
    scaled_dot_attention,
    se_layer,
)
from ernetcl.tensor import Tensor, finite_diff_check


def test_single_key_returns_value(rng):
    q, k, v = (Tensor(rng.normal(size=(1, 3))) for _ in range(3))
    assert np.array_equal(scaled_dot_attention(q, k, v, [True]).data, v.data)


def test_identical_keys_give_uniform_weights(rng):
    k = np.tile(rng.normal(size=(1, 3)), (4, 1))
    w = attention_weights(rng.normal(size=(4, 3)), k, [True, True, True, False])
    np.testing.assert_allclose(w[:, :3], 1 / 3, atol=1e-15)
    assert np.array_equal(w[:, 3], np.zeros(4))


def test_two_position_scalar_oracle():
    q = [[1.0, 0.0], [0.5, -1.0]]
    k = [[0.2, 0.3], [-1.0, 2.0]]
    v = [[1.0, 2.0], [3.0, -1.0]]
    out = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v), [True, True]).data
    for i in range(2):
        s0 = (q[i][0] * k[0][0] + q[i][1] * k[0][1]) / math.sqrt(2)
        s1 = (q[i][0] * k[1][0] + q[i][1] * k[1][1]) / math.sqrt(2)
        a0 = math.exp(s0) / (math.exp(s0) + math.exp(s1))
        a1 = 1 - a0
        for j in range(2):
            assert abs(out[i, j] - (a0 * v[0][j] + a1 * v[1][j])) < 1e-12


def test_all_masked_is_an_error(rng):
    x = Tensor(rng.normal(size=(2, 4)))
    with pytest.raises(EmptyError):
        scaled_dot_attention(x, x, x, [False, False])


def test_heads_must_divide_dim(rng):
    with pytest.raises(ConfigError):
        MhaParams.init(6, 4, rng)


def test_mha_single_row_with_identity_output(rng):
    p = MhaParams.init(4, 2, rng)
    p.out.weight.data[...] = np.eye(4)
    x = rng.normal(size=(1, 4))
    out = multi_head_attention(Tensor(x), [True], p).data
    np.testing.assert_allclose(out[0], p.value.data @ x[0], atol=1e-15)


def test_mha_permutation_equivariant(rng):
    p = MhaParams.init(4, 2, rng)
    x = rng.normal(size=(3, 4))
    perm = np.array([2, 0, 1])
    a = multi_head_attention(Tensor(x), [True] * 3, p).data
    b = multi_head_attention(Tensor(x[perm]), [True] * 3, p).data
    assert np.abs(b - a[perm]).max() < 1e-12


def test_mha_gradients(rng):
    p = MhaParams.init(4, 2, rng)
    x = T.parameter(rng.uniform(-1, 1, (3, 4)))
    w = Tensor(rng.uniform(-1, 1, (3, 4)))
    params = [x] + [t for _, t in named_tensors(p, "m")]
    assert finite_diff_check(lambda _: T.sum(T.mul(multi_head_attention(x, [True, True, False], p), w)), params) < 1e-4


def test_se_zero_output_projection_is_layer_norm(rng):
    p = SeLayerParams.init(4, 2, rng)
    p.mha.out.weight.data[...] = 0.0
    x = Tensor(rng.normal(size=(3, 4)))
    np.testing.assert_array_equal(se_layer(x, [True] * 3, p).data, nn.layer_norm(x, p.norm).data)


def test_se_eval_deterministic(rng):
    p = SeLayerParams.init(4, 2, rng, dropout_rate=0.3)
    x = Tensor(rng.normal(size=(3, 4)))
    assert np.array_equal(se_layer(x, [True] * 3, p).data, se_layer(x, [True] * 3, p).data)


def test_iemocap_depth_preserves_shape(rng):
    depth = PRESETS["IEMOCAP"].depth_se
    assert depth == 6
    x = Tensor(rng.normal(size=(2, 5, 8)))
    mask = np.array([[True] * 5, [True] * 2 + [False] * 3])
    for _ in range(depth):
        x = se_layer(x, mask, SeLayerParams.init(8, 4, rng))
    assert x.shape == (2, 5, 8)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.sampled_from([1, 2, 4]), st.integers(0, 2**31))
def test_attention_weights_sum_to_one(n_valid, extra, seed):
    rng = np.random.default_rng(seed)
    L = n_valid + extra
    mask = np.arange(L) < n_valid
    w = attention_weights(rng.normal(size=(L, 3)) * 5, rng.normal(size=(L, 3)) * 5, mask)
    assert np.abs(w.sum(axis=-1) - 1).max() < 1e-9
    assert np.array_equal(w[:, n_valid:], np.zeros((L, extra)))


def test_padded_rows_do_not_leak(rng):
    p = SeLayerParams.init(4, 2, rng)
    x = rng.normal(size=(2, 5, 4))
    mask = np.array([[True] * 5, [True] * 3 + [False] * 2])
    a = se_layer(Tensor(x), mask, p).data
    x[1, 3:] = 1e3 * rng.normal(size=(2, 4))
    b = se_layer(Tensor(x), mask, p).data
    assert np.array_equal(a[1, :3], b[1, :3])
    assert np.array_equal(b[1, 3:], np.zeros((2, 4)))


def test_no_attention_across_conversations(rng):
    p = SeLayerParams.init(4, 2, rng)
    x = rng.normal(size=(2, 3, 4))
    mask = np.ones((2, 3), dtype=bool)
    joint = se_layer(Tensor(x), mask, p).data
    alone = se_layer(Tensor(x[:1]), mask[:1], p).data
    np.testing.assert_allclose(joint[0], alone[0], atol=1e-15)

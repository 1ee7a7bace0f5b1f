import numpy as np
import pytest

from ernetcl.data import SynthSpec, synthesize
from ernetcl.model import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(2023)


@pytest.fixture
def desk_config():
    """Small, dropout-free model used for gradient checks."""
    return ModelConfig(feature_dim=8, num_classes=3, depth_te=2, depth_se=2, heads=2, dropout_rate=0.0)


@pytest.fixture
def separable():
    """90 conversations with well separated classes: 50 train, 20 val, 20 test."""
    ds = synthesize(
        SynthSpec(num_conversations=90, num_classes=4, feature_dim=16, class_separation=10.0, shift_prob=0.3),
        np.random.default_rng(7),
    )
    return ds.subset(range(50)), ds.subset(range(50, 70)), ds.subset(range(70, 90))

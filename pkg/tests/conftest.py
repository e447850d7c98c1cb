import numpy as np
import pytest
import torch

from attrswap.data import SyntheticConfig, generate_synthetic
from attrswap.nets import ModelBundle, ModelConfig
from attrswap.schema import AttributeSchema


@pytest.fixture(scope="session")
def tiny_schema():
    return AttributeSchema((("shape", 3), ("hue", 4)))


@pytest.fixture(scope="session")
def tiny_cfg():
    return ModelConfig(image_size=32, base_channels=8, critic_base=16)


@pytest.fixture()
def tiny_model(tiny_schema, tiny_cfg):
    torch.manual_seed(0)
    return ModelBundle(tiny_schema, tiny_cfg)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SyntheticConfig(
        shape_classes=3, hue_classes=6, brightness_classes=3,
        count_per_combination=1, jitter=1, seed=3))


@pytest.fixture()
def image_batch():
    g = torch.Generator().manual_seed(42)
    return torch.rand(4, 3, 32, 32, generator=g) * 2 - 1


@pytest.fixture()
def rng():
    return np.random.default_rng(0)

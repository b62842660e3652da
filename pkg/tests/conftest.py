import numpy as np
import pytest

from chromacodec.corpus import CorpusSpec, generate_corpus
from chromacodec.net import NetworkConfig, init_model

TINY_CONFIG = NetworkConfig(
    k_branches=2, trunk_channels=4, trunk_depth=1, branch_hidden=3, predictor_hidden=4, seed=3
)


@pytest.fixture(scope="session")
def tiny_model():
    return init_model(TINY_CONFIG)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def two_mode_spec():
    """Single class (constant luma), two equiprobable cb modes at +-0.25."""
    return CorpusSpec(
        image_count=12,
        width=32,
        height=32,
        shape_classes=1,
        palette=(((0.25, 0.0, 0.5), (-0.25, 0.0, 0.5)),),
        noise_std=0.01,
        seed=11,
    )


@pytest.fixture(scope="session")
def two_mode_corpus(two_mode_spec):
    return generate_corpus(two_mode_spec)


@pytest.fixture(scope="session")
def det_mode_spec():
    """Two classes with distinct luma, one chroma mode each: the best branch
    is a deterministic function of the local gray value."""
    return CorpusSpec(
        image_count=12,
        width=32,
        height=32,
        shape_classes=2,
        palette=(
            ((-0.25, 0.0, 1.0),),
            ((0.25, 0.0, 1.0),),
        ),
        noise_std=0.01,
        seed=13,
    )


@pytest.fixture(scope="session")
def det_mode_corpus(det_mode_spec):
    return generate_corpus(det_mode_spec)

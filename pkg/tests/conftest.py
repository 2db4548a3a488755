import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vidmark.media import ColorSpace, VideoClip
from vidmark.prng import WatermarkKey, derive_keys
from vidmark.synthetic import acceptance_clip, constant_clip

settings.register_profile("repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def cover():
    """The bundled 64-frame 128x128 RGB acceptance clip."""
    return acceptance_clip()


@pytest.fixture(scope="session")
def flat():
    return constant_clip(frames=64, width=128, height=128, value=128)


@pytest.fixture
def key():
    return WatermarkKey(0x1234_5678_9ABC_DEF0)


@pytest.fixture(scope="session")
def keys10():
    return derive_keys(2024, 10)


def gray_clip(arr) -> VideoClip:
    return VideoClip.from_array(np.asarray(arr, dtype=np.uint8), ColorSpace.GRAY8)

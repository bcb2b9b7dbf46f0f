import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gesturelstm.skeleton import HandFrame, RawSequence
from gesturelstm.synth import hand_points

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_frame(rng, timestamp=0.0):
    """A random but kinematically valid hand frame (no degenerate bones)."""
    curls = rng.uniform(0.05, 1.2, size=5)
    spread = rng.uniform(-1.0, 1.0)
    palm = rng.normal(scale=0.3, size=3)
    scale = rng.uniform(0.8, 1.2)
    return HandFrame.from_array(hand_points(palm, curls, spread, scale), timestamp=timestamp)


def make_sequence(rng, length):
    frames = tuple(make_frame(rng, timestamp=i / 30.0) for i in range(length))
    duration = (length - 1) / 30.0 if length > 1 else 0.0
    return RawSequence(frames=frames, duration=duration)

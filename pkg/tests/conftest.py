import numpy as np
import pytest
from scipy import signal

from mcforge import rng

SEED = 20240601


@pytest.fixture
def stream() -> rng.SeededStream:
    return rng.SeededStream(SEED, 0)


@pytest.fixture
def make_stream():
    def make(stream_id: int = 0, seed: int = SEED) -> rng.SeededStream:
        return rng.SeededStream(seed, stream_id)

    return make


@pytest.fixture
def ar1(make_stream):
    """stationary AR(1) series with unit marginal variance"""

    def generate(rho: float, n: int, stream_id: int = 7) -> np.ndarray:
        e = np.asarray(make_stream(stream_id).standard_normal(n))
        innovations = np.sqrt(1.0 - rho * rho) * e
        innovations[0] = e[0]
        return signal.lfilter([1.0], [1.0, -rho], innovations)

    return generate

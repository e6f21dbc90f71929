"""Deterministic, splittable pseudo-random streams.

Every sampler in the package draws through a stream. A SeededStream is a
Philox counter-based generator keyed by (seed, stream_id), so any number of
chains or replicates can each own an independent stream without sharing
state, and the same key always yields the same draws on every platform.

The variate generators are fixed and must not change, since result files are
compared byte for byte:

* uniform01: top 53 bits of a raw 64-bit Philox output, times 2**-53, in [0, 1)
* open uniforms: the same plus half an ulp, in (0, 1)
* normal: inverse CDF (scipy.special.ndtri) of an open uniform
* exponential(rate): -log(U) / rate of an open uniform (rate parameterisation)
"""
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .errors import ErrorParameter, ErrorStreamExhausted

UINT64_MAX = 2**64 - 1

_MANTISSA_SHIFT = np.uint64(11)
_MANTISSA_SCALE = 2.0**-53
_HALF_ULP = 2.0**-54

Size = Optional[Union[int, Tuple[int, ...]]]


@dataclass(frozen=True)
class Uniform01:
    pass


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ErrorParameter("normal sd must be positive, got {}".format(self.sd))


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ErrorParameter("exponential rate must be positive, got {}".format(self.rate))


DistributionSpec = Union[Uniform01, Normal, Exponential]


def _check_uint64(name: str, value: int) -> int:
    value = int(value)
    if value < 0 or value > UINT64_MAX:
        raise ErrorParameter("{} must be a 64-bit unsigned integer, got {}".format(name, value))
    return value


def _scalar_or_array(values: np.ndarray, size: Size):
    if size is None:
        return float(values)
    return values


class _StreamMethods(object):
    """law transforms shared by seeded and replayed streams"""

    def uniform(self, size: Size = None):
        raise NotImplementedError

    def open_uniform(self, size: Size = None):
        raise NotImplementedError

    def standard_normal(self, size: Size = None):
        return _scalar_or_array(special.ndtri(np.asarray(self.open_uniform(size))), size)

    def normal(self, mean: float = 0.0, sd: float = 1.0, size: Size = None):
        if not sd > 0:
            raise ErrorParameter("normal sd must be positive, got {}".format(sd))
        z = np.asarray(self.standard_normal(size))
        return _scalar_or_array(mean + sd * z, size)

    def exponential(self, rate: float = 1.0, size: Size = None):
        if not rate > 0:
            raise ErrorParameter("exponential rate must be positive, got {}".format(rate))
        u = np.asarray(self.open_uniform(size))
        return _scalar_or_array(-np.log(u) / rate, size)

    def from_ppf(self, ppf: Callable[[np.ndarray], np.ndarray], size: Size = None):
        """draw from any law through its quantile function"""
        return _scalar_or_array(np.asarray(ppf(np.asarray(self.open_uniform(size)))), size)

    def draw(self, dist: DistributionSpec, size: Size = None):
        """draw from one of the basic laws described by a DistributionSpec"""
        if isinstance(dist, Uniform01):
            return self.uniform(size)
        if isinstance(dist, Normal):
            return self.normal(dist.mean, dist.sd, size)
        if isinstance(dist, Exponential):
            return self.exponential(dist.rate, size)
        raise ErrorParameter("unsupported distribution spec: {!r}".format(dist))


class SeededStream(_StreamMethods):
    """A keyed Philox stream. Single owner: never draw from one stream on two threads."""

    def __init__(self, seed: int, stream_id: int):
        self.seed = _check_uint64("seed", seed)
        self.stream_id = _check_uint64("stream_id", stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    def __repr__(self):
        return "SeededStream(seed={}, stream_id={})".format(self.seed, self.stream_id)

    def _mantissas(self, size: Size) -> np.ndarray:
        raw = np.asarray(self._bitgen.random_raw(size), dtype=np.uint64)
        return (raw >> _MANTISSA_SHIFT).astype(np.float64)

    def uniform(self, size: Size = None):
        return _scalar_or_array(self._mantissas(size) * _MANTISSA_SCALE, size)

    def open_uniform(self, size: Size = None):
        return _scalar_or_array(self._mantissas(size) * _MANTISSA_SCALE + _HALF_ULP, size)

    def spawn(self, index: int) -> "SeededStream":
        """derive an independent child stream for a numbered sub-task"""
        key = np.random.SeedSequence([self.seed, self.stream_id, _check_uint64("index", index)])
        child_id = int(key.generate_state(1, dtype=np.uint64)[0])
        return SeededStream(self.seed, child_id)


class ReplayStream(_StreamMethods):
    """Serves recorded draws in order.

    Standard-normal and uniform draws are kept in two separate queues, so a
    recorded sequence of proposals and acceptance uniforms can be injected
    into any kernel. Normals are replayed as mean + sd * z.
    """

    seed = None
    stream_id = None

    def __init__(self, normals: Iterable[float] = (), uniforms: Iterable[float] = ()):
        self._normals = [float(z) for z in normals]
        self._uniforms = [float(u) for u in uniforms]

    def _take(self, queue: list, kind: str, size: Size) -> np.ndarray:
        count = 1 if size is None else int(np.prod(size))
        if count > len(queue):
            raise ErrorStreamExhausted(
                "replay stream ran out of {} draws ({} requested, {} left)".format(
                    kind, count, len(queue)
                )
            )
        values = np.array(queue[:count], dtype=np.float64)
        del queue[:count]
        if size is None:
            return values[0]
        return values.reshape(size)

    @property
    def remaining(self) -> Tuple[int, int]:
        return len(self._normals), len(self._uniforms)

    def uniform(self, size: Size = None):
        return _scalar_or_array(self._take(self._uniforms, "uniform", size), size)

    def open_uniform(self, size: Size = None):
        return self.uniform(size)

    def standard_normal(self, size: Size = None):
        return _scalar_or_array(self._take(self._normals, "normal", size), size)

    def spawn(self, index: int) -> "ReplayStream":
        return self


Stream = Union[SeededStream, ReplayStream]


def new_stream(seed: int, stream_id: int = 0) -> SeededStream:
    """create a stream at its initial state"""
    return SeededStream(seed, stream_id)


def replicate_streams(seed: int, count: int) -> Sequence[SeededStream]:
    """one stream per replicate, keyed by (seed, replicate index)"""
    return [SeededStream(seed, index) for index in range(count)]

"""Metropolis-Hastings kernels, the slice sampler, Metropolis-within-Gibbs and the chain runner.

Every MH-family step draws the proposal first and then exactly one uniform,
and accepts iff u < alpha. A rejected step returns the current state object
unchanged, so rejected rows in a Trace repeat the previous row bitwise.
"""
import abc
import functools
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import special, stats

from .errors import ErrorDomain, ErrorInitialization, ErrorNumeric, ErrorParameter, ErrorShape
from .rng import Stream
from .targets import Interval, TargetDensity

logger: structlog.BoundLogger = structlog.getLogger()

SLICE_WIDTH = 1.0
SLICE_MAX_EXPANSIONS = 64
SLICE_MAX_SHRINKS = 200

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ChainState:
    position: np.ndarray
    cached_log_unnorm: float

    @classmethod
    def at(cls, target: TargetDensity, x) -> "ChainState":
        position = target.as_point(x)
        return cls(position=position, cached_log_unnorm=target.log_unnorm(position))


def acceptance_probability(log_ratio: float) -> float:
    """min(1, exp(log_ratio)); nan counts as a zero ratio"""
    if np.isnan(log_ratio):
        return 0.0
    if log_ratio >= 0:
        return 1.0
    return float(np.exp(log_ratio))


class Proposal(abc.ABC):
    """A proposal kernel q(x' | x).

    The coordinate methods are used by Metropolis-within-Gibbs sweeps. By
    default they apply the proposal to the one-dimensional slice x[i].
    """

    symmetric = False
    label = "proposal"

    @abc.abstractmethod
    def sample(self, x: np.ndarray, stream: Stream) -> np.ndarray:
        pass

    @abc.abstractmethod
    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> float:
        """log q(x_to | x_from)"""

    def log_hastings(self, x: np.ndarray, x_new: np.ndarray) -> float:
        """log q(x | x_new) - log q(x_new | x)"""
        if self.symmetric:
            return 0.0
        return self.log_density(x, x_new) - self.log_density(x_new, x)

    def sample_coordinate(self, x: np.ndarray, i: int, stream: Stream) -> float:
        return float(self.sample(x[i : i + 1], stream)[0])

    def log_hastings_coordinate(self, x: np.ndarray, x_new: np.ndarray, i: int) -> float:
        return self.log_hastings(x[i : i + 1], x_new[i : i + 1])


class RandomWalk(Proposal):
    """x' = x + scale * z with z standard normal; scale may be per coordinate"""

    symmetric = True

    def __init__(self, scale):
        self.scale = np.asarray(scale, dtype=np.float64)
        if np.any(~(self.scale > 0)):
            raise ErrorParameter("random walk scale must be positive, got {}".format(scale))
        self.label = "random_walk({})".format(np.array2string(self.scale, precision=4))

    def sample(self, x: np.ndarray, stream: Stream) -> np.ndarray:
        return x + self.scale * stream.standard_normal(x.shape)

    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> float:
        scale = np.broadcast_to(self.scale, np.shape(x_to))
        z = (x_to - x_from) / scale
        return float(np.sum(-0.5 * z * z - np.log(scale) - _LOG_SQRT_2PI))

    def sample_coordinate(self, x: np.ndarray, i: int, stream: Stream) -> float:
        scale = np.broadcast_to(self.scale, x.shape)[i]
        return float(x[i] + scale * stream.standard_normal())


class Independent(Proposal):
    """x' drawn from a fixed law that ignores the current state"""

    def __init__(
        self,
        sampler: Callable[[Stream], np.ndarray],
        log_density: Callable[[np.ndarray], float],
        label: str = "independent",
    ):
        self._sampler = sampler
        self._log_density = log_density
        self.label = label

    @classmethod
    def normal(cls, mean: float = 0.0, sd: float = 1.0) -> "Independent":
        def sampler(stream: Stream) -> np.ndarray:
            return np.array([stream.normal(mean, sd)])

        def log_density(x: np.ndarray) -> float:
            return float(np.sum(stats.norm.logpdf(x, loc=mean, scale=sd)))

        return cls(sampler, log_density, label="independent_normal({:g},{:g})".format(mean, sd))

    def sample(self, x: np.ndarray, stream: Stream) -> np.ndarray:
        return np.asarray(self._sampler(stream), dtype=np.float64).reshape(x.shape)

    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> float:
        return float(self._log_density(x_to))


class TruncatedNormalPositive(Proposal):
    """x' ~ N(x, sigma**2) restricted to (0, inf), drawn by inverse CDF"""

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ErrorParameter("truncated normal sigma must be positive, got {}".format(sigma))
        self.sigma = float(sigma)
        self.label = "truncated_normal_positive({:g})".format(self.sigma)

    def sample(self, x: np.ndarray, stream: Stream) -> np.ndarray:
        mu = float(x[0])
        lower = -mu / self.sigma
        draw = stream.from_ppf(
            lambda u: stats.truncnorm.ppf(u, lower, np.inf, loc=mu, scale=self.sigma)
        )
        return np.array([max(float(draw), np.nextafter(0.0, 1.0))])

    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> float:
        to, frm = float(x_to[0]), float(x_from[0])
        if to <= 0 or frm <= 0:
            return -np.inf
        z = (to - frm) / self.sigma
        return (
            -0.5 * z * z
            - _LOG_SQRT_2PI
            - np.log(self.sigma)
            - float(special.log_ndtr(frm / self.sigma))
        )


class FullConditional(Proposal):
    """Exact draw of one coordinate from its conditional given the others.

    sampler(x, stream) returns the new value of x[coordinate];
    log_density(value, x) is the conditional log-density at value given the
    remaining coordinates of x. Inside an MH step the acceptance ratio is one.
    """

    def __init__(
        self,
        coordinate: int,
        sampler: Callable[[np.ndarray, Stream], float],
        log_density: Callable[[float, np.ndarray], float],
        label: str = "full_conditional",
    ):
        self.coordinate = int(coordinate)
        self._sampler = sampler
        self._log_density = log_density
        self.label = "{}[{}]".format(label, self.coordinate)

    def sample(self, x: np.ndarray, stream: Stream) -> np.ndarray:
        x_new = np.array(x, dtype=np.float64)
        x_new[self.coordinate] = self._sampler(x, stream)
        return x_new

    def log_density(self, x_to: np.ndarray, x_from: np.ndarray) -> float:
        return float(self._log_density(float(x_to[self.coordinate]), x_from))

    def sample_coordinate(self, x: np.ndarray, i: int, stream: Stream) -> float:
        self._check_coordinate(i)
        return float(self._sampler(x, stream))

    def log_hastings_coordinate(self, x: np.ndarray, x_new: np.ndarray, i: int) -> float:
        self._check_coordinate(i)
        return self.log_hastings(x, x_new)

    def _check_coordinate(self, i: int):
        if i != self.coordinate:
            raise ErrorParameter(
                "conditional for coordinate {} used on coordinate {}".format(self.coordinate, i)
            )


def gaussian_full_conditionals(rho: float) -> List[FullConditional]:
    """conditionals of the bivariate standard normal with correlation rho"""
    sd = float(np.sqrt(1.0 - rho * rho))

    def make(i: int) -> FullConditional:
        other = 1 - i

        def sampler(x: np.ndarray, stream: Stream) -> float:
            return stream.normal(rho * x[other], sd)

        def log_density(value: float, x: np.ndarray) -> float:
            return float(stats.norm.logpdf(value, loc=rho * x[other], scale=sd))

        return FullConditional(i, sampler, log_density, label="gaussian_conditional")

    return [make(0), make(1)]


def _propose_and_decide(
    state: ChainState,
    x_new: np.ndarray,
    log_hastings: Callable[[], float],
    target: TargetDensity,
    stream: Stream,
) -> Tuple[ChainState, bool]:
    log_new = target.log_unnorm(x_new)
    if np.isfinite(log_new):
        log_ratio = log_new - state.cached_log_unnorm + log_hastings()
    else:
        log_ratio = -np.inf
    u = stream.uniform()
    if u < acceptance_probability(log_ratio):
        return ChainState(position=x_new, cached_log_unnorm=log_new), True
    return state, False


def mh_step(
    s: ChainState, target: TargetDensity, prop: Proposal, stream: Stream
) -> Tuple[ChainState, bool]:
    """one Metropolis-Hastings step; off-support proposals are rejected"""
    x_new = prop.sample(s.position, stream)
    return _propose_and_decide(
        s, x_new, lambda: prop.log_hastings(s.position, x_new), target, stream
    )


def indep_mh_alpha(
    x_curr: float,
    x_prop: float,
    f_target_log: Callable[[float], float],
    f_prop_log: Callable[[float], float],
    capped: bool = True,
) -> float:
    """[f_Y(x')/f_V(x')] [f_V(x)/f_Y(x)], capped at one unless capped is False"""
    log_ratio = (
        f_target_log(x_prop) - f_prop_log(x_prop) + f_prop_log(x_curr) - f_target_log(x_curr)
    )
    if capped:
        return acceptance_probability(log_ratio)
    return float(np.exp(log_ratio))


class TruncNormAlpha(NamedTuple):
    alpha_full: float
    alpha_simplified: float


def truncnorm_mh_alpha(
    mu_prev: float, mu_prop: float, sigma: float, target: TargetDensity
) -> TruncNormAlpha:
    """Acceptance probability of a move proposed from N+(mu_prev, sigma**2).

    The full form keeps the two normal kernel factors, which cancel; the
    simplified form only keeps the normalising constants of the truncation.
    """
    if not mu_prop > 0:
        raise ErrorDomain("truncated proposal must be positive, got {}".format(mu_prop))
    if not mu_prev > 0:
        raise ErrorDomain("current value must be positive, got {}".format(mu_prev))
    if not sigma > 0:
        raise ErrorParameter("sigma must be positive, got {}".format(sigma))
    log_prev = target.log_unnorm(mu_prev)
    log_prop = target.log_unnorm(mu_prop)
    if not (np.isfinite(log_prev) and np.isfinite(log_prop)):
        raise ErrorDomain("both points must lie in the support of {}".format(target.name))

    log_target_ratio = log_prop - log_prev
    log_truncation = float(special.log_ndtr(mu_prev / sigma) - special.log_ndtr(mu_prop / sigma))
    forward = (mu_prop - mu_prev) / sigma
    backward = (mu_prev - mu_prop) / sigma
    log_kernel = -0.5 * backward * backward + 0.5 * forward * forward
    return TruncNormAlpha(
        alpha_full=acceptance_probability(log_target_ratio + log_kernel + log_truncation),
        alpha_simplified=acceptance_probability(log_target_ratio + log_truncation),
    )


def _check_scalar_target(target: TargetDensity):
    if target.dim != 1:
        raise ErrorShape(
            "slice sampling needs a one-dimensional target, got dim {}".format(target.dim)
        )


def slice_level_set(x_prev: float, target: TargetDensity, u: float) -> Optional[List[Interval]]:
    """{x : p~(x) >= u p~(x_prev)} when the target knows its level sets, else None"""
    _check_scalar_target(target)
    log_prev = target.log_unnorm(x_prev)
    if not np.isfinite(log_prev):
        raise ErrorDomain("slice step started off the support at {}".format(x_prev))
    if target.level_set is None:
        return None
    return target.level_set(log_prev + np.log(u))


def _uniform_on_union(intervals: Sequence[Interval], stream: Stream) -> float:
    lengths = np.array([hi - lo for lo, hi in intervals], dtype=np.float64)
    offset = stream.uniform() * float(np.sum(lengths))
    for (lo, hi), length in zip(intervals, lengths):
        if offset <= length:
            return lo + offset
        offset -= length
    return intervals[-1][1]


def _step_out(x: float, level: float, target: TargetDensity, stream: Stream) -> Interval:
    lo = x - SLICE_WIDTH * stream.uniform()
    hi = lo + SLICE_WIDTH
    left = int(np.floor(SLICE_MAX_EXPANSIONS * stream.uniform()))
    right = SLICE_MAX_EXPANSIONS - 1 - left
    while left > 0 and target.log_unnorm(lo) >= level:
        lo -= SLICE_WIDTH
        left -= 1
    while right > 0 and target.log_unnorm(hi) >= level:
        hi += SLICE_WIDTH
        right -= 1
    return lo, hi


def _shrink(x: float, level: float, bracket: Interval, target: TargetDensity, stream: Stream):
    lo, hi = bracket
    for _ in range(SLICE_MAX_SHRINKS):
        candidate = lo + stream.uniform() * (hi - lo)
        if target.log_unnorm(candidate) >= level:
            return candidate
        if candidate < x:
            lo = candidate
        else:
            hi = candidate
    raise ErrorNumeric(
        "slice shrinkage around {} did not find a point of level {} in {} tries".format(
            x, level, SLICE_MAX_SHRINKS
        )
    )


def slice_step(x_prev: float, target: TargetDensity, stream: Stream) -> float:
    """Draw e ~ U(0,1), then x uniformly on {x : p~(x) >= e p~(x_prev)}.

    Uses the target's analytic level set when it has one, otherwise
    stepping-out and shrinkage bracketing.
    """
    x_prev = float(np.asarray(x_prev).reshape(-1)[0])
    u = stream.open_uniform()
    intervals = slice_level_set(x_prev, target, u)
    if intervals is not None:
        return float(_uniform_on_union(intervals, stream))
    level = target.log_unnorm(x_prev) + np.log(u)
    bracket = _step_out(x_prev, level, target, stream)
    return float(_shrink(x_prev, level, bracket, target, stream))


def mwg_sweep_detailed(
    s: ChainState, target: TargetDensity, per_coord: Sequence[Proposal], stream: Stream
) -> Tuple[ChainState, List[bool]]:
    """fixed-scan sweep over coordinates 0..dim-1, with one acceptance flag per coordinate"""
    if len(per_coord) != target.dim:
        raise ErrorParameter(
            "{} coordinate proposals for a target of dim {}".format(len(per_coord), target.dim)
        )
    state = s
    flags = []
    for i, prop in enumerate(per_coord):
        x = state.position
        x_new = np.array(x, dtype=np.float64)
        x_new[i] = prop.sample_coordinate(x, i, stream)
        state, accepted = _propose_and_decide(
            state,
            x_new,
            functools.partial(prop.log_hastings_coordinate, x, x_new, i),
            target,
            stream,
        )
        flags.append(accepted)
    return state, flags


def mwg_sweep(
    s: ChainState, target: TargetDensity, per_coord: Sequence[Proposal], stream: Stream
) -> ChainState:
    return mwg_sweep_detailed(s, target, per_coord, stream)[0]


class Transition(NamedTuple):
    state: ChainState
    accepted: bool
    divergent: bool = False


class Kernel(abc.ABC):
    """a Markov kernel leaving target invariant, driven by run_chain"""

    target: TargetDensity
    label: str

    def initial_state(self, x0) -> ChainState:
        state = ChainState.at(self.target, x0)
        if not np.isfinite(state.cached_log_unnorm):
            raise ErrorInitialization(
                "starting point {} is outside the support of {}".format(x0, self.target.name)
            )
        return state

    @abc.abstractmethod
    def step(self, state: ChainState, stream: Stream) -> Transition:
        pass


class MetropolisHastingsKernel(Kernel):
    def __init__(self, target: TargetDensity, proposal: Proposal):
        self.target = target
        self.proposal = proposal
        self.label = "mh[{}]".format(proposal.label)

    def step(self, state: ChainState, stream: Stream) -> Transition:
        new_state, accepted = mh_step(state, self.target, self.proposal, stream)
        return Transition(new_state, accepted)


class SliceKernel(Kernel):
    def __init__(self, target: TargetDensity):
        _check_scalar_target(target)
        self.target = target
        self.label = "slice"

    def step(self, state: ChainState, stream: Stream) -> Transition:
        x = slice_step(float(state.position[0]), self.target, stream)
        return Transition(ChainState.at(self.target, x), True)


class GibbsKernel(Kernel):
    """Metropolis-within-Gibbs; a sweep counts as accepted when any coordinate moved"""

    def __init__(self, target: TargetDensity, per_coord: Sequence[Proposal]):
        if len(per_coord) != target.dim:
            raise ErrorParameter(
                "{} coordinate proposals for a target of dim {}".format(len(per_coord), target.dim)
            )
        self.target = target
        self.per_coord = list(per_coord)
        self.label = "gibbs[{}]".format(",".join(p.label for p in self.per_coord))

    def step(self, state: ChainState, stream: Stream) -> Transition:
        new_state, flags = mwg_sweep_detailed(state, self.target, self.per_coord, stream)
        return Transition(new_state, any(flags))


@dataclass(frozen=True)
class Trace:
    """N + 1 states starting at x0; accept_flags[0] is True for the starting value"""

    states: np.ndarray
    accept_flags: np.ndarray
    seed: Tuple[Optional[int], Optional[int]]
    kernel_label: str
    divergent: Optional[np.ndarray] = None

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def acceptance_rate(self) -> float:
        if self.n_steps == 0:
            return 0.0
        return float(np.mean(self.accept_flags[1:]))

    def coordinate(self, i: int = 0) -> np.ndarray:
        return self.states[:, i]


def run_chain(kernel: Kernel, x0, N: int, stream: Stream) -> Trace:
    """run N steps of kernel from x0"""
    if N < 0:
        raise ErrorParameter("chain length must be non-negative, got {}".format(N))
    state = kernel.initial_state(x0)
    states = np.empty((N + 1, kernel.target.dim), dtype=np.float64)
    accept_flags = np.zeros(N + 1, dtype=bool)
    divergent = np.zeros(N + 1, dtype=bool)
    states[0] = state.position
    accept_flags[0] = True
    for t in range(1, N + 1):
        transition = kernel.step(state, stream)
        state = transition.state
        states[t] = state.position
        accept_flags[t] = transition.accepted
        divergent[t] = transition.divergent

    trace = Trace(
        states=states,
        accept_flags=accept_flags,
        seed=(getattr(stream, "seed", None), getattr(stream, "stream_id", None)),
        kernel_label=kernel.label,
        divergent=divergent,
    )
    logger.bind(
        kernel=kernel.label, target=kernel.target.name, n=N, acceptance_rate=trace.acceptance_rate
    ).debug("Chain finished")
    return trace

"""Exact accept-reject sampling, importance sampling and sampling-importance-resampling.

Samplers and densities handed to this module are vectorised: a sampler is
called as sampler(stream, n) and returns an (n, d) array (or (n,) for d = 1),
a log-density maps an (n, d) array to n values.
"""
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
import structlog

from .errors import ErrorDegenerateSample, ErrorEnvelopeViolation, ErrorParameter, ErrorShape
from .rng import Stream
from .targets import TargetDensity

logger: structlog.BoundLogger = structlog.getLogger()

Sampler = Callable[[Stream, int], np.ndarray]
LogDensity = Callable[[np.ndarray], np.ndarray]

# slack on log p(y) <= log M g(y) for rounding in the two log-densities
ENVELOPE_TOLERANCE = 1e-12


def as_points(values) -> np.ndarray:
    """coerce sampler output to an (n, d) float array"""
    points = np.asarray(values, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise ErrorShape("expected an (n, d) array of points, got shape {}".format(points.shape))
    return points


def _log_values(fn: LogDensity, points: np.ndarray) -> np.ndarray:
    values = np.asarray(fn(points), dtype=np.float64).reshape(points.shape[0])
    return np.where(np.isnan(values), -np.inf, values)


@dataclass(frozen=True)
class WeightedSample:
    """points with unnormalised log-weights; -inf marks a zero weight"""

    points: np.ndarray
    log_weights: np.ndarray

    def __post_init__(self):
        if self.points.shape[0] != self.log_weights.shape[0]:
            raise ErrorShape(
                "{} points but {} weights".format(self.points.shape[0], self.log_weights.shape[0])
            )
        if np.any(np.isnan(self.log_weights)) or np.any(np.isposinf(self.log_weights)):
            raise ErrorParameter("log-weights must be finite or -inf")

    def __len__(self) -> int:
        return self.points.shape[0]

    def normalized_weights(self) -> np.ndarray:
        """weights summing to one, computed after subtracting the largest log-weight"""
        if not np.any(np.isfinite(self.log_weights)):
            raise ErrorDegenerateSample("all {} importance weights are zero".format(len(self)))
        shifted = np.exp(self.log_weights - np.max(self.log_weights))
        return shifted / np.sum(shifted)

    def ess(self) -> float:
        w = self.normalized_weights()
        return float(1.0 / np.sum(w * w))


@dataclass(frozen=True)
class AcceptRejectReport:
    accepted: np.ndarray
    proposals_used: int

    @property
    def acceptance_rate(self) -> float:
        if self.proposals_used == 0:
            return 0.0
        return self.accepted.shape[0] / self.proposals_used


def accept_reject(
    p: TargetDensity,
    g_sampler: Sampler,
    g_logdensity: LogDensity,
    M: float,
    n_proposals: int,
    stream: Stream,
) -> AcceptRejectReport:
    """Keep each proposal y ~ g for which u < p~(y) / (M g(y)).

    Draws all proposals first, then one uniform per proposal. Raises
    ErrorEnvelopeViolation on the first proposal where p~(y) > M g(y).
    """
    if not M > 0:
        raise ErrorParameter("envelope constant must be positive, got {}".format(M))
    if n_proposals < 0:
        raise ErrorParameter("number of proposals must be non-negative")

    ys = as_points(g_sampler(stream, n_proposals)).reshape(n_proposals, p.dim)
    log_p = p.log_unnorm_batch(ys)
    log_envelope = np.log(M) + _log_values(g_logdensity, ys)
    with np.errstate(invalid="ignore"):
        log_ratio = np.where(np.isneginf(log_p), -np.inf, log_p - log_envelope)

    violated = log_ratio > ENVELOPE_TOLERANCE
    if np.any(violated):
        first = int(np.argmax(violated))
        raise ErrorEnvelopeViolation(ys[first].tolist(), float(log_ratio[first]))

    u = np.asarray(stream.uniform(n_proposals))
    accepted = ys[u < np.exp(log_ratio)]
    report = AcceptRejectReport(accepted=accepted, proposals_used=n_proposals)
    logger.bind(
        target=p.name, proposals=n_proposals, acceptance_rate=report.acceptance_rate
    ).debug("Accept-reject run finished")
    return report


class ImportanceEstimate(NamedTuple):
    raw_estimate: Optional[float]
    self_normalized: float
    ess: float
    weighted: WeightedSample


def importance_estimate(
    h: Callable[[np.ndarray], np.ndarray],
    q_sampler: Sampler,
    q_logdensity: LogDensity,
    f_log: LogDensity,
    N: int,
    stream: Stream,
    f_normalized: bool = False,
) -> ImportanceEstimate:
    """Importance-sampling estimate of E_f[h(X)] from N draws of q.

    raw_estimate is the plain average of h w and is only returned when f_log is
    a normalised log-density; the self-normalised ratio is always returned.
    """
    if N < 1:
        raise ErrorParameter("importance sampling needs N >= 1, got {}".format(N))

    xs = as_points(q_sampler(stream, N))
    log_f = _log_values(f_log, xs)
    log_q = _log_values(q_logdensity, xs)
    with np.errstate(invalid="ignore"):
        log_w = np.where(np.isneginf(log_f), -np.inf, log_f - log_q)
    weighted = WeightedSample(points=xs, log_weights=log_w)

    if not np.any(np.isfinite(log_w)):
        raise ErrorDegenerateSample("all {} importance weights are zero".format(N))
    shift = np.max(log_w)
    w = np.exp(log_w - shift)
    hv = np.asarray(h(xs), dtype=np.float64).reshape(N)
    hw = np.where(w > 0, hv * w, 0.0)

    total = np.sum(w)
    self_normalized = float(np.sum(hw) / total)
    ess = float(total * total / np.sum(w * w))
    raw_estimate = float(np.exp(shift) * np.mean(hw)) if f_normalized else None
    return ImportanceEstimate(
        raw_estimate=raw_estimate, self_normalized=self_normalized, ess=ess, weighted=weighted
    )


def sir_resample(w: WeightedSample, m: int, stream: Stream) -> np.ndarray:
    """Multinomial resampling of m points with probabilities proportional to the weights.

    The result is only approximately distributed from the target: resampling
    changes the marginal law of the points when N is finite.
    """
    if m < 0:
        raise ErrorParameter("resample size must be non-negative")
    probs = w.normalized_weights()
    cumulative = np.cumsum(probs)
    cumulative /= cumulative[-1]
    u = np.asarray(stream.uniform(m))
    indices = np.minimum(np.searchsorted(cumulative, u, side="right"), len(w) - 1)
    return w.points[indices]


def running_means(values) -> np.ndarray:
    """cumulative averages along the first axis"""
    values = np.asarray(values, dtype=np.float64)
    counts = np.arange(1, values.shape[0] + 1, dtype=np.float64)
    return np.cumsum(values, axis=0) / counts.reshape((-1,) + (1,) * (values.ndim - 1))

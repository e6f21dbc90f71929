"""Chain and sample diagnostics.

The estimators take the series they are given; summarize_trace is the one
place that discards a burn-in before computing them.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import fft, stats

from .errors import ErrorDegenerateSeries, ErrorParameter, ErrorShape
from .mcmc_kernels import Trace

logger: structlog.BoundLogger = structlog.getLogger()

MIN_SERIES_LENGTH = 100
DEFAULT_BURN_IN_FRACTION = 0.1


def _series(trace) -> np.ndarray:
    values = np.asarray(trace, dtype=np.float64)
    if values.ndim != 1:
        raise ErrorShape("expected a scalar series, got shape {}".format(values.shape))
    return values


def autocovariance(trace: Sequence[float], lag: int) -> float:
    """biased (1/N) sample autocovariance at one lag"""
    x = _series(trace)
    n = x.size
    if lag < 0 or lag >= n:
        raise ErrorParameter("lag {} outside [0, {})".format(lag, n))
    centred = x - np.mean(x)
    return float(np.dot(centred[: n - lag], centred[lag:]) / n)


def autocovariances(trace: Sequence[float]) -> np.ndarray:
    """biased sample autocovariances at every lag 0..N-1"""
    x = _series(trace)
    n = x.size
    centred = x - np.mean(x)
    size = fft.next_fast_len(2 * n)
    spectrum = fft.rfft(centred, size)
    return fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / n


def asymptotic_variance(trace: Sequence[float]) -> float:
    """Estimate var(X) + 2 sum_t cov(X_0, X_t) by the initial positive sequence.

    Consecutive autocovariances are summed in pairs, stopping before the first
    pair whose sum is not positive. The first pair is always kept.
    """
    x = _series(trace)
    if x.size < MIN_SERIES_LENGTH:
        raise ErrorParameter(
            "asymptotic variance needs at least {} values, got {}".format(
                MIN_SERIES_LENGTH, x.size
            )
        )
    if np.all(x == x[0]):
        raise ErrorDegenerateSeries("constant series")
    gamma = autocovariances(x)
    n_pairs = gamma.size // 2
    pairs = gamma[0 : 2 * n_pairs : 2] + gamma[1 : 2 * n_pairs : 2]
    non_positive = np.flatnonzero(pairs[1:] <= 0)
    stop = int(non_positive[0]) + 1 if non_positive.size else n_pairs
    estimate = float(-gamma[0] + 2.0 * np.sum(pairs[:stop]))
    if not estimate > 0:
        raise ErrorDegenerateSeries(
            "non-positive asymptotic variance estimate {}".format(estimate)
        )
    return estimate


def ess_chain(trace: Sequence[float]) -> float:
    """N var / asymptotic variance"""
    x = _series(trace)
    return float(x.size * np.var(x) / asymptotic_variance(x))


def ks_statistic(sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    values = _series(sample)
    if values.size == 0:
        raise ErrorShape("KS statistic of an empty sample")
    return float(stats.kstest(values, cdf).statistic)


def ks_critical_value(n_eff: float, alpha: float = 0.01) -> float:
    """asymptotic Kolmogorov critical value at sample size n_eff"""
    if not n_eff > 0:
        raise ErrorParameter("effective sample size must be positive, got {}".format(n_eff))
    return float(stats.kstwobign.isf(alpha) / math.sqrt(n_eff))


def ks_within_band(
    sample: Sequence[float],
    cdf: Callable[[np.ndarray], np.ndarray],
    alpha: float = 0.01,
    n_eff: Optional[float] = None,
) -> bool:
    """KS goodness of fit with the critical value taken at the effective sample size"""
    values = _series(sample)
    n_eff = values.size if n_eff is None else n_eff
    return ks_statistic(values, cdf) <= ks_critical_value(n_eff, alpha)


def ks_two_sample_within_band(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.01,
    n_eff_a: Optional[float] = None,
    n_eff_b: Optional[float] = None,
) -> bool:
    a, b = _series(a), _series(b)
    n_a = a.size if n_eff_a is None else n_eff_a
    n_b = b.size if n_eff_b is None else n_eff_b
    statistic = float(stats.ks_2samp(a, b).statistic)
    return statistic <= ks_critical_value(n_a * n_b / (n_a + n_b), alpha)


def hpd_interval(sample: Sequence[float], level: float) -> Tuple[float, float]:
    """shortest window of the sorted sample holding ceil(level n) points"""
    if not 0 < level < 1:
        raise ErrorParameter("HPD level must lie in (0, 1), got {}".format(level))
    values = np.sort(_series(sample))
    n = values.size
    if n == 0:
        raise ErrorShape("HPD interval of an empty sample")
    if n < 10.0 / (1.0 - level):
        logger.bind(n=n, level=level).warning("Sample too small for a reliable HPD interval")
    k = max(1, int(math.ceil(level * n - 1e-9)))
    widths = values[k - 1 :] - values[: n - k + 1]
    start = int(np.argmin(widths))
    return float(values[start]), float(values[start + k - 1])


@dataclass(frozen=True)
class DiagnosticsReport:
    mean: np.ndarray
    variance: np.ndarray
    acceptance_rate: float
    ess: float
    asymptotic_variance: float
    n: int
    burn_in: int

    def to_key_values(self) -> List[Tuple[str, object]]:
        pairs: List[Tuple[str, object]] = []
        for i, value in enumerate(self.mean):
            pairs.append(("mean_x{}".format(i + 1), float(value)))
        for i, value in enumerate(self.variance):
            pairs.append(("variance_x{}".format(i + 1), float(value)))
        pairs.extend(
            [
                ("acceptance_rate", self.acceptance_rate),
                ("ess", self.ess),
                ("asymptotic_variance", self.asymptotic_variance),
                ("n_kept", self.n),
                ("burn_in", self.burn_in),
            ]
        )
        return pairs


def summarize_trace(
    trace: Trace, burn_in_fraction: float = DEFAULT_BURN_IN_FRACTION, coordinate: int = 0
) -> DiagnosticsReport:
    """moments of every coordinate and ESS of one, after discarding a burn-in"""
    if not 0 <= burn_in_fraction < 1:
        raise ErrorParameter("burn-in fraction must lie in [0, 1), got {}".format(burn_in_fraction))
    burn_in = int(math.floor(burn_in_fraction * trace.states.shape[0]))
    kept = trace.states[burn_in:]
    series = kept[:, coordinate]
    try:
        sigma2 = asymptotic_variance(series)
        ess = float(series.size * np.var(series) / sigma2)
    except (ErrorDegenerateSeries, ErrorParameter) as e:
        logger.bind(kernel=trace.kernel_label, n=series.size).warning(
            "No asymptotic variance for this trace", reason=str(e)
        )
        sigma2, ess = float("nan"), float("nan")
    return DiagnosticsReport(
        mean=np.mean(kept, axis=0),
        variance=np.var(kept, axis=0),
        acceptance_rate=trace.acceptance_rate,
        ess=ess,
        asymptotic_variance=sigma2,
        n=int(kept.shape[0]),
        burn_in=burn_in,
    )

"""Likelihood-free inference: ABC rejection, ABC-MCMC, tolerance selection and model choice.

Models are batched. prior_sampler(stream, n) returns an (n, k) array of
parameters, simulator(thetas, stream) returns n datasets stacked on the first
axis and a summary maps a stack of datasets to an (n, s) array.

Summary distances are Euclidean after dividing each summary component by its
median absolute deviation over prior-predictive simulations (a component
with zero MAD keeps scale one).
"""
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from .errors import (
    ErrorBudgetExhausted,
    ErrorCapability,
    ErrorParameter,
    ErrorShape,
    ErrorUndefinedEstimate,
)
from .mcmc_kernels import Proposal, Trace, acceptance_probability
from .rng import Stream

logger: structlog.BoundLogger = structlog.getLogger()

Summary = Callable[[np.ndarray], np.ndarray]
Distance = Callable[[np.ndarray, np.ndarray], np.ndarray]

PILOT_STREAM_INDEX = 0


@dataclass(frozen=True)
class GenerativeModel:
    prior_sampler: Callable[[Stream, int], np.ndarray]
    simulator: Callable[[np.ndarray, Stream], np.ndarray]
    prior_logdensity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "model"
    data_shape: Tuple[int, ...] = ()

    def draw_prior(self, stream: Stream, n: int) -> np.ndarray:
        thetas = np.asarray(self.prior_sampler(stream, n), dtype=np.float64)
        return thetas.reshape(n, -1)

    def simulate(self, thetas: np.ndarray, stream: Stream) -> np.ndarray:
        data = np.asarray(self.simulator(thetas, stream), dtype=np.float64)
        expected = (thetas.shape[0],) + tuple(self.data_shape)
        if self.data_shape and data.shape != expected:
            raise ErrorShape(
                "{} simulated shape {}, declared {}".format(self.label, data.shape, expected)
            )
        return data

    def log_prior(self, thetas: np.ndarray) -> np.ndarray:
        if self.prior_logdensity is None:
            raise ErrorCapability("model {} has no prior density".format(self.label))
        values = np.asarray(self.prior_logdensity(thetas), dtype=np.float64)
        return np.where(np.isnan(values), -np.inf, values.reshape(thetas.shape[0]))


def euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """row-wise Euclidean distance from each row of a to b"""
    return np.sqrt(np.sum((a - b) ** 2, axis=1))


@dataclass(frozen=True)
class AbcConfig:
    """Exactly one of epsilon (fixed tolerance) or quantile (of simulated distances)."""

    summary: Summary
    epsilon: Optional[float] = None
    quantile: Optional[float] = None
    distance: Optional[Distance] = None
    scale_by_mad: bool = True
    pilot_size: int = 1000
    budget: int = 10**7
    batch_size: int = 10**5

    def __post_init__(self):
        if (self.epsilon is None) == (self.quantile is None):
            raise ErrorParameter("give exactly one of epsilon or quantile")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ErrorParameter("tolerance must be non-negative, got {}".format(self.epsilon))
        if self.quantile is not None and not 0 < self.quantile <= 1:
            raise ErrorParameter("quantile must lie in (0, 1], got {}".format(self.quantile))
        if self.batch_size < 1 or self.budget < 1 or self.pilot_size < 1:
            raise ErrorParameter("batch size, budget and pilot size must be positive")

    @property
    def metric(self) -> Distance:
        return self.distance if self.distance is not None else euclidean


class AbcResult(NamedTuple):
    accepted_thetas: np.ndarray
    distances: np.ndarray
    epsilon_used: float
    n_simulated: int
    summary_scale: np.ndarray

    @property
    def acceptance_rate(self) -> float:
        if self.n_simulated == 0:
            return 0.0
        return self.accepted_thetas.shape[0] / self.n_simulated


def median_mad(data: Sequence[float]) -> Tuple[float, float]:
    """sample median and unscaled median absolute deviation"""
    values = np.asarray(data, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ErrorShape("median_mad needs at least one value")
    median = np.median(values)
    return float(median), float(np.median(np.abs(values - median)))


def select_tolerance(distances: Sequence[float], q: float) -> float:
    """lower empirical q-quantile of the distances (no interpolation)"""
    if not 0 < q <= 1:
        raise ErrorParameter("quantile must lie in (0, 1], got {}".format(q))
    values = np.asarray(distances, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ErrorShape("cannot select a tolerance from no distances")
    return float(np.quantile(values, q, method="lower"))


def identity_summary(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    return data.reshape(data.shape[0], -1)


def sum_summary(data: np.ndarray) -> np.ndarray:
    return identity_summary(data).sum(axis=1, keepdims=True)


def median_mad_summary(data: np.ndarray) -> np.ndarray:
    """(median, mad) of each dataset"""
    flat = identity_summary(data)
    median = np.median(flat, axis=1, keepdims=True)
    mad = np.median(np.abs(flat - median), axis=1, keepdims=True)
    return np.hstack([median, mad])


def mad_scale(summaries: np.ndarray) -> np.ndarray:
    """per-component MAD of a stack of summaries, with zeros replaced by one"""
    median = np.median(summaries, axis=0)
    scale = np.median(np.abs(summaries - median), axis=0)
    return np.where(scale > 0, scale, 1.0)


def _summarize(cfg: AbcConfig, data: np.ndarray) -> np.ndarray:
    return np.asarray(cfg.summary(data), dtype=np.float64).reshape(data.shape[0], -1)


def _observed_summary(cfg: AbcConfig, x_obs) -> np.ndarray:
    return _summarize(cfg, np.asarray(x_obs, dtype=np.float64)[None, ...])[0]


def _distances(cfg: AbcConfig, summaries: np.ndarray, observed: np.ndarray, scale) -> np.ndarray:
    values = np.asarray(cfg.metric(summaries / scale, observed / scale), dtype=np.float64)
    return np.where(np.isnan(values), np.inf, values)


def _simulate_batches(
    model: GenerativeModel, cfg: AbcConfig, n: int, stream: Stream
) -> Tuple[np.ndarray, np.ndarray]:
    thetas, summaries = [], []
    done = 0
    while done < n:
        size = min(cfg.batch_size, n - done)
        batch_thetas = model.draw_prior(stream, size)
        thetas.append(batch_thetas)
        summaries.append(_summarize(cfg, model.simulate(batch_thetas, stream)))
        done += size
        logger.bind(model=model.label, simulated=done, total=n).debug("Simulated batch")
    return np.vstack(thetas), np.vstack(summaries)


def _pilot_scale(model: GenerativeModel, cfg: AbcConfig, stream: Stream) -> np.ndarray:
    _, summaries = _simulate_batches(model, cfg, cfg.pilot_size, stream.spawn(PILOT_STREAM_INDEX))
    return mad_scale(summaries)


def abc_reject(
    model: GenerativeModel, x_obs, cfg: AbcConfig, N: int, stream: Stream
) -> AbcResult:
    """ABC rejection sampler.

    With a fixed epsilon, simulates from prior x simulator until N pairs fall
    within epsilon of the observed summary, failing after cfg.budget
    simulations. With a quantile, simulates N pairs and keeps those whose
    distance is at most the lower q-quantile (ties at the quantile are kept).
    """
    if N < 1:
        raise ErrorParameter("ABC needs N >= 1, got {}".format(N))
    observed = _observed_summary(cfg, x_obs)

    if cfg.quantile is not None:
        thetas, summaries = _simulate_batches(model, cfg, N, stream)
        scale = mad_scale(summaries) if cfg.scale_by_mad else np.ones_like(observed)
        distances = _distances(cfg, summaries, observed, scale)
        epsilon = select_tolerance(distances, cfg.quantile)
        keep = distances <= epsilon
        result = AbcResult(thetas[keep], distances[keep], epsilon, N, scale)
    else:
        scale = _pilot_scale(model, cfg, stream) if cfg.scale_by_mad else np.ones_like(observed)
        result = _abc_reject_fixed(model, observed, cfg, N, stream, scale)

    logger.bind(
        model=model.label,
        accepted=result.accepted_thetas.shape[0],
        n_simulated=result.n_simulated,
        epsilon=result.epsilon_used,
    ).debug("ABC rejection finished")
    return result


def _abc_reject_fixed(
    model: GenerativeModel,
    observed: np.ndarray,
    cfg: AbcConfig,
    N: int,
    stream: Stream,
    scale: np.ndarray,
) -> AbcResult:
    accepted_thetas, accepted_distances = [], []
    count = 0
    n_simulated = 0
    while count < N:
        if n_simulated >= cfg.budget:
            raise ErrorBudgetExhausted(
                "{} acceptances after {} simulations at epsilon={}".format(
                    count, n_simulated, cfg.epsilon
                )
            )
        size = min(cfg.batch_size, cfg.budget - n_simulated)
        thetas = model.draw_prior(stream, size)
        summaries = _summarize(cfg, model.simulate(thetas, stream))
        distances = _distances(cfg, summaries, observed, scale)
        hits = np.flatnonzero(distances <= cfg.epsilon)
        needed = N - count
        if hits.size >= needed:
            hits = hits[:needed]
            n_simulated += int(hits[-1]) + 1
        else:
            n_simulated += size
        accepted_thetas.append(thetas[hits])
        accepted_distances.append(distances[hits])
        count += hits.size
    return AbcResult(
        np.vstack(accepted_thetas),
        np.concatenate(accepted_distances),
        float(cfg.epsilon),
        n_simulated,
        scale,
    )


def abc_mcmc(
    model: GenerativeModel,
    x_obs,
    cfg: AbcConfig,
    proposal: Proposal,
    N: int,
    stream: Stream,
) -> Trace:
    """Likelihood-free MCMC at a fixed tolerance.

    Starts from one abc_reject acceptance. Each step draws theta' from the
    proposal, then z' from the simulator, then u; the move is accepted iff
    z' lies within epsilon and u <= pi(theta') K(theta|theta') / pi(theta) K(theta'|theta).
    A rejected step keeps (theta, z).
    """
    if cfg.epsilon is None:
        raise ErrorParameter("ABC-MCMC needs a fixed tolerance, not a quantile")
    if model.prior_logdensity is None:
        raise ErrorCapability("ABC-MCMC needs the prior density of {}".format(model.label))
    if N < 0:
        raise ErrorParameter("chain length must be non-negative, got {}".format(N))

    observed = _observed_summary(cfg, x_obs)
    start = abc_reject(model, x_obs, cfg, 1, stream)
    theta = start.accepted_thetas[0]
    log_prior = float(model.log_prior(theta[None, :])[0])

    states = np.empty((N + 1, theta.size), dtype=np.float64)
    accept_flags = np.zeros(N + 1, dtype=bool)
    states[0] = theta
    accept_flags[0] = True
    for t in range(1, N + 1):
        theta_new = np.asarray(proposal.sample(theta, stream), dtype=np.float64)
        log_prior_new = float(model.log_prior(theta_new[None, :])[0])
        accepted = False
        if np.isfinite(log_prior_new):
            summary_new = _summarize(cfg, model.simulate(theta_new[None, :], stream))
            distance = _distances(cfg, summary_new, observed, start.summary_scale)[0]
            log_ratio = log_prior_new - log_prior + proposal.log_hastings(theta, theta_new)
            u = stream.uniform()
            accepted = distance <= cfg.epsilon and u <= acceptance_probability(log_ratio)
        else:
            stream.uniform()
        if accepted:
            theta, log_prior = theta_new, log_prior_new
        states[t] = theta
        accept_flags[t] = accepted

    trace = Trace(
        states=states,
        accept_flags=accept_flags,
        seed=(getattr(stream, "seed", None), getattr(stream, "stream_id", None)),
        kernel_label="abc_mcmc[{}]".format(proposal.label),
    )
    logger.bind(model=model.label, n=N, acceptance_rate=trace.acceptance_rate).debug(
        "ABC-MCMC chain finished"
    )
    return trace


class ModelChoice(NamedTuple):
    bayes_factor: float
    posterior_prob1: float
    accepted: Tuple[int, int]
    simulated: Tuple[int, int]
    epsilon_used: float


def abc_model_choice(
    m1: GenerativeModel,
    m2: GenerativeModel,
    prior_prob1: float,
    x_obs,
    cfg: AbcConfig,
    N_total: int,
    stream: Stream,
    sim_prob1: Optional[float] = None,
) -> ModelChoice:
    """Joint ABC over the model index.

    Each simulation picks model 1 with probability sim_prob1 (default
    prior_prob1). The Bayes factor is (acc1 / sim1) / (acc2 / sim2): the
    ratio of acceptance frequencies corrected by the simulation frequencies.
    """
    if not 0 < prior_prob1 < 1:
        raise ErrorParameter("prior probability must lie in (0, 1), got {}".format(prior_prob1))
    sim_prob1 = prior_prob1 if sim_prob1 is None else sim_prob1
    if not 0 < sim_prob1 < 1:
        raise ErrorParameter("simulation frequency must lie in (0, 1), got {}".format(sim_prob1))

    observed = _observed_summary(cfg, x_obs)
    pick_first = np.asarray(stream.uniform(N_total)) < sim_prob1
    sim1 = int(np.sum(pick_first))
    sim2 = N_total - sim1
    if sim1 == 0 or sim2 == 0:
        raise ErrorUndefinedEstimate("one of the models was never simulated")

    _, summaries1 = _simulate_batches(m1, cfg, sim1, stream)
    _, summaries2 = _simulate_batches(m2, cfg, sim2, stream)
    pooled = np.vstack([summaries1, summaries2])
    scale = mad_scale(pooled) if cfg.scale_by_mad else np.ones_like(observed)
    distances1 = _distances(cfg, summaries1, observed, scale)
    distances2 = _distances(cfg, summaries2, observed, scale)
    if cfg.quantile is not None:
        epsilon = select_tolerance(np.concatenate([distances1, distances2]), cfg.quantile)
    else:
        epsilon = float(cfg.epsilon)

    acc1 = int(np.sum(distances1 <= epsilon))
    acc2 = int(np.sum(distances2 <= epsilon))
    if acc1 == 0 or acc2 == 0:
        empty = m1.label if acc1 == 0 else m2.label
        raise ErrorUndefinedEstimate("no acceptances for {} at epsilon={}".format(empty, epsilon))
    bayes_factor = (acc1 / sim1) / (acc2 / sim2)
    odds = bayes_factor * prior_prob1 / (1.0 - prior_prob1)
    logger.bind(
        models=(m1.label, m2.label), accepted=(acc1, acc2), bayes_factor=bayes_factor
    ).debug("ABC model choice finished")
    return ModelChoice(bayes_factor, odds / (1.0 + odds), (acc1, acc2), (sim1, sim2), epsilon)


def abc_bayes_factor(
    m1: GenerativeModel,
    m2: GenerativeModel,
    prior_prob1: float,
    x_obs,
    cfg: AbcConfig,
    N_total: int,
    stream: Stream,
    sim_prob1: Optional[float] = None,
) -> float:
    """ABC estimate of the Bayes factor B12"""
    return abc_model_choice(
        m1, m2, prior_prob1, x_obs, cfg, N_total, stream, sim_prob1=sim_prob1
    ).bayes_factor


def _uniform_matrix(stream: Stream, n: int, m: int) -> np.ndarray:
    return np.asarray(stream.open_uniform((n, m)))


def bernoulli_model(n_obs: int = 5, a: float = 1.0, b: float = 1.0) -> GenerativeModel:
    """n_obs Bernoulli(theta) draws with a Beta(a, b) prior"""
    prior = stats.beta(a, b)

    def prior_sampler(stream: Stream, n: int) -> np.ndarray:
        return np.asarray(stream.from_ppf(prior.ppf, (n, 1)))

    def simulator(thetas: np.ndarray, stream: Stream) -> np.ndarray:
        return (np.asarray(stream.uniform((thetas.shape[0], n_obs))) < thetas).astype(np.float64)

    def prior_logdensity(thetas: np.ndarray) -> np.ndarray:
        return prior.logpdf(thetas[:, 0])

    return GenerativeModel(
        prior_sampler, simulator, prior_logdensity, "bernoulli({})".format(n_obs), (n_obs,)
    )


def two_point_binomial_model(
    values: Tuple[float, float] = (0.3, 0.7),
    probs: Tuple[float, float] = (0.4, 0.6),
    trials: int = 5,
) -> GenerativeModel:
    """theta takes one of two values; one Binomial(trials, theta) observation"""
    values = tuple(float(v) for v in values)
    first = float(probs[0]) / float(probs[0] + probs[1])

    def prior_sampler(stream: Stream, n: int) -> np.ndarray:
        pick = np.asarray(stream.uniform((n, 1))) < first
        return np.where(pick, values[0], values[1])

    def simulator(thetas: np.ndarray, stream: Stream) -> np.ndarray:
        u = _uniform_matrix(stream, thetas.shape[0], 1)
        return stats.binom.ppf(u, trials, thetas)

    def prior_logdensity(thetas: np.ndarray) -> np.ndarray:
        t = thetas[:, 0]
        with np.errstate(divide="ignore"):
            return np.log(
                np.where(t == values[0], first, 0.0) + np.where(t == values[1], 1.0 - first, 0.0)
            )

    return GenerativeModel(prior_sampler, simulator, prior_logdensity, "two_point_binomial", (1,))


def normal_location_model(
    n_obs: int = 50, sd: float = 1.0, low: float = -10.0, high: float = 10.0
) -> GenerativeModel:
    """n_obs N(theta, sd**2) draws with a uniform prior on (low, high)"""

    def prior_sampler(stream: Stream, n: int) -> np.ndarray:
        return low + (high - low) * np.asarray(stream.uniform((n, 1)))

    def simulator(thetas: np.ndarray, stream: Stream) -> np.ndarray:
        return thetas + sd * np.asarray(stream.standard_normal((thetas.shape[0], n_obs)))

    def prior_logdensity(thetas: np.ndarray) -> np.ndarray:
        t = thetas[:, 0]
        return np.where((t >= low) & (t < high), -np.log(high - low), -np.inf)

    return GenerativeModel(
        prior_sampler, simulator, prior_logdensity, "normal_location({})".format(n_obs), (n_obs,)
    )


def poisson_model(n_obs: int = 10, shape: float = 1.0, rate: float = 1.0) -> GenerativeModel:
    """n_obs Poisson(lambda) counts with a Gamma(shape, rate) prior"""
    prior = stats.gamma(shape, scale=1.0 / rate)

    def prior_sampler(stream: Stream, n: int) -> np.ndarray:
        return np.asarray(stream.from_ppf(prior.ppf, (n, 1)))

    def simulator(thetas: np.ndarray, stream: Stream) -> np.ndarray:
        u = _uniform_matrix(stream, thetas.shape[0], n_obs)
        return stats.poisson.ppf(u, thetas)

    def prior_logdensity(thetas: np.ndarray) -> np.ndarray:
        return prior.logpdf(thetas[:, 0])

    return GenerativeModel(
        prior_sampler, simulator, prior_logdensity, "poisson({})".format(n_obs), (n_obs,)
    )


def geometric_model(n_obs: int = 10, a: float = 1.0, b: float = 1.0) -> GenerativeModel:
    """n_obs geometric failure counts (support 0, 1, ...) with a Beta(a, b) prior on p"""
    prior = stats.beta(a, b)

    def prior_sampler(stream: Stream, n: int) -> np.ndarray:
        return np.asarray(stream.from_ppf(prior.ppf, (n, 1)))

    def simulator(thetas: np.ndarray, stream: Stream) -> np.ndarray:
        u = _uniform_matrix(stream, thetas.shape[0], n_obs)
        return np.floor(np.log(u) / np.log1p(-thetas))

    def prior_logdensity(thetas: np.ndarray) -> np.ndarray:
        return prior.logpdf(thetas[:, 0])

    return GenerativeModel(
        prior_sampler, simulator, prior_logdensity, "geometric({})".format(n_obs), (n_obs,)
    )

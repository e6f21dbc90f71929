"""Registry of reproducible experiments.

Each experiment is fully determined by its ExperimentSpec and writes
<name>.csv and <name>.summary.txt into the output directory. Nothing
time- or machine-dependent is written, so identical specs give identical
bytes.
"""
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import special, stats

from . import abc, classic_mc, diagnostics, hmc, mcmc_kernels, serialize, targets
from .errors import ErrorInitialization, ErrorLookup, ErrorParameter
from .rng import UINT64_MAX, ReplayStream, SeededStream

logger: structlog.BoundLogger = structlog.getLogger()

SummaryPairs = List[Tuple[str, object]]

IS_REPLICATES = 100
IS_RECORD_EVERY = 10
SIR_DESK_N = 10**5
SIR_FULL_N = 10**7
SIR_RESAMPLE = 10**4

# reference independent Metropolis trace: proposals from N(0,1), target N(1,1), X0 = 0
WORKED_NORMALS = (0.45735433, -0.99178415, -1.08312586, -0.85762451, 0.92186197, -0.50442298)
WORKED_UNIFORMS = (0.441328, 0.987837, 0.386258, 0.316593, 0.195910, 0.2772669)

ARTIFICIAL18_EPS = 0.01
ARTIFICIAL18_STEPS = 20
ARTIFICIAL18_ITERATIONS = 1000
ABC_OBSERVED_THETA = 1.0
ABC_OBSERVATIONS = 50


@dataclass(frozen=True)
class ExperimentSpec:
    """Unset (None) parameters fall back to the experiment's defaults."""

    name: str
    seed: int = 1
    n: Optional[int] = None
    eps: Optional[float] = None
    steps: Optional[int] = None
    scale: Optional[float] = None
    quantile: Optional[float] = None
    out: Path = field(default=Path("."), compare=False)
    full: bool = False
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) <= UINT64_MAX:
            raise ErrorParameter("seed must be a 64-bit unsigned integer, got {}".format(self.seed))
        if self.n is not None and self.n < 1:
            raise ErrorParameter("n must be at least 1, got {}".format(self.n))
        if self.eps is not None and not self.eps > 0:
            raise ErrorParameter("eps must be positive, got {}".format(self.eps))
        if self.steps is not None and self.steps < 1:
            raise ErrorParameter("steps must be at least 1, got {}".format(self.steps))
        if self.scale is not None and not self.scale > 0:
            raise ErrorParameter("scale must be positive, got {}".format(self.scale))
        if self.quantile is not None and not 0 < self.quantile <= 1:
            raise ErrorParameter("quantile must lie in (0, 1], got {}".format(self.quantile))
        if self.workers < 1:
            raise ErrorParameter("workers must be at least 1, got {}".format(self.workers))

    def stream(self, stream_id: int = 0) -> SeededStream:
        return SeededStream(self.seed, stream_id)

    def get(self, key: str, default):
        value = getattr(self, key)
        return default if value is None else value


@dataclass(frozen=True)
class ExperimentOutput:
    write_csv: Callable[[Path], Path]
    summary: SummaryPairs


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    runner: Callable[[ExperimentSpec], ExperimentOutput]


REGISTRY: Dict[str, Experiment] = {}


def experiment(name: str, description: str):
    """register a runner under name; registration order is listing order"""

    def register(runner: Callable[[ExperimentSpec], ExperimentOutput]):
        REGISTRY[name] = Experiment(name, description, runner)
        return runner

    return register


def list_experiments() -> List[Experiment]:
    return list(REGISTRY.values())


def experiment_names() -> List[str]:
    return list(REGISTRY.keys())


def lookup(name: str) -> Experiment:
    if name not in REGISTRY:
        raise ErrorLookup(
            "unknown experiment {!r}; known experiments: {}".format(
                name, ", ".join(experiment_names())
            )
        )
    return REGISTRY[name]


def _table_writer(header: Sequence[str], rows) -> Callable[[Path], Path]:
    return functools.partial(serialize.write_table, header=header, rows=rows)


def _trace_writer(trace: mcmc_kernels.Trace, divergent: bool = False) -> Callable[[Path], Path]:
    return functools.partial(serialize.write_trace, trace=trace, divergent=divergent)


def _chain_fit(trace: mcmc_kernels.Trace, cdf) -> SummaryPairs:
    """diagnostics plus a KS check whose critical value uses the chain ESS"""
    report = diagnostics.summarize_trace(trace)
    kept = trace.states[report.burn_in :, 0]
    statistic = diagnostics.ks_statistic(kept, cdf)
    n_eff = report.ess if np.isfinite(report.ess) and report.ess > 0 else report.n
    critical = diagnostics.ks_critical_value(n_eff)
    return report.to_key_values() + [
        ("ks_statistic", statistic),
        ("ks_critical_0.01", critical),
        ("ks_within_band", statistic <= critical),
    ]


def _exponential_curve(q_rate: float, f_rate: float, n: int, stream: SeededStream) -> np.ndarray:
    """running raw IS estimate of E[X] under E(f_rate) from E(q_rate) draws"""
    estimate = classic_mc.importance_estimate(
        h=lambda x: x[:, 0],
        q_sampler=lambda s, size: s.exponential(q_rate, size=(size, 1)),
        q_logdensity=lambda x: stats.expon.logpdf(x[:, 0], scale=1.0 / q_rate),
        f_log=lambda x: stats.expon.logpdf(x[:, 0], scale=1.0 / f_rate),
        N=n,
        stream=stream,
        f_normalized=True,
    )
    weighted = estimate.weighted
    return classic_mc.running_means(weighted.points[:, 0] * np.exp(weighted.log_weights))


def _map_replicates(fn: Callable[[int], np.ndarray], count: int, workers: int) -> List[np.ndarray]:
    if workers == 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


@experiment("is_infinite_variance", "importance sampling E(0.1) from E(1): infinite variance")
def is_infinite_variance(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**4)
    if n < IS_RECORD_EVERY:
        raise ErrorParameter("n must be at least {}".format(IS_RECORD_EVERY))
    curves = _map_replicates(
        lambda r: _exponential_curve(1.0, 0.1, n, spec.stream(r)), IS_REPLICATES, spec.workers
    )
    reversed_curves = _map_replicates(
        lambda r: _exponential_curve(0.1, 1.0, n, spec.stream(IS_REPLICATES + r)),
        IS_REPLICATES,
        spec.workers,
    )
    finals = np.array([c[-1] for c in curves])
    reversed_finals = np.array([c[-1] for c in reversed_curves])
    spread = float(np.std(finals, ddof=1))
    reversed_spread = float(np.std(reversed_finals, ddof=1))

    steps = np.arange(IS_RECORD_EVERY, n + 1, IS_RECORD_EVERY)
    header = ["step"] + ["rep{}".format(r + 1) for r in range(IS_REPLICATES)]
    rows = [[int(step)] + [float(c[step - 1]) for c in curves] for step in steps]
    summary = [
        ("n", n),
        ("replicates", IS_REPLICATES),
        ("true_value", 10.0),
        ("mean_final_estimate", float(np.mean(finals))),
        ("sd_final_estimate", spread),
        ("reversed_true_value", 1.0),
        ("reversed_sd_final_estimate", reversed_spread),
        ("spread_ratio", spread / reversed_spread),
    ]
    return ExperimentOutput(_table_writer(header, rows), summary)


def _sir_from_standard_normal(
    spec: ExperimentSpec, target: targets.TargetDensity
) -> Tuple[np.ndarray, classic_mc.ImportanceEstimate, int]:
    n = spec.get("n", SIR_FULL_N if spec.full else SIR_DESK_N)
    stream = spec.stream()
    estimate = classic_mc.importance_estimate(
        h=lambda x: x[:, 0],
        q_sampler=lambda s, size: s.standard_normal((size, 1)),
        q_logdensity=lambda x: stats.norm.logpdf(x[:, 0]),
        f_log=target.log_unnorm_batch,
        N=n,
        stream=stream,
    )
    resampled = classic_mc.sir_resample(estimate.weighted, SIR_RESAMPLE, stream)[:, 0]
    return resampled, estimate, n


@experiment("sir_student", "SIR of a shifted Student t5 from N(0,1): failure")
def sir_student(spec: ExperimentSpec) -> ExperimentOutput:
    resampled, estimate, n = _sir_from_standard_normal(spec, targets.student_t(5.0, 3.0))
    summary = [
        ("n", n),
        ("m", SIR_RESAMPLE),
        ("target_mean", 3.0),
        ("resampled_mean", float(np.mean(resampled))),
        ("self_normalized_mean", estimate.self_normalized),
        ("ess", estimate.ess),
    ]
    return ExperimentOutput(_table_writer(["x"], ([v] for v in resampled)), summary)


@experiment("sir_normal", "SIR of N(2, 1/2) from N(0,1): recovery")
def sir_normal(spec: ExperimentSpec) -> ExperimentOutput:
    sd = 1.0 / np.sqrt(2.0)
    resampled, estimate, n = _sir_from_standard_normal(spec, targets.normal(2.0, sd))
    n_eff = 1.0 / (1.0 / SIR_RESAMPLE + 1.0 / estimate.ess)
    statistic = diagnostics.ks_statistic(resampled, stats.norm(2.0, sd).cdf)
    critical = diagnostics.ks_critical_value(n_eff)
    summary = [
        ("n", n),
        ("m", SIR_RESAMPLE),
        ("resampled_mean", float(np.mean(resampled))),
        ("resampled_sd", float(np.std(resampled))),
        ("ess", estimate.ess),
        ("ks_statistic", statistic),
        ("ks_critical_0.01", critical),
        ("ks_within_band", statistic <= critical),
    ]
    return ExperimentOutput(_table_writer(["x"], ([v] for v in resampled)), summary)


@experiment("ar_beta", "accept-reject Be(3.3, 4.4) from uniform proposals")
def ar_beta(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**6)
    # x^2.3 (1-x)^3.4 is the Be(3.3, 4.4) density up to a constant, bounded by 1
    target = targets.beta_unnorm(2.3, 3.4)
    report = classic_mc.accept_reject(
        target,
        g_sampler=lambda s, size: s.uniform((size, 1)),
        g_logdensity=lambda y: np.zeros(y.shape[0]),
        M=1.0,
        n_proposals=n,
        stream=spec.stream(),
    )
    accepted = report.accepted[:, 0]
    summary = [
        ("n_proposals", n),
        ("n_accepted", int(accepted.size)),
        ("acceptance_rate", report.acceptance_rate),
        ("expected_acceptance_rate", float(special.beta(3.3, 4.4))),
    ]
    if accepted.size:
        statistic = diagnostics.ks_statistic(accepted, stats.beta(3.3, 4.4).cdf)
        summary.append(("ks_statistic", statistic))
    return ExperimentOutput(_table_writer(["x"], ([v] for v in accepted)), summary)


@experiment("slice_normal", "slice sampler on N(0,1) from x0 = 0")
def slice_normal(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**4)
    kernel = mcmc_kernels.SliceKernel(targets.std_normal())
    trace = mcmc_kernels.run_chain(kernel, [0.0], n, spec.stream())
    summary = [("n", n)] + _chain_fit(trace, stats.norm.cdf)
    return ExperimentOutput(_trace_writer(trace), summary)


def replay_worked_trace() -> Tuple[mcmc_kernels.Trace, List[float]]:
    """the reference independent Metropolis trace, with its uncapped acceptance ratios"""
    kernel = mcmc_kernels.MetropolisHastingsKernel(
        targets.normal(1.0, 1.0), mcmc_kernels.Independent.normal(0.0, 1.0)
    )
    stream = ReplayStream(normals=WORKED_NORMALS, uniforms=WORKED_UNIFORMS)
    trace = mcmc_kernels.run_chain(kernel, [0.0], len(WORKED_NORMALS), stream)
    target_log = stats.norm(1.0, 1.0).logpdf
    ratios = [
        mcmc_kernels.indep_mh_alpha(
            trace.states[t, 0], proposal, target_log, stats.norm.logpdf, capped=False
        )
        for t, proposal in enumerate(WORKED_NORMALS)
    ]
    return trace, ratios


@experiment("indep_mh", "independent Metropolis, N(0,1) proposal for N(1,1)")
def indep_mh(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 1000)
    worked, ratios = replay_worked_trace()
    kernel = mcmc_kernels.MetropolisHastingsKernel(
        targets.normal(1.0, 1.0), mcmc_kernels.Independent.normal(0.0, 1.0)
    )
    trace = mcmc_kernels.run_chain(kernel, [0.0], n, spec.stream())
    decisions = ["accept" if a else "reject" for a in worked.accept_flags[1:]]
    summary = [
        ("worked_ratios", ratios),
        ("worked_decisions", ",".join(decisions)),
        ("n", n),
    ] + _chain_fit(trace, stats.norm(1.0, 1.0).cdf)
    return ExperimentOutput(_trace_writer(trace), summary)


@experiment("trunc_proposal_mh", "MH on the log-bump target with a truncated normal proposal")
def trunc_proposal_mh(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**4)
    sigma = spec.get("scale", 0.1)
    target = targets.log_bump()
    kernel = mcmc_kernels.MetropolisHastingsKernel(
        target, mcmc_kernels.TruncatedNormalPositive(sigma)
    )
    trace = mcmc_kernels.run_chain(kernel, [3.0], n, spec.stream())
    moves = np.flatnonzero(trace.accept_flags[1:]) + 1
    gaps = [
        abs(alpha.alpha_full - alpha.alpha_simplified)
        for alpha in (
            mcmc_kernels.truncnorm_mh_alpha(
                trace.states[t - 1, 0], trace.states[t, 0], sigma, target
            )
            for t in moves
        )
    ]
    report = diagnostics.summarize_trace(trace)
    summary = [
        ("n", n),
        ("sigma", sigma),
        ("max_alpha_identity_gap", max(gaps) if gaps else 0.0),
    ] + report.to_key_values()
    return ExperimentOutput(_trace_writer(trace), summary)


@experiment("rw_truncated_target", "random-walk MH on N(4,1) truncated to (0,1)")
def rw_truncated_target(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**5)
    scale = spec.get("scale", 0.1)
    kernel = mcmc_kernels.MetropolisHastingsKernel(
        targets.trunc_normal_target(), mcmc_kernels.RandomWalk(scale)
    )
    trace = mcmc_kernels.run_chain(kernel, [0.5], n, spec.stream())
    truncated = stats.truncnorm(-4.0, -3.0, loc=4.0, scale=1.0)
    summary = [("n", n), ("scale", scale)] + _chain_fit(trace, truncated.cdf)
    return ExperimentOutput(_trace_writer(trace), summary)


@experiment("hmc_normal", "HMC on N(0,1) and on the 18-dimensional artificial target")
def hmc_normal(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**4)
    eps = spec.get("eps", 0.1)
    steps = spec.get("steps", 10)
    kernel = hmc.HamiltonianKernel(targets.std_normal(), eps, steps)
    trace = mcmc_kernels.run_chain(kernel, [0.0], n, spec.stream())

    artificial = targets.artificial18()
    artificial_trace = mcmc_kernels.run_chain(
        hmc.HamiltonianKernel(artificial, ARTIFICIAL18_EPS, ARTIFICIAL18_STEPS),
        np.full(artificial.dim, targets.ARTIFICIAL18_DEFAULT_OBSERVATION),
        ARTIFICIAL18_ITERATIONS,
        spec.stream(1),
    )
    summary = (
        [("n", n), ("eps", eps), ("steps", steps)]
        + _chain_fit(trace, stats.norm.cdf)
        + [
            ("divergences", int(np.sum(trace.divergent))),
            ("artificial18_eps", ARTIFICIAL18_EPS),
            ("artificial18_steps", ARTIFICIAL18_STEPS),
            ("artificial18_iterations", ARTIFICIAL18_ITERATIONS),
            ("artificial18_acceptance_rate", artificial_trace.acceptance_rate),
            ("artificial18_divergences", int(np.sum(artificial_trace.divergent))),
        ]
    )
    return ExperimentOutput(_trace_writer(trace, divergent=True), summary)


@experiment("abc_normal", "ABC rejection for a normal mean with (median, mad) summaries")
def abc_normal(spec: ExperimentSpec) -> ExperimentOutput:
    n = spec.get("n", 10**6)
    quantile = spec.get("quantile", 0.01)
    observed = ABC_OBSERVED_THETA + np.asarray(spec.stream(1).standard_normal(ABC_OBSERVATIONS))
    observed_median, observed_mad = abc.median_mad(observed)
    cfg = abc.AbcConfig(summary=abc.median_mad_summary, quantile=quantile)
    model = abc.normal_location_model(ABC_OBSERVATIONS)
    result = abc.abc_reject(model, observed, cfg, n, spec.stream())
    thetas = result.accepted_thetas[:, 0]
    summary = (
        [
            ("n", n),
            ("quantile", quantile),
            ("observed_theta", ABC_OBSERVED_THETA),
            ("observed_median", observed_median),
            ("observed_mad", observed_mad),
        ]
        + serialize.abc_summary(result)
        + [
            ("posterior_mean", float(np.mean(thetas))),
            ("posterior_sd", float(np.std(thetas))),
            ("hpd_0.95", diagnostics.hpd_interval(thetas, 0.95)),
        ]
    )
    return ExperimentOutput(functools.partial(serialize.write_abc_result, result=result), summary)


def run_experiment(spec: ExperimentSpec) -> Tuple[Path, Path]:
    """run one registered experiment and write its CSV and summary files"""
    entry = lookup(spec.name)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    log = logger.bind(experiment=spec.name, seed=spec.seed, out=str(out))
    log.info("Running experiment")

    output = entry.runner(spec)
    csv_path = output.write_csv(out / "{}.csv".format(spec.name))
    summary_path = serialize.write_summary(
        out / "{}.summary.txt".format(spec.name),
        [("experiment", spec.name), ("seed", spec.seed), ("full", spec.full)] + output.summary,
    )
    log.bind(csv=str(csv_path), summary=str(summary_path)).info("Experiment finished")
    return csv_path, summary_path


KERNELS = ("rw", "slice", "hmc", "tnmh")


def default_start(target: targets.TargetDensity) -> np.ndarray:
    """the first of 0, 0.5, 1 (in every coordinate) inside the support"""
    for value in (0.0, 0.5, 1.0):
        point = np.full(target.dim, value)
        if target.in_support(point):
            return point
    raise ErrorInitialization("no default starting point for {}; pass x0".format(target.name))


def make_kernel(
    kind: str,
    target: targets.TargetDensity,
    scale: float = 1.0,
    eps: float = 0.1,
    steps: int = 10,
) -> mcmc_kernels.Kernel:
    if kind == "rw":
        return mcmc_kernels.MetropolisHastingsKernel(target, mcmc_kernels.RandomWalk(scale))
    if kind == "slice":
        return mcmc_kernels.SliceKernel(target)
    if kind == "hmc":
        return hmc.HamiltonianKernel(target, eps, steps)
    if kind == "tnmh":
        return mcmc_kernels.MetropolisHastingsKernel(
            target, mcmc_kernels.TruncatedNormalPositive(scale)
        )
    raise ErrorLookup("unknown kernel {!r}; known kernels: {}".format(kind, ", ".join(KERNELS)))


def sample_target(
    target_name: str,
    params: Sequence[float],
    kind: str,
    n: int,
    seed: int,
    scale: float = 1.0,
    eps: float = 0.1,
    steps: int = 10,
    x0: Optional[Sequence[float]] = None,
) -> mcmc_kernels.Trace:
    """run one chain of the chosen kernel on a catalog target"""
    target = targets.builtin(target_name, params)
    kernel = make_kernel(kind, target, scale=scale, eps=eps, steps=steps)
    start = default_start(target) if x0 is None else np.asarray(x0, dtype=np.float64)
    logger.bind(target=target.name, kernel=kernel.label, n=n, seed=seed).info("Sampling")
    return mcmc_kernels.run_chain(kernel, start, n, SeededStream(seed, 0))

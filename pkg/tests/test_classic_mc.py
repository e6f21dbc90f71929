import numpy as np
import pytest
from scipy import integrate, stats

from mcforge import classic_mc, diagnostics, targets
from mcforge.errors import ErrorDegenerateSample, ErrorEnvelopeViolation, ErrorParameter


def uniform_sampler(stream, n):
    return stream.uniform(n)


def uniform_logdensity(x):
    return np.zeros(x.shape[0])


def test_identical_target_and_envelope_accepts_everything(stream):
    report = classic_mc.accept_reject(
        targets.beta_unnorm(0, 0), uniform_sampler, uniform_logdensity, 1.0, 1000, stream
    )
    assert report.accepted.shape == (1000, 1)
    assert report.acceptance_rate == 1.0


def test_beta_accept_reject(stream):
    report = classic_mc.accept_reject(
        targets.beta_unnorm(2.3, 3.4), uniform_sampler, uniform_logdensity, 1.0, 100000, stream
    )
    expected, _ = integrate.quad(lambda x: x**2.3 * (1 - x) ** 3.4, 0, 1)
    sd = np.sqrt(expected * (1 - expected) / 100000)
    assert abs(report.acceptance_rate - expected) < 4 * sd
    assert diagnostics.ks_within_band(report.accepted[:, 0], stats.beta(3.3, 4.4).cdf)


def test_half_normal_from_exponential_envelope(stream):
    def sampler(s, n):
        return s.exponential(1.0, n)

    def logdensity(x):
        return -x[:, 0]

    report = classic_mc.accept_reject(
        targets.half_normal(), sampler, logdensity, np.exp(0.5), 50000, stream
    )
    assert report.acceptance_rate == pytest.approx(np.sqrt(np.pi / 2) / np.exp(0.5), abs=0.01)
    assert diagnostics.ks_within_band(report.accepted[:, 0], stats.halfnorm.cdf)


def test_envelope_violation_is_reported(stream):
    with pytest.raises(ErrorEnvelopeViolation) as info:
        classic_mc.accept_reject(
            targets.beta_unnorm(0, 0), uniform_sampler, uniform_logdensity, 0.5, 10, stream
        )
    assert 0 <= info.value.point[0] < 1
    assert info.value.log_ratio == pytest.approx(np.log(2.0))


def test_accept_reject_parameters(stream):
    with pytest.raises(ErrorParameter):
        classic_mc.accept_reject(
            targets.beta_unnorm(0, 0), uniform_sampler, uniform_logdensity, 0.0, 10, stream
        )
    report = classic_mc.accept_reject(
        targets.beta_unnorm(0, 0), uniform_sampler, uniform_logdensity, 1.0, 0, stream
    )
    assert report.acceptance_rate == 0.0


def _three_point_sampler(probs):
    edges = np.cumsum(probs)

    def sampler(stream, n):
        return np.searchsorted(edges, stream.uniform(n), side="right").astype(float)

    return sampler


def _log_pmf(probs):
    log_probs = np.log(np.asarray(probs))

    def log_pmf(x):
        return log_probs[x[:, 0].astype(int)]

    return log_pmf


def test_importance_on_three_points(stream):
    q, f = (0.2, 0.3, 0.5), (0.5, 0.3, 0.2)
    estimate = classic_mc.importance_estimate(
        lambda x: x[:, 0] ** 2,
        _three_point_sampler(q),
        _log_pmf(q),
        _log_pmf(f),
        100000,
        stream,
        f_normalized=True,
    )
    exact = 0 * 0.5 + 1 * 0.3 + 4 * 0.2
    variance = sum(qi * (x * x * fi / qi) ** 2 for x, (qi, fi) in enumerate(zip(q, f))) - exact**2
    assert abs(estimate.raw_estimate - exact) < 4 * np.sqrt(variance / 100000)
    assert abs(estimate.self_normalized - exact) < 0.02

    xs = estimate.weighted.points[:, 0].astype(int)
    w = np.array(f)[xs] / np.array(q)[xs]
    assert estimate.raw_estimate == pytest.approx(np.mean(xs**2 * w), rel=1e-12)
    assert estimate.self_normalized == pytest.approx(np.sum(xs**2 * w) / np.sum(w), rel=1e-12)


def test_importance_with_exact_proposal_has_full_ess(stream):
    estimate = classic_mc.importance_estimate(
        lambda x: x[:, 0],
        lambda s, n: s.standard_normal(n),
        lambda x: stats.norm.logpdf(x[:, 0]),
        lambda x: stats.norm.logpdf(x[:, 0]),
        5000,
        stream,
    )
    assert estimate.raw_estimate is None
    assert estimate.ess == pytest.approx(5000)
    assert estimate.self_normalized == pytest.approx(np.mean(estimate.weighted.points))


def test_self_normalised_estimate_ignores_constants(make_stream):
    def run(offset):
        return classic_mc.importance_estimate(
            lambda x: x[:, 0],
            lambda s, n: s.standard_normal(n),
            lambda x: stats.norm.logpdf(x[:, 0]),
            lambda x: -((x[:, 0] - 1.0) ** 2) + offset,
            2000,
            make_stream(3),
        )

    base, moved = run(0.0), run(500.0)
    assert moved.self_normalized == pytest.approx(base.self_normalized, rel=1e-12)
    assert moved.ess == pytest.approx(base.ess, rel=1e-12)
    assert base.ess <= 2000


def test_zero_weights_are_degenerate(stream):
    with pytest.raises(ErrorDegenerateSample):
        classic_mc.importance_estimate(
            lambda x: x[:, 0],
            lambda s, n: s.standard_normal(n),
            lambda x: stats.norm.logpdf(x[:, 0]),
            lambda x: np.full(x.shape[0], -np.inf),
            100,
            stream,
        )


def test_weighted_sample_ess_bounds():
    equal = classic_mc.WeightedSample(np.arange(4.0)[:, None], np.zeros(4))
    assert equal.ess() == pytest.approx(4.0)
    log_weights = np.array([0.0, -1.0, -2.0, -np.inf])
    uneven = classic_mc.WeightedSample(np.arange(4.0)[:, None], log_weights)
    assert 1.0 <= uneven.ess() < 3.0
    assert uneven.normalized_weights()[3] == 0.0


def test_resampling_equal_weights_is_uniform(stream):
    w = classic_mc.WeightedSample(np.arange(4.0)[:, None], np.zeros(4))
    picks = classic_mc.sir_resample(w, 40000, stream)[:, 0]
    assert set(np.unique(picks)) <= {0.0, 1.0, 2.0, 3.0}
    assert np.allclose(np.bincount(picks.astype(int), minlength=4) / 40000, 0.25, atol=0.01)


def test_resampling_never_picks_zero_weight(stream):
    w = classic_mc.WeightedSample(np.arange(3.0)[:, None], np.array([-np.inf, 0.0, -np.inf]))
    assert np.all(classic_mc.sir_resample(w, 500, stream) == 1.0)


def _sir(target_log, n, m, stream):
    estimate = classic_mc.importance_estimate(
        lambda x: x[:, 0],
        lambda s, k: s.standard_normal(k),
        lambda x: stats.norm.logpdf(x[:, 0]),
        target_log,
        n,
        stream,
    )
    return classic_mc.sir_resample(estimate.weighted, m, stream)[:, 0], estimate.ess


def test_sir_recovers_lighter_tailed_target(stream):
    sd = 1.0 / np.sqrt(2.0)
    picks, ess = _sir(lambda x: stats.norm.logpdf(x[:, 0], 2.0, sd), 100000, 10000, stream)
    n_eff = 1.0 / (1.0 / 10000 + 1.0 / ess)
    assert diagnostics.ks_within_band(picks, stats.norm(2.0, sd).cdf, n_eff=n_eff)


def test_sir_misses_heavy_tailed_target(make_stream):
    means = [
        np.mean(_sir(lambda x: stats.t.logpdf(x[:, 0] - 3.0, 5), 100000, 10000, make_stream(s))[0])
        for s in range(9)
    ]
    assert np.median(means) < 2.8


def test_running_means():
    assert np.allclose(classic_mc.running_means([1.0, 3.0, 5.0]), [1.0, 2.0, 3.0])
    assert classic_mc.running_means(np.ones((4, 2))).shape == (4, 2)

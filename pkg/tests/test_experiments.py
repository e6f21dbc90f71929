import numpy as np
import pytest

from mcforge import experiments, serialize
from mcforge.errors import ErrorInitialization, ErrorLookup, ErrorParameter
from mcforge.experiments import ExperimentSpec

# reduced sizes that keep every runner quick
SMALL_N = {
    "is_infinite_variance": 100,
    "sir_student": 2000,
    "sir_normal": 2000,
    "ar_beta": 20000,
    "slice_normal": 500,
    "indep_mh": 200,
    "trunc_proposal_mh": 500,
    "rw_truncated_target": 500,
    "hmc_normal": 200,
    "abc_normal": 20000,
}


def test_registry_order():
    assert experiments.experiment_names() == list(SMALL_N)
    assert all(e.description for e in experiments.list_experiments())


def test_unknown_experiment():
    with pytest.raises(ErrorLookup):
        experiments.lookup("fig99")
    with pytest.raises(ErrorLookup):
        experiments.run_experiment(ExperimentSpec("fig99"))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"seed": -1},
        {"n": 0},
        {"eps": 0.0},
        {"steps": 0},
        {"scale": -1.0},
        {"quantile": 2.0},
        {"workers": 0},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ErrorParameter):
        ExperimentSpec("ar_beta", **kwargs)


def test_spec_defaults():
    spec = ExperimentSpec("hmc_normal", eps=0.2)
    assert spec.get("eps", 0.1) == 0.2
    assert spec.get("steps", 10) == 10


@pytest.mark.parametrize("name", list(SMALL_N))
def test_experiment_writes_reproducible_files(name, tmp_path):
    outputs = []
    for run in ("a", "b"):
        spec = ExperimentSpec(name, seed=7, n=SMALL_N[name], out=tmp_path / run)
        csv_path, summary_path = experiments.run_experiment(spec)
        assert csv_path.name == "{}.csv".format(name)
        assert summary_path.name == "{}.summary.txt".format(name)
        outputs.append((csv_path.read_bytes(), summary_path.read_bytes()))
    assert outputs[0] == outputs[1]

    summary = serialize.read_summary(summary_path)
    assert summary["experiment"] == name
    assert summary["seed"] == "7"
    assert summary["full"] == "0"
    header, _ = serialize.read_table(csv_path)
    assert header


def test_seed_changes_the_output(tmp_path):
    specs = [ExperimentSpec("slice_normal", seed=s, n=100, out=tmp_path / str(s)) for s in (1, 2)]
    paths = [experiments.run_experiment(spec)[0] for spec in specs]
    assert paths[0].read_bytes() != paths[1].read_bytes()


def test_worker_count_does_not_change_results(tmp_path):
    results = [
        experiments.run_experiment(
            ExperimentSpec("is_infinite_variance", n=200, workers=w, out=tmp_path / str(w))
        )[0].read_bytes()
        for w in (1, 4)
    ]
    assert results[0] == results[1]


def test_infinite_variance_spread(tmp_path):
    _, path = experiments.run_experiment(ExperimentSpec("is_infinite_variance", out=tmp_path))
    summary = serialize.read_summary(path)
    assert float(summary["spread_ratio"]) >= 5.0


def test_indep_mh_reports_worked_trace(tmp_path):
    _, path = experiments.run_experiment(ExperimentSpec("indep_mh", n=100, out=tmp_path))
    summary = serialize.read_summary(path)
    assert summary["worked_decisions"] == "accept,reject,reject,reject,accept,reject"
    ratios = [float(r) for r in summary["worked_ratios"].split(",")]
    assert ratios[1] == pytest.approx(0.2347724, abs=1e-6)


def test_ar_beta_acceptance(tmp_path):
    _, path = experiments.run_experiment(ExperimentSpec("ar_beta", out=tmp_path))
    summary = serialize.read_summary(path)
    expected = float(summary["expected_acceptance_rate"])
    assert expected == pytest.approx(0.0097, abs=0.0003)
    assert int(summary["n_accepted"]) == pytest.approx(expected * 10**6, rel=0.05)


def test_trunc_proposal_alpha_identity(tmp_path):
    _, path = experiments.run_experiment(ExperimentSpec("trunc_proposal_mh", n=2000, out=tmp_path))
    assert float(serialize.read_summary(path)["max_alpha_identity_gap"]) <= 1e-12


def test_hmc_experiment_trace_has_divergence_column(tmp_path):
    csv_path, path = experiments.run_experiment(ExperimentSpec("hmc_normal", n=100, out=tmp_path))
    header, values = serialize.read_table(csv_path)
    assert header == ["step", "accepted", "x1", "divergent"]
    assert values.shape == (101, 4)
    assert serialize.read_summary(path)["artificial18_divergences"] == "0"


@pytest.mark.slow
@pytest.mark.parametrize(
    "name", ["slice_normal", "indep_mh", "rw_truncated_target", "hmc_normal", "sir_normal"]
)
def test_default_runs_fit_their_targets(name, tmp_path):
    _, path = experiments.run_experiment(ExperimentSpec(name, out=tmp_path))
    assert serialize.read_summary(path)["ks_within_band"] == "1"


def test_sir_student_stays_below_target_mean(tmp_path):
    spec = ExperimentSpec("sir_student", n=100000, out=tmp_path)
    _, path = experiments.run_experiment(spec)
    assert float(serialize.read_summary(path)["resampled_mean"]) < 2.8


@pytest.mark.parametrize(
    "target,params,kind",
    [
        ("std_normal", (), "rw"),
        ("beta_unnorm", (2.3, 3.4), "slice"),
        ("correlated_normal", (0.5,), "hmc"),
        ("log_bump", (), "tnmh"),
    ],
)
def test_sample_target(target, params, kind):
    trace = experiments.sample_target(target, params, kind, 200, seed=3)
    assert trace.n_steps == 200
    assert np.all(np.isfinite(trace.states))


def test_default_start_and_kernel_lookup():
    assert experiments.default_start(experiments.targets.log_bump()).tolist() == [0.5]
    assert experiments.default_start(experiments.targets.std_normal(2)).tolist() == [0.0, 0.0]
    with pytest.raises(ErrorLookup):
        experiments.make_kernel("gibbs", experiments.targets.std_normal())
    nowhere = experiments.targets.trunc_normal_target(lo=2.0, hi=3.0)
    with pytest.raises(ErrorInitialization):
        experiments.default_start(nowhere)

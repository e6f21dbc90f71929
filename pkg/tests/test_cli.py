import json

import pytest
from click.testing import CliRunner

from mcforge import cli, experiments, serialize


@pytest.fixture
def runner():
    return CliRunner()


def test_list_table(runner):
    result = runner.invoke(cli.cli, ["list"])
    assert result.exit_code == 0
    lines = result.output.strip().split("\n")
    assert len(lines) == len(experiments.experiment_names())
    assert lines[3].startswith("ar_beta")


def test_list_json(runner):
    result = runner.invoke(cli.cli, ["list", "--format", "json"])
    assert result.exit_code == 0
    entries = json.loads(result.output)
    assert [e["name"] for e in entries] == experiments.experiment_names()


def test_list_yaml(runner):
    result = runner.invoke(cli.cli, ["list", "--format", "yaml"])
    assert result.exit_code == 0
    assert "- name: ar_beta" in result.output


def test_run_unknown_experiment_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(cli.cli, ["run", "fig99", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "slice_normal" in result.output
    assert not list(tmp_path.iterdir())


@pytest.mark.parametrize(
    "args", [["--quantile", "1.5"], ["--eps", "0"], ["--n", "0"], ["--seed", "-3"]]
)
def test_run_rejects_bad_values(runner, tmp_path, args):
    result = runner.invoke(cli.cli, ["run", "abc_normal", "--out", str(tmp_path)] + args)
    assert result.exit_code == 2


def test_run_writes_identical_files(runner, tmp_path):
    contents = []
    for run in ("a", "b"):
        out = tmp_path / run
        result = runner.invoke(
            cli.cli, ["run", "slice_normal", "--seed", "5", "--n", "300", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        files = (out / "slice_normal.csv", out / "slice_normal.summary.txt")
        contents.append(tuple(f.read_bytes() for f in files))
    assert contents[0] == contents[1]
    summary = serialize.read_summary(tmp_path / "a" / "slice_normal.summary.txt")
    assert summary["seed"] == "5"
    assert summary["n"] == "300"


def test_run_error_becomes_click_exception(runner, tmp_path):
    result = runner.invoke(
        cli.cli, ["run", "is_infinite_variance", "--n", "5", "--out", str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "at least" in result.output


def test_workers_from_environment(runner, tmp_path, mocker):
    spy = mocker.spy(experiments, "run_experiment")
    result = runner.invoke(
        cli.cli,
        ["run", "is_infinite_variance", "--n", "20", "--out", str(tmp_path)],
        env={"MCFORGE_WORKERS": "3"},
    )
    assert result.exit_code == 0, result.output
    assert spy.call_args[0][0].workers == 3


def test_sample_prints_summary(runner):
    result = runner.invoke(
        cli.cli, ["sample", "--target", "std_normal", "--kernel", "slice", "--n", "300"]
    )
    assert result.exit_code == 0, result.output
    pairs = dict(line.split("=", 1) for line in result.output.split("\n") if "=" in line)
    assert pairs["target"] == "std_normal"
    assert pairs["kernel"] == "slice"
    assert pairs["n_kept"] == "271"
    assert abs(float(pairs["mean_x1"])) < 0.5


def test_sample_writes_trace_and_summary(runner, tmp_path):
    out = tmp_path / "chain.csv"
    result = runner.invoke(
        cli.cli,
        [
            "sample", "--target", "beta_unnorm", "--params", "2.3,3.4", "--kernel", "hmc",
            "--eps", "0.05", "--n", "200", "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    header, values = serialize.read_table(out)
    assert header == ["step", "accepted", "x1", "divergent"]
    assert values.shape == (201, 4)
    assert serialize.read_summary(tmp_path / "chain.summary.txt")["params"] == "2.3,3.4"


def test_sample_bad_target_parameters(runner):
    result = runner.invoke(
        cli.cli, ["sample", "--target", "beta_unnorm", "--params", "3.3", "--n", "10"]
    )
    assert result.exit_code == 1
    assert "beta_unnorm" in result.output


def test_sample_start_outside_support(runner):
    result = runner.invoke(
        cli.cli, ["sample", "--target", "log_bump", "--x0", "-1", "--n", "10"]
    )
    assert result.exit_code == 1
    assert "support" in result.output


def test_sample_rejects_unparsable_params(runner):
    result = runner.invoke(cli.cli, ["sample", "--target", "normal", "--params", "1,x"])
    assert result.exit_code == 2

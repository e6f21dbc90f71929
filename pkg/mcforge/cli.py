#!/usr/bin/env python3
"""mcforge: reproducible Monte Carlo experiments and samplers on the command line."""
import json
from io import StringIO
from pathlib import Path
from typing import List, Optional

import click
import structlog
from ruamel.yaml import YAML

from . import clitypes, config, diagnostics, errors, experiments, serialize, targets
from .rng import UINT64_MAX

logger: structlog.BoundLogger = structlog.getLogger()


@click.group(context_settings={"auto_envvar_prefix": "MCFORGE"})
@click.option(
    "--log-level",
    default=config.Config.DEFAULT_LOG_LEVEL,
    type=click.Choice(config.log_levels()),
    show_default=True,
)
@click.option(
    "--workers",
    default=config.Config.DEFAULT_WORKERS,
    type=click.IntRange(min=1),
    help="Threads used to run replicates of an experiment",
    show_default=True,
)
@click.option(
    "--force-colors/--no-force-colors",
    default=False,
    help="Keep coloured log output when stderr is not a terminal",
    show_default=True,
)
@click.pass_context
def cli(ctx, log_level, workers, force_colors):
    config.configure_logging(log_level, force_colors=force_colors)
    ctx.obj = config.Config(log_level, workers, force_colors)


@cli.command("list")
@click.option(
    "--format", "output_format", default="table", type=click.Choice(["table", "json", "yaml"])
)
def list_command(output_format: str):
    """List the registered experiments"""
    entries = [
        {"name": e.name, "description": e.description} for e in experiments.list_experiments()
    ]
    if output_format == "table":
        width = max(len(e["name"]) for e in entries)
        for e in entries:
            click.echo("{}  {}".format(e["name"].ljust(width), e["description"]))
    elif output_format == "json":
        click.echo(json.dumps(entries, indent=2))
    elif output_format == "yaml":
        buffer = StringIO()
        YAML().dump(entries, buffer)
        click.echo(buffer.getvalue(), nl=False)
    else:
        raise NotImplementedError("format={} is not implemented.".format(output_format))


@cli.command("run")
@click.argument("name", type=clitypes.ExperimentName(experiments.experiment_names()))
@click.option("--seed", default=1, type=click.IntRange(0, UINT64_MAX), show_default=True)
@click.option(
    "--n", "n", default=None, type=click.IntRange(min=1), help="Sample size or iterations"
)
@click.option("--eps", default=None, type=clitypes.PositiveFloat(), help="HMC step size")
@click.option("--steps", default=None, type=click.IntRange(min=1), help="Leapfrog steps")
@click.option("--scale", default=None, type=clitypes.PositiveFloat(), help="Proposal scale")
@click.option("--quantile", default=None, type=clitypes.Probability(), help="ABC quantile")
@click.option(
    "--out",
    default=Path("."),
    type=click.Path(file_okay=False, path_type=Path),
    help="Directory for the CSV and summary files",
    show_default=True,
)
@click.option(
    "--full/--desk",
    default=False,
    help="Run at full scale instead of the desk-scale defaults",
    show_default=True,
)
@click.pass_obj
def run(
    obj: config.Config,
    name: str,
    seed: int,
    n: Optional[int],
    eps: Optional[float],
    steps: Optional[int],
    scale: Optional[float],
    quantile: Optional[float],
    out: Path,
    full: bool,
):
    """Run one experiment and write <name>.csv and <name>.summary.txt"""
    try:
        spec = obj.experiment_spec(
            name,
            seed=seed,
            n=n,
            eps=eps,
            steps=steps,
            scale=scale,
            quantile=quantile,
            out=out,
            full=full,
        )
        csv_path, summary_path = experiments.run_experiment(spec)
    except errors.ErrorMcforge as e:
        raise click.ClickException(str(e))
    click.echo(str(csv_path))
    click.echo(str(summary_path))


@cli.command("sample")
@click.option("--target", "target_name", required=True, type=click.Choice(targets.catalog_names()))
@click.option("--params", default="", type=clitypes.FloatList(), help="Target parameters, a,b,...")
@click.option("--kernel", default="rw", type=click.Choice(experiments.KERNELS), show_default=True)
@click.option("--n", "n", default=1000, type=click.IntRange(min=0), show_default=True)
@click.option("--scale", default=1.0, type=clitypes.PositiveFloat(), show_default=True)
@click.option("--eps", default=0.1, type=clitypes.PositiveFloat(), show_default=True)
@click.option("--steps", default=10, type=click.IntRange(min=1), show_default=True)
@click.option("--x0", default=None, type=clitypes.FloatList(), help="Starting point")
@click.option("--seed", default=1, type=click.IntRange(0, UINT64_MAX), show_default=True)
@click.option(
    "--out",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Trace CSV; the summary goes next to it",
)
def sample(
    target_name: str,
    params: List[float],
    kernel: str,
    n: int,
    scale: float,
    eps: float,
    steps: int,
    x0: Optional[List[float]],
    seed: int,
    out: Optional[Path],
):
    """Run one chain on a catalog target and print its diagnostics"""
    try:
        trace = experiments.sample_target(
            target_name, params, kernel, n, seed, scale=scale, eps=eps, steps=steps, x0=x0
        )
        pairs = [
            ("target", target_name),
            ("params", params),
            ("kernel", trace.kernel_label),
            ("seed", seed),
            ("n", n),
        ] + diagnostics.summarize_trace(trace).to_key_values()
    except errors.ErrorMcforge as e:
        raise click.ClickException(str(e))

    if out is not None:
        serialize.write_trace(out, trace, divergent=kernel == "hmc")
        serialize.write_summary(out.with_suffix(".summary.txt"), pairs)
        logger.bind(csv=str(out)).info("Wrote trace")
    for key, value in pairs:
        click.echo("{}={}".format(key, serialize.format_value(value)))


def main():
    cli()


if __name__ == "__main__":
    main()

"""Command-line front end: one subcommand per experiment.

Every subcommand loads a scenario (the bundled one by default), applies
the seed/reps overrides, runs the experiment, writes the delimited
output plus the resolved-config sidecar, and renders the report figure
next to them.
"""

from __future__ import annotations

from pathlib import Path

import click

from .config import ScenarioError, bundled_scenario_path, load_scenario
from .experiments import (
    run_manipulation_sweep,
    run_ota_relay,
    run_reciprocity_experiment,
    run_rss_access,
    run_tdd_trace,
)
from . import plots


def _common_options(command):
    command = click.option(
        "--scenario",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="Scenario file; defaults to the bundled one for this experiment.",
    )(command)
    command = click.option("--seed", type=int, default=None, help="Override the scenario seed.")(command)
    command = click.option("--reps", type=int, default=None, help="Override the repetition count.")(command)
    command = click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        default=Path("results"),
        show_default=True,
        help="Output directory.",
    )(command)
    command = click.option("--no-figure", is_flag=True, help="Skip rendering the report figure.")(command)
    return command


def _load(experiment: str, scenario: Path | None, seed: int | None, reps: int | None):
    path = scenario if scenario is not None else bundled_scenario_path(experiment)
    try:
        cfg = load_scenario(path)
        if cfg.experiment != experiment:
            raise ScenarioError(
                f"scenario file declares experiment {cfg.experiment!r}, "
                f"but this command runs {experiment!r}"
            )
        return cfg.with_overrides(seed=seed, reps=reps).validated()
    except (ScenarioError, OSError) as exc:
        raise click.ClickException(str(exc)) from None


def _emit(result, out: Path, basename: str, no_figure: bool, plotter=None):
    csv_path, echo_path = result.write(out, basename)
    click.echo(f"rows: {len(result.rows)}")
    click.echo(f"csv: {csv_path}")
    click.echo(f"config: {echo_path}")
    if not no_figure and plotter is not None:
        fig_path = plotter(result, out, basename)
        click.echo(f"figure: {fig_path}")


@click.group()
@click.version_option(package_name="phaserelay")
def main() -> None:
    """Phase-ranging relay simulator: experiments and reports."""


@main.command()
@_common_options
def sweep(scenario, seed, reps, out, no_figure) -> None:
    """Distance grid versus manipulation targets, desk-scale relay."""
    cfg = _load("sweep", scenario, seed, reps)
    try:
        result = run_manipulation_sweep(cfg)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(result, out, "sweep", no_figure, plots.plot_sweep)
    for cid, stats in result.summary["cells"].items():
        click.echo(
            f"  {cid}: mean {stats['mean_m']:.3f} m  sd {stats['std_m']:.3f} m  (n={stats['count']})"
        )


@main.command()
@_common_options
def ota(scenario, seed, reps, out, no_figure) -> None:
    """Over-the-air relay with nodes out of direct range."""
    cfg = _load("ota", scenario, seed, reps)
    try:
        result = run_ota_relay(cfg)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(result, out, "ota", no_figure, plots.plot_ota)
    for cid, stats in result.summary["cells"].items():
        click.echo(
            f"  {cid}: mean {stats['mean_m']:.3f} m  sd {stats['std_m']:.3f} m  (n={stats['count']})"
        )


@main.command()
@_common_options
def reciprocity(scenario, seed, reps, out, no_figure) -> None:
    """Magnitude-reciprocity detector against relay arms."""
    cfg = _load("reciprocity", scenario, seed, reps)
    try:
        result = run_reciprocity_experiment(cfg)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(result, out, "reciprocity", no_figure, plots.plot_reciprocity)
    click.echo(f"  epsilon (q={result.summary['quantile']:g}): {result.summary['epsilon']:.3f}")
    for arm, stats in result.summary["arms"].items():
        ks = stats.get("ks_vs_legitimate")
        ks_text = f"  ks {ks:.3f}" if ks is not None else ""
        click.echo(
            f"  {arm}: median {stats['median']:.3f}  flag rate {stats['flag_rate']:.2f}{ks_text}"
        )


@main.command()
@_common_options
def rss(scenario, seed, reps, out, no_figure) -> None:
    """Signal-strength gated access with and without the relay."""
    cfg = _load("rss", scenario, seed, reps)
    try:
        result = run_rss_access(cfg)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    _emit(result, out, "rss", no_figure, plots.plot_rss)
    thr = result.summary["thresholds_dbm"]
    click.echo(
        f"  thresholds: engine {thr['engine']:.1f}  unlock {thr['unlock']:.1f}  lock {thr['lock']:.1f} dBm"
    )
    for key, b in result.summary["boundaries"].items():
        click.echo(
            f"  {key}: engine<= {b['engine_max_m']}  unlock<= {b['unlock_max_m']}  reach<= {b['reach_max_m']} m"
        )


@main.command(name="tdd-trace")
@_common_options
def tdd_trace(scenario, seed, reps, out, no_figure) -> None:
    """Switching trace of one full ranging exchange."""
    cfg = _load("tdd-trace", scenario, seed, reps)
    try:
        run = run_tdd_trace(cfg)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "tdd_trace.csv"
    run.trace.write_csv(csv_path)
    echo_path = out / "tdd_trace.config.txt"
    echo_path.write_text(
        "\n".join(f"{k} = {v}" for k, v in run.config_echo.items()) + "\n", encoding="utf-8"
    )
    click.echo(f"csv: {csv_path}")
    click.echo(f"config: {echo_path}")
    if not no_figure:
        fig_path = plots.plot_trace(run, out, "tdd_trace")
        click.echo(f"figure: {fig_path}")
    click.echo(f"  pattern found: {run.summary['pattern_found']}")
    click.echo(f"  tones counted: {run.summary['tones_counted']}")
    for source, stats in run.summary["per_source"].items():
        click.echo(
            f"  {source}: forwarded {stats['forwarded']}  clipped {stats['clipped']}"
            f"  ignored {stats['ignored']}  lost {stats['lost']}"
            f"  max clip fraction {stats['max_clip_fraction']:.6f}"
        )


if __name__ == "__main__":
    main()

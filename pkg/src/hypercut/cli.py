"""Command-line interface.

Exit codes: 0 success; 2 a mathematical invariant or accuracy/acceptance
check failed; 3 bad input (unreadable or invalid config, malformed grid or
table file).  Worker count comes from the environment (see
`simulate.worker_count`) and changes speed only, never results.
"""

from __future__ import annotations

import json
import math
import sys

import click

from .errors import AccuracyError, InvariantViolation, NumericError, ReductionError
from .harness import (
    ExperimentConfig,
    ExperimentKind,
    load_config,
    run_brownian_mixing,
    run_geodesic_cutoff,
    run_nu_table,
    run_spectrum_bound,
    _parse_grid,
    _parse_number_list,
)

EXIT_INVARIANT = 2
EXIT_INPUT = 3

_INPUT_ERRORS = (ValueError, OSError, json.JSONDecodeError)
_INVARIANT_ERRORS = (InvariantViolation, NumericError, AccuracyError, ReductionError)


def _run(action):
    try:
        return action()
    except _INVARIANT_ERRORS as exc:
        click.echo(f"invariant failure: {exc}", err=True)
        sys.exit(EXIT_INVARIANT)
    except _INPUT_ERRORS as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _echo_cutoff(report) -> None:
    for curve in report.curves:
        t_half = curve.t_mix.get(0.5, math.nan)
        ratio = t_half / curve.t_star
        click.echo(
            f"delta={curve.delta:.6g}: t*={curve.t_star:.4f}"
            f" t_mix(0.5)={t_half:.4f} ratio={ratio:.4f}"
            f" window={curve.window():.4f}"
        )
    for note in report.advisories:
        click.echo(f"advisory: {note}")


@click.group()
def main() -> None:
    """Numerical lab for mixing of flows on compact hyperbolic surfaces."""


@main.command("geodesic-cutoff")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Config file (kind = GeodesicCutoff).")
def geodesic_cutoff(config_path: str) -> None:
    """Measure TV-cutoff curves of the geodesic process."""

    def action():
        report = run_geodesic_cutoff(load_config(config_path))
        _echo_cutoff(report)

    _run(action)


@main.command("brownian")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Config file (kind = BrownianMixing).")
def brownian(config_path: str) -> None:
    """Measure Brownian mixing curves plus matched geodesic references."""

    def action():
        report = run_brownian_mixing(load_config(config_path))
        _echo_cutoff(report)
        for comp in _factor_lines(report):
            click.echo(comp)

    _run(action)


def _factor_lines(report):
    out = []
    for b, g in zip(report.curves, report.reference_curves):
        tb = b.t_mix.get(0.5, math.nan)
        tg = g.t_mix.get(0.5, math.nan)
        factor = tb / tg if tg else math.nan
        out.append(
            f"delta={b.delta:.6g}: brownian/geodesic t_mix(0.5) factor ="
            f" {factor:.4f} (predicted {2.0 / (report.d - 1):.1f})"
        )
    return out


@main.command("nu")
@click.option("--d", "dim", required=True, type=int, help="Space dimension (>= 2).")
@click.option("--lambda-grid", required=True, help="Eigenvalue grid: 'a : b : step' or comma list.")
@click.option("--t-grid", required=True, help="Time grid: 'a : b : step' or comma list.")
@click.option("--output", default="-", help="CSV output path; '-' (default) prints to stdout.")
def nu(dim: int, lambda_grid: str, t_grid: str, output: str) -> None:
    """Tabulate the radial multiplier with decay envelopes.

    Exits 0 only when every row is real, contractive, and accurate.
    """

    def action():
        config = ExperimentConfig(
            kind=ExperimentKind.NU_TABLE,
            d=dim,
            lambda_grid=_parse_grid(lambda_grid),
            t_grid=_parse_grid(t_grid),
            output_path=output,
        )
        report = run_nu_table(config)
        if output == "-":
            click.echo(report.csv_text, nl=False)
        if not report.all_ok:
            bad = sum(1 for r in report.rows if r["flags"] != "ok")
            click.echo(f"invariant failure: {bad} flagged rows", err=True)
            sys.exit(EXIT_INVARIANT)

    _run(action)


@main.group()
def spectrum() -> None:
    """Spectral upper bounds from an eigenvalue table."""


@spectrum.command("bound")
@click.option("--table", "table_path", required=True, type=click.Path(), help="Eigenvalue table file.")
@click.option("--delta", "deltas", required=True, help="Starting-ball radii (comma list; exp(x) accepted).")
@click.option("--t-grid", required=True, help="Time grid: 'a : b : step' or comma list.")
@click.option("--coeffs", default="", help="Per-row weights enabling the fine curve (comma list).")
@click.option("--output", default="-", help="Output base path; '-' (default) prints CSV to stdout.")
def spectrum_bound(table_path: str, deltas: str, t_grid: str, coeffs: str, output: str) -> None:
    """Coarse (and optionally fine) TV upper-bound curves with crossings."""

    def action():
        config = ExperimentConfig(
            kind=ExperimentKind.SPECTRUM_BOUND,
            table_path=table_path,
            delta_list=_parse_number_list(deltas),
            t_grid=_parse_grid(t_grid),
            coeffs=_parse_number_list(coeffs) if coeffs else (),
            output_path=output,
        )
        report = run_spectrum_bound(config)
        if output == "-":
            click.echo(report.csv_text, nl=False)
        for entry in report.coarse_crossings:
            click.echo(f"coarse delta={entry['delta']:.6g}: crossings {entry['crossings']}")
        if report.fine_crossings is not None:
            click.echo(f"fine: crossings {report.fine_crossings['crossings']}")
        if report.profile_flags:
            click.echo(f"profile violations at s = {list(report.profile_flags)}")
        for note in report.advisories:
            click.echo(f"advisory: {note}")

    _run(action)


@spectrum.command("profile")
@click.option("--table", "table_path", required=True, type=click.Path(), help="Eigenvalue table file.")
@click.option("--s-grid", default="0.05 : 0.95 : 0.05", help="Profile grid over s in (0, 1).")
def spectrum_profile(table_path: str, s_grid: str) -> None:
    """Eigenvalue-counting density profile with violation flags.

    Exits 2 when any grid point violates the density bound.
    """

    def action():
        from .spectral import density_profile, load_spectrum

        table = load_spectrum(table_path)
        points = density_profile(table, _parse_grid(s_grid))
        click.echo("s,count,ratio,allowed,violates")
        for p in points:
            click.echo(f"{p.s!r},{p.count},{p.ratio!r},{p.allowed!r},{int(p.violates)}")
        if any(p.violates for p in points):
            click.echo("invariant failure: density bound violated", err=True)
            sys.exit(EXIT_INVARIANT)

    _run(action)


if __name__ == "__main__":
    main()

"""Tests for the experiment harness: config parsing, crossing extraction,
report assembly, output determinism, and the CLI surface.

Runs here use the minimum allowed sample count and coarse grids so the whole
module stays fast; the full-scale runs live in the acceptance suite.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hypercut.cli import main
from hypercut.harness import (
    ExperimentConfig,
    ExperimentKind,
    crossing_time,
    load_config,
    monotone_envelope,
    parse_config_text,
    run_brownian_mixing,
    run_geodesic_cutoff,
    run_nu_table,
    run_spectrum_bound,
)
from hypercut.multiplier import multiplier_closed_d3
from hypercut.spectral import load_spectrum

DEMO_TABLE = Path(__file__).resolve().parents[1] / "src" / "hypercut" / "data" / "demo_spectrum.txt"


def cutoff_text(output: str, extra: str = "") -> str:
    return f"""
# smoke configuration
kind = GeodesicCutoff
surface = bolza
delta_list = exp(-4)
t_grid = 1 : 3 : 0.5
n_samples = 10000
m_resolution = 8
master_seed = 42
output_path = {output}
{extra}
"""


# -- config parsing ---------------------------------------------------------------


def test_parse_config_round_trip():
    cfg = parse_config_text(cutoff_text("/tmp/x/y"))
    assert cfg.kind is ExperimentKind.GEODESIC_CUTOFF
    assert cfg.delta_list == (math.exp(-4),)
    assert cfg.t_grid == (1.0, 1.5, 2.0, 2.5, 3.0)
    assert cfg.n_samples == 10000
    assert cfg.epsilon_levels == (0.25, 0.5, 0.75)


def test_parse_grid_comma_form_and_exp_literals():
    cfg = parse_config_text(
        """
kind = GeodesicCutoff
delta_list = 0.05, exp(-3)
t_grid = 0.5, 1.25, 4
n_samples = 20000
output_path = /tmp/x/z
"""
    )
    assert cfg.delta_list == (0.05, math.exp(-3))
    assert cfg.t_grid == (0.5, 1.25, 4.0)


def test_parse_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ValueError):
        parse_config_text("kind = GeodesicCutoff\nbogus = 1\n")
    with pytest.raises(ValueError):
        parse_config_text(cutoff_text("/tmp/a") + "\nmaster_seed = 7\n")


def test_parse_rejects_bad_values():
    with pytest.raises(ValueError):
        parse_config_text("kind = Nonsense\noutput_path = /tmp/a\n")
    with pytest.raises(ValueError):
        parse_config_text("kind = GeodesicCutoff\nt_grid = 3 : 1 : 0.5\noutput_path = /tmp/a\n")
    with pytest.raises(ValueError):
        parse_config_text("no equals sign here\n")


def test_config_invariants():
    base = dict(
        kind=ExperimentKind.GEODESIC_CUTOFF,
        output_path="/tmp/a",
        delta_list=(0.1,),
        t_grid=(1.0, 2.0),
        n_samples=10_000,
    )
    ExperimentConfig(**base)  # valid
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "t_grid": (2.0, 1.0)})
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "t_grid": (1.0, 1.0)})
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "delta_list": (-0.1,)})
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "n_samples": 9_999})
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "epsilon_levels": (0.5, 1.5)})
    with pytest.raises(ValueError):
        ExperimentConfig(**{**base, "epsilon_levels": (0.5, 0.5)})


def test_load_config_missing_file_is_input_error(tmp_path):
    with pytest.raises(ValueError):
        load_config(tmp_path / "nope.cfg")


# -- crossing extraction -------------------------------------------------------------


def test_monotone_envelope_is_running_minimum():
    vals = [0.9, 0.7, 0.8, 0.5, 0.6]
    assert list(monotone_envelope(vals)) == [0.9, 0.7, 0.7, 0.5, 0.5]


def test_crossing_time_interpolates_linearly():
    times = [1.0, 2.0, 3.0]
    mono = [0.9, 0.6, 0.3]
    # 0.5 is bracketed by (2, 0.6) and (3, 0.3): 2 + (0.6-0.5)/0.3.
    assert crossing_time(times, mono, 0.5) == pytest.approx(2.0 + 0.1 / 0.3, rel=1e-12)
    assert crossing_time(times, mono, 0.6) == pytest.approx(2.0, rel=1e-12)


def test_crossing_time_unbracketed_is_nan():
    assert math.isnan(crossing_time([1.0, 2.0], [0.9, 0.8], 0.5))  # never reached
    assert math.isnan(crossing_time([1.0, 2.0], [0.4, 0.3], 0.5))  # starts below


# -- cutoff runs ------------------------------------------------------------------------


def test_geodesic_cutoff_outputs_and_determinism(tmp_path):
    cfg = parse_config_text(cutoff_text(str(tmp_path / "run")))
    report = run_geodesic_cutoff(cfg)
    csv_path = tmp_path / "run.csv"
    json_path = tmp_path / "run.json"
    first_csv = csv_path.read_bytes()
    first_json = json_path.read_bytes()

    curve = report.curves[0]
    assert curve.t_star == pytest.approx(4.0, rel=1e-12)
    assert list(curve.tv_monotone) == list(monotone_envelope(curve.tv_raw))
    rows = first_csv.decode().strip().splitlines()
    assert rows[0] == "process,delta,t,tv_raw,tv_monotone"
    assert len(rows) == 1 + len(cfg.t_grid)

    # Bit-identical outputs on a re-run of the same config.
    run_geodesic_cutoff(cfg)
    assert csv_path.read_bytes() == first_csv
    assert json_path.read_bytes() == first_json

    summary = json.loads(first_json)
    assert summary["kind"] == "GeodesicCutoff"
    entry = summary["curves"][0]
    assert entry["t_star_predicted"] == pytest.approx(4.0)
    assert set(entry["t_mix"]) == {"0.25", "0.5", "0.75"}


def test_geodesic_cutoff_seed_changes_results(tmp_path):
    cfg_a = parse_config_text(cutoff_text(str(tmp_path / "a")))
    cfg_b = parse_config_text(cutoff_text(str(tmp_path / "b"), extra="").replace("master_seed = 42", "master_seed = 43"))
    ra = run_geodesic_cutoff(cfg_a)
    rb = run_geodesic_cutoff(cfg_b)
    assert ra.curves[0].tv_raw != rb.curves[0].tv_raw


def test_single_point_grid_gives_curves_only_with_advisory(tmp_path):
    cfg = parse_config_text(
        f"""
kind = GeodesicCutoff
delta_list = exp(-4)
t_grid = 2.0
n_samples = 10000
m_resolution = 8
master_seed = 7
output_path = {tmp_path / 'single'}
"""
    )
    report = run_geodesic_cutoff(cfg)
    curve = report.curves[0]
    assert len(curve.tv_raw) == 1
    assert all(math.isnan(v) for v in curve.t_mix.values())
    assert any("single-point grid" in a for a in report.advisories)
    summary = json.loads((tmp_path / "single.json").read_text())
    assert all(v is None for v in summary["curves"][0]["t_mix"].values())


def test_never_crossing_grid_gives_advisory(tmp_path):
    # Times far below t*: TV stays near 1, above every epsilon level.
    cfg = parse_config_text(
        f"""
kind = GeodesicCutoff
delta_list = exp(-4)
t_grid = 0.1, 0.2
n_samples = 10000
m_resolution = 8
master_seed = 7
output_path = {tmp_path / 'early'}
"""
    )
    report = run_geodesic_cutoff(cfg)
    assert all(math.isnan(v) for v in report.curves[0].t_mix.values())
    assert any("stays above" in a for a in report.advisories)
    assert any("before the predicted mixing time" in a for a in report.advisories)


def test_brownian_mixing_report_pairs_with_geodesic(tmp_path):
    cfg = parse_config_text(
        f"""
kind = BrownianMixing
delta_list = exp(-3)
t_grid = 0.25, 0.75, 1.5, 2.5, 3.5
n_samples = 10000
m_resolution = 8
master_seed = 11
output_path = {tmp_path / 'bm'}
"""
    )
    report = run_brownian_mixing(cfg)
    assert len(report.curves) == 1 and len(report.reference_curves) == 1
    # Brownian predicted axis carries the extra 2/(d-1) factor.
    assert report.curves[0].t_star == pytest.approx(2.0 * 3.0, rel=1e-12)
    assert report.reference_curves[0].t_star == pytest.approx(3.0, rel=1e-12)
    rows = (tmp_path / "bm.csv").read_text().strip().splitlines()
    processes = {r.split(",")[0] for r in rows[1:]}
    assert processes == {"geodesic", "brownian"}
    summary = json.loads((tmp_path / "bm.json").read_text())
    comp = summary["factor_comparison"][0]
    assert comp["predicted_factor"] == pytest.approx(2.0)
    assert "geodesic_reference" in summary


def test_kind_mismatch_rejected(tmp_path):
    cfg = parse_config_text(cutoff_text(str(tmp_path / "x")))
    with pytest.raises(ValueError):
        run_brownian_mixing(cfg)


# -- nu tables ---------------------------------------------------------------------------


def test_nu_table_values_and_flags(tmp_path):
    cfg = ExperimentConfig(
        kind=ExperimentKind.NU_TABLE,
        d=3,
        lambda_grid=(0.0, 1.0, 5.0),
        t_grid=(1.0, 2.0),
        output_path=str(tmp_path / "nu"),
    )
    report = run_nu_table(cfg)
    assert report.all_ok
    lookup = {(r["t"], r["lambda"]): r for r in report.rows}
    # d = 3 closed form: lambda = 5 -> u = 2.
    want = multiplier_closed_d3(2.0, 2.0)
    assert lookup[(2.0, 5.0)]["value"] == pytest.approx(want, abs=1e-12)
    assert lookup[(1.0, 0.0)]["value"] == pytest.approx(1.0, abs=1e-10)
    assert all(r["flags"] == "ok" for r in report.rows)
    text = (tmp_path / "nu.csv").read_text()
    assert text == report.csv_text
    assert text.splitlines()[0] == "d,t,lambda,value,envelope,ratio,imag_residual,error_estimate,flags"


def test_nu_table_deterministic(tmp_path):
    cfg = ExperimentConfig(
        kind=ExperimentKind.NU_TABLE,
        d=2,
        lambda_grid=(0.0, 2.0),
        t_grid=(1.0,),
        output_path=str(tmp_path / "nu2"),
    )
    a = run_nu_table(cfg).csv_text
    b = run_nu_table(cfg).csv_text
    assert a == b


# -- spectrum bounds ----------------------------------------------------------------------


def test_spectrum_bound_curves_and_crossings(tmp_path):
    cfg = ExperimentConfig(
        kind=ExperimentKind.SPECTRUM_BOUND,
        table_path=str(DEMO_TABLE),
        delta_list=(math.exp(-1),),
        t_grid=tuple(np.arange(0.5, 40.0, 0.5)),
        coeffs=(1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        output_path=str(tmp_path / "sb"),
    )
    report = run_spectrum_bound(cfg)
    assert report.profile_flags == ()  # demo table satisfies the density bound
    coarse = report.coarse_crossings[0]["crossings"]
    assert coarse["0.5"] is not None and coarse["0.25"] > coarse["0.75"]
    fine = report.fine_crossings["crossings"]
    assert fine["0.5"] is not None and fine["0.5"] < coarse["0.5"]
    rows = (tmp_path / "sb.csv").read_text().strip().splitlines()
    assert rows[0] == "curve,delta,t,bound"
    kinds = {r.split(",")[0] for r in rows[1:]}
    assert kinds == {"coarse", "fine"}
    summary = json.loads((tmp_path / "sb.json").read_text())
    assert summary["profile_violations_at_s"] == []


def test_spectrum_bound_advisory_when_grid_too_short(tmp_path):
    cfg = ExperimentConfig(
        kind=ExperimentKind.SPECTRUM_BOUND,
        table_path=str(DEMO_TABLE),
        delta_list=(math.exp(-4),),
        t_grid=(1.0, 2.0),
        output_path=str(tmp_path / "sb2"),
    )
    report = run_spectrum_bound(cfg)
    assert all(
        v is None for v in report.coarse_crossings[0]["crossings"].values()
    )
    assert any("never reaches" in a for a in report.advisories)


def test_spectrum_bound_missing_table_is_input_error(tmp_path):
    cfg = ExperimentConfig(
        kind=ExperimentKind.SPECTRUM_BOUND,
        table_path=str(tmp_path / "missing.txt"),
        delta_list=(0.1,),
        t_grid=(1.0, 2.0),
        output_path=str(tmp_path / "sb3"),
    )
    with pytest.raises((OSError, ValueError)):
        run_spectrum_bound(cfg)


# -- CLI ---------------------------------------------------------------------------------


def test_cli_geodesic_cutoff_runs(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(cutoff_text(str(tmp_path / "out")))
    result = CliRunner().invoke(main, ["geodesic-cutoff", "--config", str(cfg_path)])
    assert result.exit_code == 0, result.output
    assert "t_mix(0.5)" in result.output
    assert (tmp_path / "out.csv").exists() and (tmp_path / "out.json").exists()


def test_cli_bad_config_exits_3(tmp_path):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("kind = GeodesicCutoff\nbogus = 1\n")
    result = CliRunner().invoke(main, ["geodesic-cutoff", "--config", str(cfg_path)])
    assert result.exit_code == 3
    missing = CliRunner().invoke(main, ["geodesic-cutoff", "--config", str(tmp_path / "none.cfg")])
    assert missing.exit_code == 3


def test_cli_nu_stdout_and_file(tmp_path):
    result = CliRunner().invoke(
        main, ["nu", "--d", "3", "--lambda-grid", "0, 5", "--t-grid", "1, 2"]
    )
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0].startswith("d,t,lambda,value")
    out = tmp_path / "table"
    result2 = CliRunner().invoke(
        main,
        ["nu", "--d", "3", "--lambda-grid", "0, 5", "--t-grid", "1, 2", "--output", str(out)],
    )
    assert result2.exit_code == 0
    assert (tmp_path / "table.csv").read_text().splitlines()[0].startswith("d,t,lambda")


def test_cli_nu_bad_grid_exits_3():
    result = CliRunner().invoke(main, ["nu", "--d", "3", "--lambda-grid", "5 : 1 : 1", "--t-grid", "1"])
    assert result.exit_code == 3


def test_cli_spectrum_bound_and_profile():
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["spectrum", "bound", "--table", str(DEMO_TABLE), "--delta", "exp(-1)",
         "--t-grid", "1 : 30 : 1"],
    )
    assert result.exit_code == 0, result.output
    assert "coarse delta=" in result.output
    prof = runner.invoke(main, ["spectrum", "profile", "--table", str(DEMO_TABLE)])
    assert prof.exit_code == 0, prof.output
    assert prof.output.splitlines()[0] == "s,count,ratio,allowed,violates"


def test_cli_spectrum_profile_violation_exits_2(tmp_path):
    # A table whose eigenvalue count at low s exceeds the density bound:
    # many complementary eigenvalues on a small-volume surface.
    bad = tmp_path / "bad_table.txt"
    bad.write_text(
        "# d=2 V=12.566370614359172\n0.0\n"
        + "\n".join(f"0.2,{k}" for k in [40])
        + "\n"
    )
    table = load_spectrum(bad)
    assert table.volume == pytest.approx(4 * math.pi)
    result = CliRunner().invoke(main, ["spectrum", "profile", "--table", str(bad)])
    assert result.exit_code == 2, result.output

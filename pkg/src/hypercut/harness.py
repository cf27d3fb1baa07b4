"""Experiment orchestration: configs, sweeps, crossing extraction, CSV/JSON.

Configuration files use a single key = value text format::

    # lines starting with '#' are comments; blank lines are ignored
    kind = GeodesicCutoff            # GeodesicCutoff | BrownianMixing |
                                     #   NuTable | SpectrumBound
    surface = bolza                  # 'bolza' or a path to a surface JSON file
    delta_list = exp(-3), exp(-4)    # positive floats; exp(x) is accepted
    t_grid = 1.5 : 8 : 0.25          # inclusive start : stop : step, or a
                                     #   comma-separated list
    n_samples = 4000000              # >= 10000
    m_resolution = 32
    master_seed = 1
    output_path = out/run1           # files out/run1.csv and out/run1.json
    epsilon_levels = 0.25, 0.5, 0.75 # optional; this is the default
    d = 3                            # NuTable only
    lambda_grid = 0 : 400 : 4        # NuTable only
    table_path = spectrum.txt        # SpectrumBound only
    coeffs = 1.0, 0.5, 0.25          # SpectrumBound only: per-row weights
                                     #   for the fine curve (optional)

Reproducibility: the sampling stream for process p (0 = geodesic,
1 = Brownian), delta index i, and time index j is
``SeededStream(master_seed, 0).substream(p, i, j)``; runs are sequential, so
identical configs give byte-identical CSV and JSON outputs.  The worker
count environment variable (see `simulate.worker_count`) affects speed only.

Mixing-time extraction: raw TV curves are regularized to be non-increasing
by a running minimum (raw curves are still emitted), and each epsilon
crossing is located by linear interpolation between the bracketing grid
points.  A crossing that the grid does not bracket is reported as missing
(null in the JSON summary) together with an advisory string.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


from .multiplier import (
    FROZEN_ENVELOPE_C,
    decay_class,
    multiplier_grid,
    spectral_point,
)
from .rng import SeededStream
from .simulate import (
    brownian_measure,
    geodesic_measure,
    tv_against_uniform,
)
from .spectral import (
    SpectrumTable,
    coarse_bound_curve,
    density_profile,
    load_spectrum,
    mixing_time_from_bound,
    tv_bound_majl2,
)
from .surface import bolza_group, load_surface_json

DEFAULT_EPSILONS = (0.25, 0.5, 0.75)

NU_REALITY_TOL = 1e-9
NU_CONTRACTION_TOL = 1e-12
NU_ACCURACY_TOL = 1e-10

PROFILE_S_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


class ExperimentKind(enum.Enum):
    GEODESIC_CUTOFF = "GeodesicCutoff"
    BROWNIAN_MIXING = "BrownianMixing"
    NU_TABLE = "NuTable"
    SPECTRUM_BOUND = "SpectrumBound"


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    output_path: str
    surface: str = "bolza"
    delta_list: tuple[float, ...] = ()
    t_grid: tuple[float, ...] = ()
    n_samples: int = 10_000
    m_resolution: int = 32
    master_seed: int = 0
    epsilon_levels: tuple[float, ...] = DEFAULT_EPSILONS
    d: int = 2
    lambda_grid: tuple[float, ...] = ()
    table_path: str = ""
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if not isinstance(self.kind, ExperimentKind):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.output_path:
            raise ValueError("output_path is required")
        ts = self.t_grid
        if any(not math.isfinite(t) for t in ts):
            raise ValueError("t_grid entries must be finite")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t_grid must be strictly increasing")
        if any(not (d > 0) for d in self.delta_list):
            raise ValueError("delta_list entries must be positive")
        if self.kind in (ExperimentKind.GEODESIC_CUTOFF, ExperimentKind.BROWNIAN_MIXING):
            if not self.delta_list:
                raise ValueError("delta_list is required for cutoff experiments")
            if not ts:
                raise ValueError("t_grid is required for cutoff experiments")
            if self.n_samples < 10_000:
                raise ValueError("n_samples must be at least 10000")
            if self.m_resolution < 4:
                raise ValueError("m_resolution must be at least 4")
        if self.kind is ExperimentKind.NU_TABLE:
            if not self.lambda_grid or not ts:
                raise ValueError("NuTable needs lambda_grid and t_grid")
            if any(l < 0 for l in self.lambda_grid):
                raise ValueError("lambda_grid entries must be >= 0")
            if any(t <= 0 for t in ts):
                raise ValueError("NuTable times must be positive")
        if self.kind is ExperimentKind.SPECTRUM_BOUND:
            if not self.table_path:
                raise ValueError("SpectrumBound needs table_path")
            if not self.delta_list or not ts:
                raise ValueError("SpectrumBound needs delta_list and t_grid")
        eps = self.epsilon_levels
        if not eps or any(not (0.0 < e < 1.0) for e in eps):
            raise ValueError("epsilon_levels must lie strictly between 0 and 1")
        if len(set(eps)) != len(eps):
            raise ValueError("epsilon_levels must be distinct")


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    if tok.startswith("exp(") and tok.endswith(")"):
        return math.exp(float(tok[4:-1]))
    return float(tok)


def _parse_number_list(text: str) -> tuple[float, ...]:
    return tuple(_parse_number(tok) for tok in text.split(",") if tok.strip())


def _parse_grid(text: str) -> tuple[float, ...]:
    """'a : b : step' (inclusive ends, within rounding) or a comma list."""
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"grid must be 'start : stop : step', got {text!r}")
        a, b, step = (_parse_number(p) for p in parts)
        if step <= 0 or b < a:
            raise ValueError("grid needs step > 0 and stop >= start")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return tuple(a + k * step for k in range(count))
    return _parse_number_list(text)


_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}
_GRID_KEYS = {"t_grid", "lambda_grid"}
_LIST_KEYS = {"delta_list", "epsilon_levels", "coeffs"}
_INT_KEYS = {"n_samples", "m_resolution", "master_seed", "d"}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the documented key = value format into a validated config."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "kind" not in raw:
        raise ValueError("config must set 'kind'")
    try:
        kind = ExperimentKind(raw.pop("kind"))
    except ValueError as exc:
        raise ValueError(str(exc)) from exc
    kwargs: dict = {"kind": kind}
    try:
        for key, value in raw.items():
            if key in _GRID_KEYS:
                kwargs[key] = _parse_grid(value)
            elif key in _LIST_KEYS:
                kwargs[key] = _parse_number_list(value)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            else:
                kwargs[key] = value
    except ValueError as exc:
        raise ValueError(f"bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def _load_surface(config: ExperimentConfig):
    if config.surface == "bolza":
        return bolza_group()
    try:
        return load_surface_json(config.surface)
    except OSError as exc:
        raise ValueError(f"cannot read surface file {config.surface}: {exc}") from exc


# -- cutoff reports --------------------------------------------------------------


@dataclass(frozen=True)
class DeltaCurve:
    """Measured TV curve for one starting-ball radius."""

    delta: float
    t_star: float
    times: tuple[float, ...]
    tv_raw: tuple[float, ...]
    tv_monotone: tuple[float, ...]
    t_mix: dict[float, float]  # epsilon -> crossing (nan when not bracketed)

    def ratio(self, epsilon: float = 0.5) -> float:
        return self.t_mix.get(epsilon, math.nan) / self.t_star

    def window(self) -> float:
        return self.t_mix.get(0.25, math.nan) - self.t_mix.get(0.75, math.nan)


@dataclass(frozen=True)
class CutoffReport:
    kind: ExperimentKind
    d: int
    curves: tuple[DeltaCurve, ...]
    reference_curves: tuple[DeltaCurve, ...] = ()
    advisories: tuple[str, ...] = ()


def monotone_envelope(values) -> np.ndarray:
    """Running minimum: the least non-increasing majorant-from-the-left."""
    return np.minimum.accumulate(np.asarray(values, dtype=float))


def crossing_time(times, mono, epsilon: float) -> float:
    """First time the non-increasing curve reaches epsilon, linearly
    interpolated; nan when the grid does not bracket the crossing."""
    times = np.asarray(times, dtype=float)
    mono = np.asarray(mono, dtype=float)
    below = np.flatnonzero(mono <= epsilon)
    if len(below) == 0 or below[0] == 0:
        return math.nan
    i = int(below[0])
    frac = (mono[i - 1] - epsilon) / (mono[i - 1] - mono[i])
    return float(times[i - 1] + frac * (times[i] - times[i - 1]))


def _measure_curve(config, process_idx, delta_idx, delta, group, domain):
    """TV at every grid time for one process and one delta."""
    root = SeededStream(config.master_seed, 0)
    raw = []
    for j, t in enumerate(config.t_grid):
        stream = root.substream(process_idx, delta_idx, j)
        if process_idx == 0:
            em = geodesic_measure(
                group, domain, 0j, delta, t, stream, config.n_samples, config.m_resolution
            )
        else:
            em = brownian_measure(
                group, domain, 0j, t, stream, config.n_samples, config.m_resolution
            )
        raw.append(tv_against_uniform(em).value)
    return raw


def _build_curve(config, process_idx, delta_idx, delta, d, group, domain, advisories):
    t_star = -math.log(delta) / (d - 1)
    if process_idx == 1:
        t_star *= 2.0 / (d - 1)  # diffusive axis: escape rate (d-1)/2
    name = "geodesic" if process_idx == 0 else "brownian"
    raw = _measure_curve(config, process_idx, delta_idx, delta, group, domain)
    mono = monotone_envelope(raw)
    times = config.t_grid
    t_mix: dict[float, float] = {}
    if len(times) < 2:
        advisories.append(
            f"{name} delta={delta!r}: single-point grid; curves only, no crossings"
        )
        t_mix = {eps: math.nan for eps in config.epsilon_levels}
    else:
        for eps in config.epsilon_levels:
            t_mix[eps] = crossing_time(times, mono, eps)
            if math.isnan(t_mix[eps]):
                side = "below" if mono[0] <= eps else "above"
                advisories.append(
                    f"{name} delta={delta!r}: TV stays {side} epsilon={eps} on the"
                    " grid; crossing not measured"
                )
    if times and times[-1] < t_star:
        advisories.append(
            f"{name} delta={delta!r}: grid ends at {times[-1]!r} before the"
            f" predicted mixing time {t_star!r}"
        )
    return DeltaCurve(
        delta=delta,
        t_star=t_star,
        times=tuple(times),
        tv_raw=tuple(float(v) for v in raw),
        tv_monotone=tuple(float(v) for v in mono),
        t_mix=t_mix,
    )


def run_geodesic_cutoff(config: ExperimentConfig) -> CutoffReport:
    """Measured cutoff curves of the geodesic process for each delta."""
    if config.kind is not ExperimentKind.GEODESIC_CUTOFF:
        raise ValueError("config kind must be GeodesicCutoff")
    group, domain = _load_surface(config)
    d = 2
    advisories: list[str] = []
    curves = tuple(
        _build_curve(config, 0, i, delta, d, group, domain, advisories)
        for i, delta in enumerate(config.delta_list)
    )
    report = CutoffReport(
        kind=config.kind, d=d, curves=curves, advisories=tuple(advisories)
    )
    _write_cutoff_outputs(config, report)
    return report


def run_brownian_mixing(config: ExperimentConfig) -> CutoffReport:
    """Brownian TV curves plus matched geodesic reference curves.

    The Brownian predicted axis carries the extra factor 2/(d-1) (the flow
    covers distance t while the diffusion's radius grows like (d-1)t/2); the
    report pairs each Brownian curve with a geodesic run at the same
    configuration so their epsilon-crossings can be compared directly.
    """
    if config.kind is not ExperimentKind.BROWNIAN_MIXING:
        raise ValueError("config kind must be BrownianMixing")
    group, domain = _load_surface(config)
    d = 2
    advisories: list[str] = []
    curves = tuple(
        _build_curve(config, 1, i, delta, d, group, domain, advisories)
        for i, delta in enumerate(config.delta_list)
    )
    reference = tuple(
        _build_curve(config, 0, i, delta, d, group, domain, advisories)
        for i, delta in enumerate(config.delta_list)
    )
    report = CutoffReport(
        kind=config.kind,
        d=d,
        curves=curves,
        reference_curves=reference,
        advisories=tuple(advisories),
    )
    _write_cutoff_outputs(config, report)
    return report


# -- output emission ---------------------------------------------------------------


def _out_paths(config: ExperimentConfig) -> tuple[Path, Path]:
    base = Path(config.output_path)
    if base.parent:
        os.makedirs(base.parent, exist_ok=True)
    return base.with_suffix(".csv"), base.with_suffix(".json")


def _nan_to_none(x: float):
    return None if math.isnan(x) else x


def _curve_summary(curve: DeltaCurve) -> dict:
    window = curve.window()
    t_half = curve.t_mix.get(0.5, math.nan)
    return {
        "delta": curve.delta,
        "t_star_predicted": curve.t_star,
        "t_mix": {repr(eps): _nan_to_none(v) for eps, v in sorted(curve.t_mix.items())},
        "ratio_t_mix_half_to_t_star": _nan_to_none(t_half / curve.t_star),
        "window": _nan_to_none(window),
        "window_over_t_star": _nan_to_none(window / curve.t_star),
    }


def _write_cutoff_outputs(config: ExperimentConfig, report: CutoffReport) -> None:
    csv_path, json_path = _out_paths(config)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["process", "delta", "t", "tv_raw", "tv_monotone"])
        for name, curves in (
            ("geodesic", report.reference_curves),
            ("brownian", report.curves),
        ) if report.kind is ExperimentKind.BROWNIAN_MIXING else (
            ("geodesic", report.curves),
        ):
            for curve in curves:
                for t, raw, mono in zip(curve.times, curve.tv_raw, curve.tv_monotone):
                    writer.writerow([name, repr(curve.delta), repr(t), repr(raw), repr(mono)])
    summary: dict = {
        "kind": report.kind.value,
        "surface": config.surface,
        "d": report.d,
        "n_samples": config.n_samples,
        "m_resolution": config.m_resolution,
        "master_seed": config.master_seed,
        "epsilon_levels": list(config.epsilon_levels),
        "curves": [_curve_summary(c) for c in report.curves],
        "advisories": list(report.advisories),
    }
    if report.kind is ExperimentKind.BROWNIAN_MIXING:
        summary["geodesic_reference"] = [_curve_summary(c) for c in report.reference_curves]
        comparisons = []
        for b, g in zip(report.curves, report.reference_curves):
            tb = b.t_mix.get(0.5, math.nan)
            tg = g.t_mix.get(0.5, math.nan)
            factor = tb / tg if (tg and not math.isnan(tg) and not math.isnan(tb)) else math.nan
            comparisons.append(
                {
                    "delta": b.delta,
                    "brownian_t_mix_half": _nan_to_none(tb),
                    "geodesic_t_mix_half": _nan_to_none(tg),
                    "measured_factor": _nan_to_none(factor),
                    "predicted_factor": 2.0 / (report.d - 1),
                }
            )
        summary["factor_comparison"] = comparisons
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- nu tables -------------------------------------------------------------------


@dataclass(frozen=True)
class NuTableReport:
    rows: tuple[dict, ...]
    all_ok: bool
    csv_text: str


def run_nu_table(config: ExperimentConfig) -> NuTableReport:
    """Multiplier values over (t, lambda) with decay-class envelopes.

    Each row carries value, envelope, ratio, the discarded imaginary part,
    and the quadrature error estimate; a row is flagged when the value is
    not real within tolerance (reality), exceeds 1 in magnitude
    (contraction), or failed the accuracy target.  The report is ok only if
    no row is flagged.
    """
    if config.kind is not ExperimentKind.NU_TABLE:
        raise ValueError("config kind must be NuTable")
    d = config.d
    values, residuals, errors = multiplier_grid(d, config.lambda_grid, config.t_grid)
    rows = []
    all_ok = True
    for i, t in enumerate(config.t_grid):
        for j, lam in enumerate(config.lambda_grid):
            sp = spectral_point(d, lam)
            value = float(values[i, j])
            envelope = decay_class(sp, float(t))
            flags = []
            if abs(residuals[i, j]) > NU_REALITY_TOL:
                flags.append("reality")
            if abs(value) > 1.0 + NU_CONTRACTION_TOL:
                flags.append("contraction")
            if errors[i, j] > NU_ACCURACY_TOL:
                flags.append("accuracy")
            all_ok &= not flags
            rows.append(
                {
                    "d": d,
                    "t": float(t),
                    "lambda": float(lam),
                    "value": value,
                    "envelope": envelope,
                    "ratio": abs(value) / envelope,
                    "imag_residual": float(residuals[i, j]),
                    "error_estimate": float(errors[i, j]),
                    "flags": ";".join(flags) or "ok",
                }
            )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["d", "t", "lambda", "value", "envelope", "ratio",
              "imag_residual", "error_estimate", "flags"]
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [row["d"]] + [repr(row[k]) for k in header[1:-1]] + [row["flags"]]
        )
    report = NuTableReport(rows=tuple(rows), all_ok=all_ok, csv_text=buf.getvalue())
    if config.output_path != "-":
        csv_path, _ = _out_paths(config)
        csv_path.write_text(report.csv_text, encoding="utf-8")
    return report


# -- spectrum bound curves ----------------------------------------------------------


@dataclass(frozen=True)
class SpectrumBoundReport:
    coarse_crossings: tuple[dict, ...]
    fine_crossings: dict | None
    profile_flags: tuple[float, ...]
    csv_text: str
    advisories: tuple[str, ...]


def run_spectrum_bound(
    config: ExperimentConfig, table: SpectrumTable | None = None
) -> SpectrumBoundReport:
    """Spectral upper-bound curves with crossing times and density profile.

    Coarse curves (spectral gap only) are produced per delta; the fine curve
    (full eigenvalue sum, square root of the squared-TV bound) is added when
    per-row coefficients are supplied.  Crossings that the grid never
    reaches become advisories, mirroring the measured-curve behavior.
    """
    if config.kind is not ExperimentKind.SPECTRUM_BOUND:
        raise ValueError("config kind must be SpectrumBound")
    if table is None:
        table = load_spectrum(config.table_path)
    times = np.asarray(config.t_grid, dtype=float)
    advisories: list[str] = []
    rows: list[tuple] = []
    coarse_crossings = []
    for delta in config.delta_list:
        curve = coarse_bound_curve(table, delta, times)
        crossings: dict[str, float | None] = {}
        for eps in config.epsilon_levels:
            try:
                crossings[repr(eps)] = mixing_time_from_bound(curve, eps)
            except ValueError:
                crossings[repr(eps)] = None
                advisories.append(
                    f"coarse delta={delta!r}: bound never reaches epsilon={eps}"
                    " on the grid"
                )
        coarse_crossings.append({"delta": delta, "crossings": crossings})
        for t, b in zip(curve.times, curve.bounds):
            rows.append(("coarse", repr(delta), repr(float(t)), repr(float(b))))
    fine = None
    if config.coeffs:
        vals = np.array(
            [
                math.sqrt(tv_bound_majl2(table, config.coeffs, float(t)))
                for t in times
            ]
        )
        crossings = {}
        for eps in config.epsilon_levels:
            below = np.flatnonzero(vals <= eps)
            crossings[repr(eps)] = (
                crossing_time(times, np.minimum.accumulate(vals), eps)
                if len(below)
                else None
            )
            if crossings[repr(eps)] is None:
                advisories.append(
                    f"fine curve: bound never reaches epsilon={eps} on the grid"
                )
        fine = {"crossings": crossings}
        for t, b in zip(times, vals):
            rows.append(("fine", "", repr(float(t)), repr(float(b))))
    profile = density_profile(table, PROFILE_S_GRID)
    flagged = tuple(p.s for p in profile if p.violates)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["curve", "delta", "t", "bound"])
    writer.writerows(rows)
    report = SpectrumBoundReport(
        coarse_crossings=tuple(coarse_crossings),
        fine_crossings=fine,
        profile_flags=flagged,
        csv_text=buf.getvalue(),
        advisories=tuple(advisories),
    )
    if config.output_path != "-":
        csv_path, json_path = _out_paths(config)
        csv_path.write_text(report.csv_text, encoding="utf-8")
        summary = {
            "kind": config.kind.value,
            "table_path": config.table_path,
            "coarse_crossings": list(coarse_crossings),
            "fine_crossings": fine,
            "profile_violations_at_s": list(flagged),
            "advisories": list(advisories),
        }
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report

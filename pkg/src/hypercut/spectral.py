"""Eigenvalue-table analysis: series classification, density profiles, and
spectral upper bounds on total-variation mixing.

Tables are inputs, not computed: solving the Laplace eigenproblem on a
hyperbolic quotient is out of scope, and every bound here takes the spectrum
as given.  The trivial eigenvalue 0 (the stationary mode) is always excluded
from bound sums — the bounds control the distance of the evolved density
minus its mean from zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvariantViolation
from .hypgeom import ball_volume
from .multiplier import sigma_d

# Tolerance for flagging density-profile violations: strict inequalities at
# floating-point equality would flag saturating fixtures, which are legal.
PROFILE_TOL = 1e-9
# Bisection width for mixing-time extraction from bound curves.
CROSSING_TOL = 1e-6


@dataclass(frozen=True)
class SpectrumTable:
    """Laplace spectrum of a compact manifold: dimension, volume, and the
    sorted eigenvalues with multiplicities.  `source` is free-text provenance
    carried for reporting only."""

    dim: int
    volume: float
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    source: str = ""

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=np.int64)
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "multiplicities", mult)
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise InvariantViolation("dimension must be an integer >= 2")
        if not (self.volume > 0 and math.isfinite(self.volume)):
            raise InvariantViolation("volume must be positive and finite")
        if eig.ndim != 1 or mult.shape != eig.shape or len(eig) == 0:
            raise InvariantViolation("eigenvalues/multiplicities must be matching 1-d lists")
        if np.any(~np.isfinite(eig)) or np.any(eig < 0):
            row = int(np.flatnonzero(~np.isfinite(eig) | (eig < 0))[0])
            raise InvariantViolation(f"eigenvalue row {row} is negative or non-finite")
        if np.any(np.diff(eig) < 0):
            row = int(np.flatnonzero(np.diff(eig) < 0)[0]) + 1
            raise InvariantViolation(f"eigenvalues not sorted ascending at row {row}")
        if np.any(mult < 1):
            row = int(np.flatnonzero(mult < 1)[0])
            raise InvariantViolation(f"multiplicity at row {row} must be >= 1")
        if eig[0] != 0.0:
            raise InvariantViolation(
                "row 0 must be the eigenvalue 0 (connected manifold)"
            )
        if mult[0] != 1:
            raise InvariantViolation("eigenvalue 0 must have multiplicity 1")
        if len(eig) > 1 and eig[1] == 0.0:
            raise InvariantViolation("eigenvalue 0 repeated at row 1")

    @property
    def n_rows(self) -> int:
        return len(self.eigenvalues)

    def spectral_gap(self) -> float:
        """Smallest positive eigenvalue."""
        if self.n_rows < 2:
            raise InvariantViolation("table has no positive eigenvalue")
        return float(self.eigenvalues[1])


def load_spectrum(source: str | Path) -> SpectrumTable:
    """Read a spectrum table.

    Format: UTF-8 text; first non-blank line is a header `# d=<int> V=<float>`;
    each following non-comment line is `lambda[,multiplicity]`; `#` starts a
    comment anywhere.  Parse errors name the offending line.
    """
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    dim = volume = None
    rows: list[tuple[float, int]] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not header_seen:
                parts = line[1:].split()
                kv = dict(p.split("=", 1) for p in parts if "=" in p)
                if "d" in kv and "V" in kv:
                    try:
                        dim = int(kv["d"])
                        volume = float(kv["V"])
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad header values: {exc}") from exc
                    header_seen = True
            continue
        if not header_seen:
            raise ValueError(f"{path}:{lineno}: data before the `# d=<int> V=<float>` header")
        body = line.split("#", 1)[0].strip()
        parts = [p.strip() for p in body.split(",")]
        if len(parts) not in (1, 2):
            raise ValueError(f"{path}:{lineno}: expected `lambda[,multiplicity]`")
        try:
            lam = float(parts[0])
            mult = int(parts[1]) if len(parts) == 2 else 1
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        rows.append((lam, mult))
    if not header_seen:
        raise ValueError(f"{path}: missing `# d=<int> V=<float>` header")
    if not rows:
        raise ValueError(f"{path}: no eigenvalue rows")
    eig = np.array([r[0] for r in rows], dtype=float)
    mult = np.array([r[1] for r in rows], dtype=np.int64)
    return SpectrumTable(dim=dim, volume=volume, eigenvalues=eig,
                         multiplicities=mult, source=str(path))


def save_spectrum(table: SpectrumTable, dest: str | Path) -> None:
    """Write a table in the load format; load(save(x)) is bit-identical
    (floats serialized via repr, which round-trips exactly)."""
    lines = [f"# d={table.dim} V={table.volume!r}"]
    for lam, mult in zip(table.eigenvalues, table.multiplicities):
        if mult == 1:
            lines.append(repr(float(lam)))
        else:
            lines.append(f"{float(lam)!r},{int(mult)}")
    Path(dest).write_text("\n".join(lines) + "\n", encoding="utf-8")


def s_parameter(d: int, eigenvalue: float) -> float:
    """The unique s in (0,1) with eigenvalue = sigma_d (1 - s^2); defined for
    complementary-series eigenvalues 0 < lambda < sigma_d only."""
    sig = sigma_d(d)
    if not (0.0 < eigenvalue < sig):
        raise ValueError(f"s-parameter requires 0 < eigenvalue < {sig}")
    return math.sqrt(1.0 - eigenvalue / sig)


@dataclass(frozen=True)
class ProfilePoint:
    s: float
    count: int
    ratio: float          # ln(count) / ln(V)
    allowed: float        # the density bound 1 - s
    violates: bool


def density_profile(table: SpectrumTable, s_grid: Sequence[float]) -> list[ProfilePoint]:
    """Eigenvalue-counting profile I(s) = ln #{k : lambda_k <= sigma_d (1-s^2)}
    / ln V on the given s grid, with flags where the density bound
    I(s) <= 1 - s fails (beyond a 1e-9 saturation tolerance).

    Counts include multiplicity and the trivial eigenvalue (the counter runs
    over all k), so count >= 1 and the ratio is always defined.
    """
    sig = sigma_d(table.dim)
    logv = math.log(table.volume)
    out = []
    for s in s_grid:
        s = float(s)
        if not (0.0 < s < 1.0):
            raise ValueError("profile grid points must lie in (0, 1)")
        threshold = sig * (1.0 - s * s)
        count = int(table.multiplicities[table.eigenvalues <= threshold].sum())
        ratio = math.log(count) / logv if count > 0 else -math.inf
        allowed = 1.0 - s
        out.append(ProfilePoint(s, count, ratio, allowed, ratio > allowed + PROFILE_TOL))
    return out


def _decay_rates(table: SpectrumTable) -> np.ndarray:
    """Per-row exponential decay rate of the squared bound: (d-1) on the
    principal series, (1-s_k)(d-1) on the complementary series; 0 for the
    trivial row (excluded from sums by its coefficient mask)."""
    d = table.dim
    sig = sigma_d(d)
    rates = np.full(table.n_rows, float(d - 1))
    for k, lam in enumerate(table.eigenvalues):
        if lam == 0.0:
            rates[k] = 0.0
        elif lam < sig:
            rates[k] = (1.0 - s_parameter(d, lam)) * (d - 1)
    return rates


def tv_bound_majl2(
    table: SpectrumTable, coeffs: Sequence[float], t: float, C: float = 1.0
) -> float:
    """Spectral upper bound on the SQUARED total-variation distance:

        C t^2 ( sum_complementary e^{-(1-s_k)(d-1)t} c_k
                + sum_principal    e^{-(d-1)t}        c_k ),

    where c_k is the squared projection of the initial density onto the k-th
    eigenspace (one entry per table row, totalled over the eigenspace).  The
    trivial row's entry is ignored: the bound addresses the density minus its
    stationary part.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (table.n_rows,):
        raise ValueError(
            f"need one coefficient per table row ({table.n_rows}), got {coeffs.shape}"
        )
    if np.any(coeffs < 0):
        raise ValueError("squared coefficients must be non-negative")
    if not t > 0:
        raise ValueError("time must be positive")
    rates = _decay_rates(table)
    mask = table.eigenvalues > 0.0
    terms = coeffs[mask] * np.exp(-rates[mask] * t)
    return C * t * t * float(math.fsum(terms))


def tv_bound_coarse(table: SpectrumTable, delta: float, t: float, C: float = 1.0) -> float:
    """Coarse total-variation upper bound for a start uniform on a
    delta-ball, using only the spectral gap:

        sqrt( C t (V / Vol B_delta) e^{-(1-s_1)(d-1) t} )

    when the gap eigenvalue is complementary; if the gap is already principal
    (lambda_1 >= sigma_d) the principal rate e^{-(d-1)t} applies with the t^2
    prefactor of the underlying squared bound.
    """
    if not (delta > 0 and t > 0):
        raise ValueError("delta and t must be positive")
    lam1 = table.spectral_gap()
    if lam1 <= 0:
        raise InvariantViolation("spectral gap must be positive (connected manifold)")
    d = table.dim
    mass = table.volume / ball_volume(d, delta)
    if lam1 < sigma_d(d):
        s1 = s_parameter(d, lam1)
        inner = C * t * mass * math.exp(-(1.0 - s1) * (d - 1) * t)
    else:
        inner = C * t * t * mass * math.exp(-(d - 1) * t)
    return math.sqrt(inner)


@dataclass(frozen=True)
class CurveParams:
    delta: float
    volume: float
    s_1: float
    C: float


@dataclass(frozen=True)
class TVBoundCurve:
    """A sampled upper-bound curve t -> bound on d_TV, with an optional exact
    evaluator used to refine crossing times below grid resolution."""

    times: np.ndarray
    bounds: np.ndarray
    params: CurveParams | None = None
    evaluate: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        bounds = np.asarray(self.bounds, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "bounds", bounds)
        if times.ndim != 1 or times.shape != bounds.shape or len(times) == 0:
            raise InvariantViolation("times/bounds must be matching 1-d grids")
        if np.any(np.diff(times) <= 0):
            raise InvariantViolation("time grid must be strictly increasing")
        if np.any(bounds < 0):
            raise InvariantViolation("bounds must be non-negative")
        if self.params is not None:
            # The underlying forms are t^p e^{-alpha t} with p <= 2 and
            # alpha >= (1 - s_1)(d - 1) >= (1 - s_1); such curves are
            # decreasing past p/alpha, so 2/(1 - s_1) is past every turnover.
            turnover = 2.0 / max(1e-300, (1.0 - self.params.s_1))
            tail = times >= turnover
            tb = bounds[tail]
            if len(tb) > 1 and np.any(np.diff(tb) > 1e-12 * np.max(tb)):
                raise InvariantViolation("bound curve fails to decrease in its tail")


def coarse_bound_curve(
    table: SpectrumTable, delta: float, times: Sequence[float], C: float = 1.0
) -> TVBoundCurve:
    """Sample tv_bound_coarse on a time grid, carrying the exact evaluator."""
    times = np.asarray(times, dtype=float)
    vals = np.array([tv_bound_coarse(table, delta, float(t), C) for t in times])
    lam1 = table.spectral_gap()
    s1 = s_parameter(table.dim, lam1) if lam1 < sigma_d(table.dim) else 0.0
    return TVBoundCurve(
        times=times,
        bounds=vals,
        params=CurveParams(delta=delta, volume=table.volume, s_1=s1, C=C),
        evaluate=lambda t: tv_bound_coarse(table, delta, t, C),
    )


def mixing_time_from_bound(curve: TVBoundCurve, epsilon: float) -> float:
    """First time the bound curve drops to epsilon: the smallest grid point
    with bound <= epsilon, refined by bisection against the curve's evaluator
    (or the linear interpolant when no evaluator is attached) to 1e-6.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    below = np.flatnonzero(curve.bounds <= epsilon)
    if len(below) == 0:
        raise ValueError(
            "bound never reaches epsilon on the grid; extend the time range"
        )
    i = int(below[0])
    if i == 0:
        return float(curve.times[0])
    lo, hi = float(curve.times[i - 1]), float(curve.times[i])
    if curve.evaluate is not None:
        f = curve.evaluate
    else:
        t0, t1 = lo, hi
        b0, b1 = float(curve.bounds[i - 1]), float(curve.bounds[i])
        f = lambda t: b0 + (b1 - b0) * (t - t0) / (t1 - t0)
    while hi - lo > CROSSING_TOL:
        mid = 0.5 * (lo + hi)
        if f(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi

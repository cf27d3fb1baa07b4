"""Eigenvalue multiplier of the spherical-mean operator on hyperbolic d-space.

Averaging over the geodesic sphere of radius t acts on a Laplace
eigenfunction with eigenvalue lambda = ((d-1)/2)^2 + u^2 as multiplication by

    nu_t(lambda) = c_d * int_{-1}^{1} (cosh t + x sinh t)^{iu - (d-1)/2}
                                       (1 - x^2)^{(d-3)/2} dx,

normalized so nu_t(0) = 1 (radius-0 averaging is the identity), i.e.
c_d = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)).

Numerics: the substitution cosh t + x sinh t = e^s turns the integral into

    nu_t = c_d * K(d,t) * int_{-t}^{t} e^{ius} G(s) ds,
    G(s) = [(1 - e^{s-t})(1 - e^{-(s+t)})]^{(d-3)/2},
    K(d,t) = e^{t(d-3)/2} / sinh(t)^{d-2},

where the decay envelope sits entirely in the explicit prefactor K and the
remaining integrand is O(1), so node values match the answer's scale at every
(d, u, t) and float64 keeps absolute accuracy ~1e-14 even at t = 20+ where
the raw integrand spans e^{+-t(d-1)/2}.  A second substitution s = -t cos(phi)
removes the endpoint singularities of G for d = 2 (and the kinks for even d).
Panels follow the oscillation: the phase in s is exactly u*s, and the panel
count keeps at least 4 panels per period at the fastest point, refined by
doubling until the two-level difference meets the tolerance.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from .errors import AccuracyError

# Nodes per panel for the composite Gauss-Legendre rule.
_GL_ORDER = 16
# Panel-doubling cap; the base count already tracks u*t so this is generous.
_MAX_LEVELS = 20
# Hard resource cap on quadrature nodes per refinement level.
_MAX_NODES = 1 << 21
# Tolerances below this are not resolvable in float64 for this integral.
MIN_TOL = 1e-13
DEFAULT_TOL = 1e-12


class Series(enum.Enum):
    PRINCIPAL = "principal"
    COMPLEMENTARY = "complementary"
    TRIVIAL = "trivial"


def sigma_d(d: int) -> float:
    """Bottom of the principal spectrum on the universal cover: ((d-1)/2)^2."""
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError("dimension must be an integer >= 2")
    return ((d - 1) / 2.0) ** 2


@dataclass(frozen=True)
class SpectralPoint:
    """Eigenvalue lambda = sigma_d + u^2 with its spectral parameter.

    u is real (>= 0) on the principal series lambda >= sigma_d, purely
    imaginary with Im u in (0, (d-1)/2) on the complementary series
    0 < lambda < sigma_d, and i (d-1)/2 for the trivial eigenvalue 0.
    """

    d: int
    eigenvalue: float
    u: complex
    series: Series


def spectral_point(d: int, eigenvalue: float) -> SpectralPoint:
    """Classify an eigenvalue and compute its spectral parameter."""
    lam = float(eigenvalue)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError("eigenvalue must be finite and >= 0")
    sig = sigma_d(d)
    if lam >= sig:
        return SpectralPoint(d, lam, complex(math.sqrt(lam - sig)), Series.PRINCIPAL)
    if lam == 0.0:
        return SpectralPoint(d, lam, 1j * (d - 1) / 2.0, Series.TRIVIAL)
    return SpectralPoint(d, lam, 1j * math.sqrt(sig - lam), Series.COMPLEMENTARY)


@dataclass(frozen=True)
class NuResult:
    """Quadrature output: real value, discarded imaginary part, and the
    two-level error estimate (absolute, on the value)."""

    value: float
    imag_residual: float
    error_estimate: float


def multiplier_closed_d3(u: complex, t: float) -> float:
    """Closed form for d = 3: sin(u t) / (u sinh t), with the u -> 0 limit
    t / sinh t.  Accepts real or purely imaginary u (sin(i v t)/(i v) =
    sinh(v t)/v keeps it real)."""
    if t <= 0:
        raise ValueError("time must be positive")
    uc = complex(u)
    if abs(uc) * t < 1e-8:
        # sin(x)/x = 1 - x^2/6 + O(x^4); x = u t
        corr = 1.0 - (uc * t) ** 2 / 6.0
        return float((t / math.sinh(t)) * corr.real)
    return float((cmath.sin(uc * t) / (uc * math.sinh(t))).real)


def _norm_constant(d: int) -> float:
    # Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2))
    return math.exp(gammaln(d / 2.0) - gammaln((d - 1) / 2.0)) / math.sqrt(math.pi)


def _log_prefactor(d: int, t: float) -> float:
    # log K = t (d-3)/2 - (d-2) log sinh t, computed in log space.
    log_sinh = t + math.log1p(-math.exp(-2.0 * t)) - math.log(2.0)
    return t * (d - 3) / 2.0 - (d - 2) * log_sinh


def _panel_nodes(n_panels: int, t: float):
    """Gauss-Legendre nodes/weights on [0, pi] split into n_panels panels,
    mapped to s = -t cos(phi) with the Jacobian folded into the weights.

    Returns (s, s + t, t - s, weights).  The shifted variables are built from
    half-angle identities (s + t = 2t sin^2(phi/2), t - s = 2t cos^2(phi/2))
    so they keep full relative accuracy near the endpoints, where forming
    t + s by addition would cancel catastrophically and poison the d != 3
    envelope's inverse-square-root factors."""
    x, w = leggauss(_GL_ORDER)
    edges = np.linspace(0.0, math.pi, n_panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    phi = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wgt = (half[:, None] * w[None, :]).ravel()
    sin_h = np.sin(phi / 2.0)
    cos_h = np.cos(phi / 2.0)
    s_plus = 2.0 * t * sin_h * sin_h   # s + t
    s_minus = 2.0 * t * cos_h * cos_h  # t - s
    s = -t * np.cos(phi)
    jac = 2.0 * t * sin_h * cos_h      # t sin(phi)
    return s, s_plus, s_minus, wgt * jac


def _envelope(d: int, s_plus: np.ndarray, s_minus: np.ndarray) -> np.ndarray:
    """G(s) = [(1 - e^{s-t})(1 - e^{-(s+t)})]^{(d-3)/2}, stable at both ends."""
    if d == 3:
        return np.ones_like(s_plus)
    left = -np.expm1(-s_plus)    # 1 - e^{-(s+t)}
    right = -np.expm1(-s_minus)  # 1 - e^{s-t}
    return (left * right) ** ((d - 3) / 2.0)


def _sum_panels(contrib: np.ndarray, n_panels: int) -> complex:
    """Compensated total: exact fsum over per-panel partial sums."""
    per_panel = contrib.reshape(n_panels, _GL_ORDER).sum(axis=1)
    return complex(math.fsum(per_panel.real), math.fsum(per_panel.imag))


def _integral_batch(d: int, us: np.ndarray, t: float, n_panels: int) -> np.ndarray:
    s, s_plus, s_minus, w = _panel_nodes(n_panels, t)
    base = _envelope(d, s_plus, s_minus) * w
    out = np.empty(len(us), dtype=complex)
    # Block the u axis so the phase matrix stays small.
    block = max(1, int(4_000_000 // max(1, s.size)))
    for lo in range(0, len(us), block):
        ub = us[lo : lo + block]
        phase = np.exp(1j * np.multiply.outer(ub, s))
        contrib = phase * base
        for k in range(len(ub)):
            out[lo + k] = _sum_panels(contrib[k], n_panels)
    return out


def _quadrature_u(sp: SpectralPoint) -> complex:
    """Internal u convention: the integral is even in u, and taking
    iu = +|Im u| on the complementary/trivial series makes the integrand
    positive (so e.g. nu_t(0) = 1 comes out exact to rounding)."""
    if sp.series is Series.PRINCIPAL:
        return complex(abs(sp.u.real), 0.0)
    return complex(0.0, -abs(sp.u.imag))


def multiplier_quadrature_batch(
    d: int,
    points: list[SpectralPoint],
    t: float,
    tol: float = DEFAULT_TOL,
) -> list[NuResult]:
    """Evaluate nu_t at many eigenvalues of one dimension with shared panels.

    Refinement doubles the panel count until consecutive levels agree within
    tol (absolute, on the final value) for every point, with a relative
    floor of 1e-13 so converged tiny values do not trigger endless doubling.
    """
    if t <= 0:
        raise ValueError("time must be positive")
    if tol < MIN_TOL:
        raise ValueError(f"tolerance below {MIN_TOL} is not attainable in float64")
    if any(p.d != d for p in points):
        raise ValueError("all spectral points must share the dimension d")
    us = np.array([_quadrature_u(p) for p in points], dtype=complex)
    scale = _norm_constant(d) * math.exp(_log_prefactor(d, t))
    u_extent = float(np.max(np.abs(us.real) + np.abs(us.imag))) if len(us) else 0.0
    n0 = max(16, int(math.ceil(u_extent * t)))
    prev = _integral_batch(d, us, t, n0)
    n = n0
    curr = prev
    for _ in range(_MAX_LEVELS):
        n *= 2
        if n * _GL_ORDER > _MAX_NODES:
            break
        curr = _integral_batch(d, us, t, n)
        err = np.abs(curr - prev)
        good = (err * scale <= tol) | (err <= 1e-13 * np.abs(curr))
        if np.all(good):
            vals = scale * curr
            return [
                NuResult(
                    value=float(v.real),
                    imag_residual=abs(float(v.imag)),
                    error_estimate=float(e * scale),
                )
                for v, e in zip(vals, err)
            ]
        prev = curr
    raise AccuracyError(
        f"quadrature did not reach tol={tol} after {_MAX_LEVELS} doublings",
        best_estimate=[float((scale * c).real) for c in curr],
        error_estimate=[float(e * scale) for e in np.abs(curr - prev)],
    )


def multiplier_quadrature(sp: SpectralPoint, t: float, tol: float = DEFAULT_TOL) -> NuResult:
    """nu_t(lambda) by adaptive quadrature; see the module docstring."""
    return multiplier_quadrature_batch(sp.d, [sp], t, tol)[0]


def multiplier_grid(
    d: int,
    eigenvalues,
    times,
    tol: float = DEFAULT_TOL,
):
    """nu_t over a (time x eigenvalue) grid.

    Returns (values, imag_residuals, error_estimates) arrays of shape
    (len(times), len(eigenvalues)); rows share one panel set each.
    """
    points = [spectral_point(d, lam) for lam in np.asarray(eigenvalues, dtype=float)]
    times = np.asarray(times, dtype=float)
    shape = (len(times), len(points))
    values = np.empty(shape)
    residuals = np.empty(shape)
    errors = np.empty(shape)
    for i, t in enumerate(times):
        row = multiplier_quadrature_batch(d, points, float(t), tol)
        values[i] = [r.value for r in row]
        residuals[i] = [r.imag_residual for r in row]
        errors[i] = [r.error_estimate for r in row]
    return values, residuals, errors


# -- decay envelopes ----------------------------------------------------------


def decay_bound(sp: SpectralPoint, t: float, t0: float = 1.0, C: float = 1.0) -> float:
    """Envelope C * min(t, |u|^{-(d-1)/2}) e^{-(d-1)t/2} on the principal
    series and C * min(t, 1/v) e^{(v - (d-1)/2) t} (v = Im u) on the
    complementary/trivial series, valid for t >= t0 > 0.

    At u = 0 (and v -> 0) the second min argument is +inf, so the envelope
    degrades continuously to C t e^{-(d-1)t/2}.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    if t < t0:
        raise ValueError("envelope only applies for t >= t0")
    d = sp.d
    if sp.series is Series.PRINCIPAL:
        u = abs(sp.u.real)
        cap = u ** (-(d - 1) / 2.0) if u > 0 else math.inf
        return C * min(t, cap) * math.exp(-(d - 1) * t / 2.0)
    v = abs(sp.u.imag)
    cap = 1.0 / v if v > 0 else math.inf
    return C * min(t, cap) * math.exp((v - (d - 1) / 2.0) * t)


def decay_class(sp: SpectralPoint, t: float) -> float:
    """Coarse decay rate by series: t e^{-(d-1)t/2} (principal) or
    t e^{-(d-1)(1-s)t/2} with s = sqrt(1 - lambda/sigma_d) (complementary;
    s = 1 for the trivial eigenvalue, giving the constant-t class)."""
    if t <= 0:
        raise ValueError("time must be positive")
    d = sp.d
    if sp.series is Series.PRINCIPAL:
        return t * math.exp(-(d - 1) * t / 2.0)
    s = abs(sp.u.imag) / ((d - 1) / 2.0)
    return t * math.exp(-(d - 1) * (1.0 - s) * t / 2.0)


# Envelope constants frozen with ~10% headroom above the numerically located
# supremum of |nu_t| / envelope over the CONTINUOUS rectangle
# t in [1, 20] x lambda in [0, 400] (so refining the grid cannot cross them):
#   d=2: sup = 2.5178 at the corner t=20, u ~ 0.0544 (where tan(ut) = 2ut
#        meets the u^{-1/2} branch of the min);
#   d=3: sup = e^t/sinh(t) at t=1 = 2/(1-e^{-2}) = 2.31303...,
#        provably the maximum of the closed-form ratio.
# The acceptance suite re-fits on a 10x denser grid and checks these hold.
FROZEN_ENVELOPE_C = {2: 2.80, 3: 2.50}


def fit_envelope_constant(
    d: int,
    t_grid,
    lambda_grid,
    t0: float = 1.0,
    tol: float = DEFAULT_TOL,
):
    """Smallest C with |nu_t| <= C * envelope on the given grid.

    Returns (C, (t_at_max, lambda_at_max)).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if np.any(t_grid < t0):
        raise ValueError("grid times must satisfy t >= t0")
    points = [spectral_point(d, lam) for lam in lambda_grid]
    best = 0.0
    arg = (float(t_grid[0]), float(lambda_grid[0]))
    for t in t_grid:
        row = multiplier_quadrature_batch(d, points, float(t), tol)
        for sp, res in zip(points, row):
            env = decay_bound(sp, float(t), t0=t0, C=1.0)
            ratio = abs(res.value) / env
            if ratio > best:
                best = ratio
                arg = (float(t), sp.eigenvalue)
    return best, arg

"""Hyperboloid-model primitives for real hyperbolic d-space, any d >= 2.

Points are rows of the upper sheet {x in R^{d+1} : <x,x> = 1, x_0 >= 1} of the
unit hyperboloid for the Minkowski form

    <x, y> = x_0 y_0 - x_1 y_1 - ... - x_d y_d,

unit tangent vectors satisfy <v,v> = -1 and <p,v> = 0.  Every function accepts
batched inputs: the last axis has length d+1 and leading axes broadcast.
Angles and distances are exact model quantities, no small-curvature
approximations anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as _gamma

from .errors import InvariantViolation, NumericError

# On-sheet / tangency tolerance for constructor checks.
POINT_TOL = 1e-12
# Pairings may land this far below 1 from rounding before we call it an error.
PAIRING_CLAMP = 1e-12
# Grid size for inverse-CDF radial sampling.
RADIAL_GRID = 4096


class UnitTangent(NamedTuple):
    """A base point with a unit tangent vector, both shaped (..., d+1)."""

    base: np.ndarray
    dir: np.ndarray


def validate_dim(d: int) -> int:
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def minkowski_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairing x_0 y_0 - sum_i x_i y_i over the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x[..., 0] * y[..., 0] - np.einsum("...i,...i->...", x[..., 1:], y[..., 1:])


def origin(d: int) -> np.ndarray:
    """Base point (1, 0, ..., 0)."""
    d = validate_dim(d)
    p = np.zeros(d + 1)
    p[0] = 1.0
    return p


def check_point(p: np.ndarray, tol: float = POINT_TOL) -> np.ndarray:
    """Validate <p,p> = 1 and p_0 >= 1 within tol; returns p unchanged."""
    p = np.asarray(p, dtype=float)
    norm = minkowski_dot(p, p)
    if not np.all(np.abs(norm - 1.0) <= tol * np.maximum(1.0, np.abs(p[..., 0]) ** 2)):
        raise InvariantViolation("point is off the unit hyperboloid beyond tolerance")
    if not np.all(p[..., 0] >= 1.0 - tol):
        raise InvariantViolation("point is not on the upper sheet")
    return p


def check_tangent(z: UnitTangent, tol: float = 1e-9) -> UnitTangent:
    """Validate <v,v> = -1 and <p,v> = 0 within tol."""
    check_point(z.base, tol)
    vv = minkowski_dot(z.dir, z.dir)
    pv = minkowski_dot(z.base, z.dir)
    scale = np.maximum(1.0, np.asarray(z.base)[..., 0] ** 2)
    if not (np.all(np.abs(vv + 1.0) <= tol * scale) and np.all(np.abs(pv) <= tol * scale)):
        raise InvariantViolation("tangent vector fails unit/orthogonality check")
    return z


def renormalize_point(p: np.ndarray) -> np.ndarray:
    """Project a nearly-on-sheet point back onto the hyperboloid."""
    p = np.asarray(p, dtype=float)
    norm = minkowski_dot(p, p)
    if np.any(norm <= 0):
        raise NumericError("cannot renormalize: non-positive Minkowski norm")
    return p / np.sqrt(norm)[..., None]


def renormalize_tangent(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minkowski-orthogonalize v against the (unit) point p and rescale."""
    v = v - minkowski_dot(v, p)[..., None] * p
    nn = -minkowski_dot(v, v)
    if np.any(nn <= 0):
        raise NumericError("cannot renormalize: tangent vector degenerated")
    return v / np.sqrt(nn)[..., None]


def geodesic_flow(z: UnitTangent, t) -> UnitTangent:
    """Unit-speed geodesic flow for time t (scalar or broadcastable array).

    (p, v) -> (cosh t * p + sinh t * v,  sinh t * p + cosh t * v), renormalized
    onto the sheet / tangent bundle to absorb rounding drift.
    """
    t = np.asarray(t, dtype=float)
    ct = np.cosh(t)[..., None]
    st = np.sinh(t)[..., None]
    p = ct * z.base + st * z.dir
    v = st * z.base + ct * z.dir
    p = renormalize_point(p)
    v = renormalize_tangent(p, v)
    return UnitTangent(p, v)


def distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Geodesic distance arccosh(<p,q>), clamped at 1 within PAIRING_CLAMP."""
    pairing = minkowski_dot(p, q)
    low = pairing < 1.0
    if np.any(pairing < 1.0 - PAIRING_CLAMP):
        raise NumericError("Minkowski pairing below 1 beyond tolerance")
    if np.any(low):
        pairing = np.where(low, 1.0, pairing)
    return np.arccosh(pairing)


# -- volumes ---------------------------------------------------------------


def gamma_d(d: int) -> float:
    """Surface measure constant 2 pi^{d/2} / Gamma(d/2) of the unit (d-1)-sphere."""
    d = validate_dim(d)
    return float(2.0 * math.pi ** (d / 2.0) / _gamma(d / 2.0))


@lru_cache(maxsize=8)
def _gl_nodes(n: int):
    x, w = leggauss(n)
    return x, w


def ball_volume(d: int, r) -> np.ndarray:
    """Volume of a geodesic ball, Gamma_d * int_0^r sinh^{d-1}(u) du.

    Closed forms for d = 2, 3; 128-node Gauss-Legendre otherwise (the
    integrand is entire, so the rule is accurate to ~1e-14 relative for the
    radii this package meets).
    """
    d = validate_dim(d)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be >= 0")
    if d == 2:
        return 2.0 * math.pi * (np.cosh(r) - 1.0)
    if d == 3:
        return math.pi * (np.sinh(2.0 * r) - 2.0 * r)
    x, w = _gl_nodes(128)
    half = r[..., None] / 2.0
    nodes = half * (x + 1.0)
    integral = half[..., 0] * np.sum(w * np.sinh(nodes) ** (d - 1), axis=-1)
    return gamma_d(d) * integral


def sphere_area(d: int, r) -> np.ndarray:
    """Area of the geodesic sphere of radius r: Gamma_d * sinh^{d-1}(r)."""
    d = validate_dim(d)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be >= 0")
    return gamma_d(d) * np.sinh(r) ** (d - 1)


# -- tangent frames and uniform directions ---------------------------------


def tangent_frame(p: np.ndarray) -> np.ndarray:
    """Minkowski-orthonormal tangent frame at p, shaped (..., d, d+1).

    Row i is the parallel transport of the canonical axis e_i from the origin
    to p along the connecting geodesic:

        f_i = e_i + p_i / (1 + p_0) * (o + p),

    which is exactly orthonormal (<f_i, f_j> = -delta_ij, <f_i, p> = 0) for
    every base point, with no degenerate cases since p_0 >= 1.
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1] - 1
    spatial = p[..., 1:]                          # (..., d)
    coef = spatial / (1.0 + p[..., :1])           # p_i / (1 + p_0)
    frame = np.zeros(p.shape[:-1] + (d, d + 1))
    frame[..., :, 0] = spatial                    # e_i[0] + coef_i * (1 + p_0) = p_i
    idx = np.arange(d)
    frame[..., idx, idx + 1] = 1.0
    frame[..., :, 1:] += coef[..., :, None] * spatial[..., None, :]
    return frame


def sample_tangent_uniform(rng: np.random.Generator, p: np.ndarray, size: int | None = None) -> UnitTangent:
    """Uniform unit tangent vector(s) at p.

    A standard Gaussian is drawn in the orthonormal tangent frame and
    normalized, which is the uniform law on the tangent unit sphere.  If p is
    a single point and size is given, the result is batched to (size, d+1).
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1] - 1
    if size is not None:
        if p.ndim != 1:
            raise ValueError("size is only supported for a single base point")
        p = np.broadcast_to(p, (size, d + 1))
    frame = tangent_frame(p)
    g = rng.standard_normal(p.shape[:-1] + (d,))
    v = np.einsum("...i,...ij->...j", g, frame)
    nn = -minkowski_dot(v, v)
    # Gaussian norm is zero with probability 0; guard anyway.
    if np.any(nn <= 0):
        raise NumericError("degenerate Gaussian draw in tangent sampling")
    v = v / np.sqrt(nn)[..., None]
    return UnitTangent(np.array(p, dtype=float, copy=True), v)


# -- uniform sampling in balls ----------------------------------------------


@dataclass(frozen=True)
class BallSampler:
    """Inverse-CDF radial sampler for the uniform law on a geodesic ball.

    The radial density is proportional to sinh^{d-1}(r) on [0, radius]; the
    CDF is tabulated on a RADIAL_GRID-point grid and inverted with a monotone
    cubic (PCHIP) interpolant, so sampled radii are a deterministic function
    of the uniform draws.
    """

    dim: int
    radius: float
    r_grid: np.ndarray
    cdf_grid: np.ndarray

    @classmethod
    def build(cls, d: int, radius: float, n_grid: int = RADIAL_GRID) -> "BallSampler":
        d = validate_dim(d)
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError("ball radius must be positive and finite")
        r = np.linspace(0.0, radius, n_grid)
        # Cumulative integral of sinh^{d-1} piecewise with 10-node GL: the
        # integrand is entire, so each panel is accurate to machine precision.
        x, w = _gl_nodes(10)
        a, b = r[:-1], r[1:]
        half = (b - a) / 2.0
        nodes = a[:, None] + half[:, None] * (x + 1.0)
        seg = half * (np.sinh(nodes) ** (d - 1) @ w)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cdf = cum / cum[-1]
        cdf[-1] = 1.0
        if np.any(np.diff(cdf) <= 0):
            raise InvariantViolation("radial CDF is not strictly increasing")
        return cls(dim=d, radius=float(radius), r_grid=r, cdf_grid=cdf)

    def _inverse(self) -> PchipInterpolator:
        # Built lazily; PchipInterpolator is not hashable/frozen-friendly.
        inv = getattr(self, "_inv_cache", None)
        if inv is None:
            inv = PchipInterpolator(self.cdf_grid, self.r_grid)
            object.__setattr__(self, "_inv_cache", inv)
        return inv

    def cdf(self, r) -> np.ndarray:
        """CDF evaluated by the same monotone interpolation as sampling."""
        fwd = getattr(self, "_fwd_cache", None)
        if fwd is None:
            fwd = PchipInterpolator(self.r_grid, self.cdf_grid)
            object.__setattr__(self, "_fwd_cache", fwd)
        return np.clip(fwd(r), 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        u = rng.random(size)
        out = self._inverse()(u)
        return np.clip(out, 0.0, self.radius)


@lru_cache(maxsize=64)
def _cached_sampler(d: int, radius: float) -> BallSampler:
    return BallSampler.build(d, radius)


def sample_ball_uniform(
    rng: np.random.Generator,
    center: np.ndarray,
    delta: float,
    size: int | None = None,
) -> np.ndarray:
    """Uniform point(s) in the closed geodesic ball of radius delta at center.

    Draw order is fixed (radii first, then directions) so that sequences are
    reproducible for a given generator state and size.
    """
    center = np.asarray(center, dtype=float)
    d = center.shape[-1] - 1
    sampler = _cached_sampler(validate_dim(d), float(delta))
    radii = sampler.sample(rng, size)
    zdir = sample_tangent_uniform(rng, center, size)
    return geodesic_flow(zdir, radii).base

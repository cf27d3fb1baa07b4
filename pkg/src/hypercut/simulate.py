"""Monte Carlo engines on the genus-2 surface: the geodesic process from
ball-uniform initial data, Brownian motion via its radial part, binned
empirical measures, TV estimators, and the deterministic support bound.

Reproducibility contract
------------------------
Work is split into fixed-size chunks of 2^18 samples.  Chunk `ci` of a run
seeded by `stream` derives `stream.substream(ci)` and draws from three
purpose-separated generators:

    substream(0): radial draws (ball radius, or the Brownian radial SDE),
    substream(1): initial-position draws other than radius,
    substream(2): flow directions.

Each purpose consumes a count determined only by (chunk size, parameters),
never by another purpose's values, so results are bit-identical for a given
(master seed, configuration) regardless of how chunks are scheduled.  Worker
threads (HYPERCUT_WORKERS) only change wall time: chunk outputs are merged
in chunk order, and the merge (integer histogram addition / concatenation)
is exact.

Long flows
----------
Disk coordinates saturate at |z| = 1 and lose all precision beyond distance
~35 from the origin, so flows are advanced in legs of at most LEG_TIME in the
hyperboloid model, re-reducing the running point (and transporting the
velocity isometrically) between legs with the exact linear action of the side
generators.  Points therefore never stray farther than circumradius +
LEG_TIME from the base point of the chart.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import chi2 as _chi2_dist

from .errors import InvariantViolation
from .hypgeom import ball_volume, gamma_d, tangent_frame, validate_dim, _cached_sampler
from .rng import SeededStream
from .surface import (
    FuchsianGroup,
    FundamentalDomain,
    SurfacePoint,
    disk_to_hyperboloid,
    hyperboloid_to_disk,
    injectivity_radius_lower,
    reduce_batch,
)

# Fixed chunk size of the parallel sampling engine (see module docstring).
CHUNK = 1 << 18
# Maximum flow time between reductions; keeps hyperboloid coordinates small.
LEG_TIME = 6.0
# Cap on generator applications per between-leg reduction sweep.
_REDUCE_CAP = 80
# Total-area consistency requirement on the binning partition.
AREA_TOL = 1e-6
# Containment slack for reduced representatives (matches the reducer's
# boundary margin scale).
CONTAIN_TOL = 1e-9
# Default step-size rule for the radial SDE: dt = 1e-3 * max(1, t).
DT_FACTOR = 1e-3


def worker_count() -> int:
    """Worker threads for chunked sampling (HYPERCUT_WORKERS, default 1).
    Affects speed only; results are independent of this value."""
    raw = os.environ.get("HYPERCUT_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- binning partition --------------------------------------------------------


def _gl_piece(n: int):
    x, w = leggauss(n)
    return x, w


def _metric_antiderivative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """F(x, y) with dF/dy = (2 / (1 - x^2 - y^2))^2: closed-form column
    integral of the hyperbolic area density in disk coordinates."""
    w2 = 1.0 - x * x
    w = np.sqrt(w2)
    return 2.0 * y / (w2 * (w2 - y * y)) + 2.0 * np.arctanh(y / w) / (w2 * w)


def _allowed_intervals(x: float, y0: float, y1: float, circles) -> list[tuple[float, float]]:
    """[y0, y1] minus the open y-intervals covered by the given disks at
    abscissa x; the pieces that remain inside the fundamental octagon."""
    intervals = [(y0, y1)]
    for a, b, rho in circles:
        q2 = rho * rho - (x - a) * (x - a)
        if q2 <= 0.0:
            continue
        q = math.sqrt(q2)
        lo, hi = b - q, b + q
        nxt = []
        for s, e in intervals:
            if hi <= s or lo >= e:
                nxt.append((s, e))
                continue
            if lo > s:
                nxt.append((s, lo))
            if hi < e:
                nxt.append((hi, e))
        intervals = nxt
        if not intervals:
            break
    return intervals


def _column_integrand(x: float, y0: float, y1: float, circles) -> float:
    total = 0.0
    for s, e in _allowed_intervals(x, y0, y1, circles):
        total += _metric_antiderivative(x, e) - _metric_antiderivative(x, s)
    return total


def _boundary_cell_area(x0, x1, y0, y1, circles) -> float:
    """Hyperbolic area of cell ∩ octagon for a cell crossed by side circles:
    piecewise Gauss-Legendre in x between structure breakpoints, with a
    square-root substitution at circle x-extremes (where the covered
    y-interval opens/closes non-smoothly)."""
    nodes, weights = _gl_piece(20)
    breaks = {x0, x1}
    extremes = set()
    for a, b, rho in circles:
        for cand in (a - rho, a + rho, a):
            if x0 < cand < x1:
                breaks.add(cand)
                if cand != a:
                    extremes.add(cand)
        # crossings of the circle with the cell's horizontal edges
        for ye in (y0, y1):
            q2 = rho * rho - (ye - b) * (ye - b)
            if q2 > 0.0:
                q = math.sqrt(q2)
                for cand in (a - q, a + q):
                    if x0 < cand < x1:
                        breaks.add(cand)
    pts = sorted(breaks)
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        if hi - lo < 1e-15:
            continue
        lo_t = any(abs(lo - e) < 1e-13 for e in extremes)
        hi_t = any(abs(hi - e) < 1e-13 for e in extremes)
        pieces = [(lo, hi, lo_t, hi_t)] if not (lo_t and hi_t) else [
            (lo, 0.5 * (lo + hi), True, False),
            (0.5 * (lo + hi), hi, False, True),
        ]
        for plo, phi, at_lo, at_hi in pieces:
            length = phi - plo
            if at_lo or at_hi:
                # substitute x = anchor -+ s^2 so the sqrt opening of the
                # covered interval becomes analytic in s
                smax = math.sqrt(length)
                for xi, wi in zip(nodes, weights):
                    s = 0.5 * smax * (xi + 1.0)
                    x = (plo + s * s) if at_lo else (phi - s * s)
                    total += (
                        wi * 0.5 * smax * 2.0 * s * _column_integrand(x, y0, y1, circles)
                    )
            else:
                half = 0.5 * length
                mid = 0.5 * (plo + phi)
                for xi, wi in zip(nodes, weights):
                    total += wi * half * _column_integrand(mid + half * xi, y0, y1, circles)
    return total


@lru_cache(maxsize=8)
def _partition_areas(domain: FundamentalDomain, m: int) -> np.ndarray:
    """Hyperbolic areas of the m x m grid cells clipped to the octagon,
    flattened row-major (iy * m + ix); cached per (domain, m)."""
    L = domain.coordinate_halfwidth()
    edges = np.linspace(-L, L, m + 1)
    circles = [
        (c.real, c.imag, r) for c, r in zip(domain.side_centers, domain.side_radii)
    ]
    ca = np.array([c[0] for c in circles])
    cb = np.array([c[1] for c in circles])
    cr = np.array([c[2] for c in circles])

    x0 = edges[:-1][None, None, :]  # (1, 1, m) broadcast over ix
    x1 = edges[1:][None, None, :]
    y0 = edges[:-1][None, :, None]  # (1, m, 1) broadcast over iy
    y1 = edges[1:][None, :, None]
    a = ca[:, None, None]
    b = cb[:, None, None]
    r = cr[:, None, None]
    dx_min = np.maximum.reduce([x0 - a, a - x1, np.zeros_like(x0 - a)])
    dy_min = np.maximum.reduce([y0 - b, b - y1, np.zeros_like(y0 - b)])
    dx_max = np.maximum(np.abs(x0 - a), np.abs(x1 - a))
    dy_max = np.maximum(np.abs(y0 - b), np.abs(y1 - b))
    d_min = np.hypot(dx_min, dy_min)  # (8, m, m)
    d_max = np.hypot(dx_max, dy_max)
    covered = np.any(d_max <= r, axis=0)       # cell entirely inside a disk
    touched = np.any(d_min < r, axis=0)        # some disk reaches the cell

    areas = np.zeros((m, m))
    interior = ~covered & ~touched
    iy, ix = np.nonzero(interior)
    if len(iy):
        nodes, weights = _gl_piece(12)
        xs0, xs1 = edges[ix], edges[ix + 1]
        half = 0.5 * (xs1 - xs0)
        mid = 0.5 * (xs0 + xs1)
        xn = mid[:, None] + half[:, None] * nodes[None, :]
        ylo = edges[iy][:, None]
        yhi = edges[iy + 1][:, None]
        vals = _metric_antiderivative(xn, yhi) - _metric_antiderivative(xn, ylo)
        areas[iy, ix] = half * (vals @ weights)
    for yy, xx in zip(*np.nonzero(touched & ~covered)):
        areas[yy, xx] = _boundary_cell_area(
            edges[xx], edges[xx + 1], edges[yy], edges[yy + 1], circles
        )
    flat = areas.ravel()
    total = float(math.fsum(flat))
    if abs(total - 4.0 * math.pi) > AREA_TOL:
        raise InvariantViolation(
            f"partition areas sum to {total!r}, expected 4*pi within {AREA_TOL}"
        )
    return flat


def cell_areas(domain: FundamentalDomain, m: int) -> np.ndarray:
    """Hyperbolic area of each of the m^2 grid cells (zero outside the
    octagon); their sum is the surface area 4*pi within 1e-6."""
    if m < 4:
        raise ValueError("resolution must be at least 4")
    return _partition_areas(domain, int(m))


def bin_indices(domain: FundamentalDomain, m: int, z: np.ndarray) -> np.ndarray:
    """Flat half-open-box index (iy * m + ix) of each representative; the
    closing edge of the last row/column is included so the closed octagon
    maps into range."""
    L = domain.coordinate_halfwidth()
    h = 2.0 * L / m
    ix = np.clip(np.floor((z.real + L) / h).astype(np.int64), 0, m - 1)
    iy = np.clip(np.floor((z.imag + L) / h).astype(np.int64), 0, m - 1)
    return iy * m + ix


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Binned sample counts over the grid partition of the octagon."""

    resolution: int
    weights: np.ndarray      # int64, length m^2
    areas: np.ndarray        # float, length m^2
    n_samples: int

    def __post_init__(self):
        if self.weights.shape != (self.resolution**2,) or self.areas.shape != self.weights.shape:
            raise InvariantViolation("weights/areas must be flat m^2 arrays")
        if int(self.weights.sum()) != self.n_samples:
            raise InvariantViolation("weights must sum to the sample count")
        if abs(float(math.fsum(self.areas)) - 4.0 * math.pi) > AREA_TOL:
            raise InvariantViolation("cell areas must sum to the surface area")

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        """Exact additive merge; operands must share the partition."""
        if other.resolution != self.resolution or not np.array_equal(self.areas, other.areas):
            raise InvariantViolation("cannot merge measures over different partitions")
        return EmpiricalMeasure(
            resolution=self.resolution,
            weights=self.weights + other.weights,
            areas=self.areas,
            n_samples=self.n_samples + other.n_samples,
        )


def empirical_measure(domain: FundamentalDomain, samples, m: int) -> EmpiricalMeasure:
    """Deterministically bin reduced representatives.

    A sample outside the closed octagon signals a reduction bug and raises.
    """
    if m < 4:
        raise ValueError("resolution must be at least 4")
    z = _as_disk_array(samples)
    if len(z) == 0:
        raise ValueError("need at least one sample")
    inside = domain.contains(z, tol=CONTAIN_TOL)
    if not np.all(inside):
        k = int(np.flatnonzero(~inside)[0])
        raise InvariantViolation(
            f"sample {k} = {z[k]!r} lies outside the closed fundamental domain"
        )
    areas = cell_areas(domain, m)
    idx = bin_indices(domain, m, z)
    weights = np.bincount(idx, minlength=m * m).astype(np.int64)
    return EmpiricalMeasure(resolution=m, weights=weights, areas=areas, n_samples=len(z))


class TVEstimate(NamedTuple):
    value: float
    n_samples: int
    n_cells: int
    bias_scale: float


def tv_against_uniform(em: EmpiricalMeasure) -> TVEstimate:
    """Total-variation distance of the binned empirical measure from the
    normalized area measure: 1/2 sum |w_i/n - a_i/(4 pi)|.

    This is (a) a lower bound of the true TV at this binning resolution and
    (b) upwardly biased by sampling noise; the expected bias scale for a
    near-uniform sample is sqrt(n_cells / (2 pi n_samples)).
    """
    n = em.n_samples
    pi_cell = em.areas / (4.0 * math.pi)
    diffs = np.abs(em.weights / n - pi_cell)
    value = 0.5 * float(math.fsum(diffs))
    n_cells = int(np.count_nonzero(em.areas > 0))
    bias = math.sqrt(n_cells / (2.0 * math.pi * n))
    if not 0.0 <= value <= 1.0 + 1e-12:
        raise InvariantViolation(f"TV estimate {value} outside [0, 1]")
    return TVEstimate(value=min(value, 1.0), n_samples=n, n_cells=n_cells, bias_scale=bias)


class ChiSquareResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float
    n_categories: int


def chi_square_vs_uniform(em: EmpiricalMeasure, min_expected: float = 10.0) -> ChiSquareResult:
    """Pearson goodness-of-fit of the binned counts against the area law.

    Cells with expected count below `min_expected` are pooled into a single
    category (deterministically, by cell index) so the chi-square reference
    distribution is valid.
    """
    n = em.n_samples
    expected = n * em.areas / (4.0 * math.pi)
    keep = expected >= min_expected
    obs = em.weights[keep].astype(float)
    exp = expected[keep]
    pooled_exp = float(expected[~keep].sum())
    pooled_obs = float(em.weights[~keep].sum())
    if pooled_exp > 0.0:
        obs = np.append(obs, pooled_obs)
        exp = np.append(exp, pooled_exp)
    if len(obs) < 2:
        raise ValueError("too few categories for a goodness-of-fit test")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(obs) - 1
    p = float(_chi2_dist.sf(stat, dof))
    return ChiSquareResult(statistic=stat, dof=dof, p_value=p, n_categories=len(obs))


class SupportBound(NamedTuple):
    shell: float
    ball: float


def tv_lower_bound_support(t: float, delta: float, d: int, V: float) -> SupportBound:
    """Deterministic TV lower bound from the support volume: the time-t law
    lives on a shell of width 2*delta around radius t, whose volume is at
    most (2 Gamma_d / (d-1)) e^{(d-1)t} sinh((d-1) delta), so

        d_TV >= 1 - Vol_supp / V.

    Also returns the simpler form using the full ball of radius t + delta.
    """
    d = validate_dim(d)
    if not (t > 0 and delta > 0 and V > 0):
        raise ValueError("t, delta, V must be positive")
    shell_vol = (2.0 * gamma_d(d) / (d - 1)) * math.exp((d - 1) * t) * math.sinh((d - 1) * delta)
    shell = max(0.0, 1.0 - min(V, shell_vol) / V)
    ball = max(0.0, 1.0 - min(V, float(ball_volume(d, t + delta))) / V)
    return SupportBound(shell=shell, ball=ball)


# -- radial Brownian motion ---------------------------------------------------


def brownian_radii(
    t: float, d: int, dt: float, rng: np.random.Generator, n_paths: int
) -> np.ndarray:
    """Radial part of hyperbolic Brownian motion (generator Delta/2):
    dD = dB + (d-1)/2 coth(D) dt, started at D = 1e-6, reflected at 0.

    Each step splits the dynamics: the drift ODE D' = beta coth(D) is solved
    exactly over the step (cosh D grows by the factor e^{beta h}), then the
    Brownian increment is added and reflected.  The exact drift flow is what
    makes the start well-posed: an explicit-Euler drift step at D ~ 1e-6
    would jump by dt/D ~ 10^3.
    """
    d = validate_dim(d)
    if not t > 0:
        raise ValueError("time must be positive")
    if not 0 < dt <= DT_FACTOR * max(1.0, t):
        raise ValueError(f"dt must lie in (0, {DT_FACTOR * max(1.0, t)}] for t={t}")
    n_steps = max(1, int(math.ceil(t / dt)))
    h = t / n_steps
    beta = 0.5 * (d - 1)
    growth = math.exp(beta * h)
    sqrt_h = math.sqrt(h)
    D = np.full(n_paths, 1e-6)
    for _ in range(n_steps):
        small = D <= 30.0
        Ds = D[small]
        D[small] = np.arccosh(np.cosh(Ds) * growth)
        D[~small] += beta * h
        D = np.abs(D + sqrt_h * rng.standard_normal(n_paths))
    return D


def brownian_radius(t: float, d: int, dt: float, stream: SeededStream) -> float:
    """Single radial draw; see brownian_radii."""
    return float(brownian_radii(t, d, dt, stream.generator(), 1)[0])


# -- flow engine --------------------------------------------------------------


def _as_disk(center) -> complex:
    if isinstance(center, SurfacePoint):
        return complex(center.rep)
    return complex(center)


def _as_disk_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.asarray(samples, dtype=complex).ravel()
    if len(samples) and isinstance(samples[0], SurfacePoint):
        return np.array([s.rep for s in samples], dtype=complex)
    return np.asarray(samples, dtype=complex).ravel()


def mobius_hyperboloid_matrix(a: complex, b: complex) -> np.ndarray:
    """Exact linear action on the hyperboloid of the disk isometry
    z -> (a z + b) / (conj(b) z + conj(a)) with |a|^2 - |b|^2 = 1."""
    a = complex(a)
    b = complex(b)
    ab = a * b
    abc = a * b.conjugate()
    a2pb2 = a * a + b * b
    a2mb2 = a * a - b * b
    return np.array(
        [
            [abs(a) ** 2 + abs(b) ** 2, 2.0 * abc.real, -2.0 * abc.imag],
            [2.0 * ab.real, a2pb2.real, -a2mb2.imag],
            [2.0 * ab.imag, a2pb2.imag, a2mb2.real],
        ]
    )


@lru_cache(maxsize=4)
def _generator_matrices(group: FuchsianGroup) -> np.ndarray:
    """(n_gen, 3, 3) hyperboloid matrices of the side generators."""
    return np.stack(
        [mobius_hyperboloid_matrix(a, b) for a, b in zip(group.gen_a, group.gen_b)]
    )


def _reduce_state(mats: np.ndarray, p: np.ndarray, v: np.ndarray):
    """Greedily apply generators to bring points near the domain, carrying
    the tangent vector through the same isometries.  Used between flow legs;
    the canonical boundary tie rule is applied once at the very end by
    reduce_batch, so this sweep only needs to shrink distances.

    The improvement margin (relative 1e-9 in cosh units) must sit far above
    rounding noise: accepting noise-level "improvements" lets boundary points
    ping-pong between a generator and its inverse, amplifying the noise by
    the matrix norm on every bounce.
    """
    row0 = mats[:, 0, :]  # (g, 3): new cosh(distance to 0) per generator
    for _ in range(_REDUCE_CAP):
        cand = p @ row0.T  # (n, g)
        best = np.argmin(cand, axis=1)
        bp0 = np.take_along_axis(cand, best[:, None], axis=1)[:, 0]
        improve = bp0 < p[:, 0] * (1.0 - 1e-9)
        if not improve.any():
            return p, v
        sel = mats[best[improve]]  # (k, 3, 3)
        p[improve] = np.einsum("kij,kj->ki", sel, p[improve])
        v[improve] = np.einsum("kij,kj->ki", sel, v[improve])
    raise InvariantViolation(
        "between-leg reduction failed to terminate; margin logic is broken"
    )


def _renormalize_state(p: np.ndarray, v: np.ndarray):
    """Project drift off a flowing (point, velocity) pair: rescale p onto the
    hyperboloid, remove the p-component of v, rescale v to unit length."""
    scale = 1.0 / np.sqrt(p[:, 0] ** 2 - p[:, 1] ** 2 - p[:, 2] ** 2)
    p *= scale[:, None]
    dot = -v[:, 0] * p[:, 0] + v[:, 1] * p[:, 1] + v[:, 2] * p[:, 2]
    v += dot[:, None] * p
    vnorm = np.sqrt(-(v[:, 0] ** 2) + v[:, 1] ** 2 + v[:, 2] ** 2)
    v /= vnorm[:, None]
    return p, v


def _flow_reduced(
    group: FuchsianGroup, p: np.ndarray, v: np.ndarray, T: np.ndarray
) -> np.ndarray:
    """Unit-speed geodesic flow of (p, v) for per-sample durations T,
    re-reducing between legs so coordinates stay bounded."""
    mats = _generator_matrices(group)
    t_max = float(np.max(T)) if len(T) else 0.0
    n_legs = max(1, int(math.ceil(t_max / LEG_TIME)))
    h = T / n_legs
    ch = np.cosh(h)[:, None]
    sh = np.sinh(h)[:, None]
    for _ in range(n_legs):
        p, v = ch * p + sh * v, sh * p + ch * v
        p, v = _reduce_state(mats, p, v)
        p, v = _renormalize_state(p, v)
    return p


def _flow_chunk(
    group: FuchsianGroup,
    center: complex,
    delta: float,
    times,
    chunk_stream: SeededStream,
    k: int,
    keep_unreduced: bool = False,
):
    """One chunk of the flow engine: ball-uniform start (delta > 0) or exact
    start (delta = 0), uniform direction, geodesic flow, reduction.

    `times` is a scalar duration or a callable (rng, k) -> per-sample
    durations drawing only from the radial generator.
    """
    rng_radial = chunk_stream.substream(0).generator()
    rng_start = chunk_stream.substream(1).generator()
    rng_dir = chunk_stream.substream(2).generator()

    p_center = disk_to_hyperboloid(center)
    if delta > 0.0:
        radii = _cached_sampler(2, float(delta)).sample(rng_radial, k)
        theta0 = rng_start.uniform(0.0, 2.0 * math.pi, k)
        frame0 = tangent_frame(p_center)
        v0 = (
            np.cos(theta0)[:, None] * frame0[0][None, :]
            + np.sin(theta0)[:, None] * frame0[1][None, :]
        )
        starts = np.cosh(radii)[:, None] * p_center[None, :] + np.sinh(radii)[:, None] * v0
    else:
        starts = np.broadcast_to(p_center, (k, 3)).copy()

    if callable(times):
        T = np.asarray(times(rng_radial, k), dtype=float)
    else:
        T = np.full(k, float(times))
    theta = rng_dir.uniform(0.0, 2.0 * math.pi, k)
    frames = tangent_frame(starts)
    v = np.cos(theta)[:, None] * frames[:, 0, :] + np.sin(theta)[:, None] * frames[:, 1, :]

    if keep_unreduced:
        if float(np.max(T, initial=0.0)) > LEG_TIME:
            raise ValueError("unreduced endpoints are only available for short flows")
        ends = np.cosh(T)[:, None] * starts + np.sinh(T)[:, None] * v
        z_raw = hyperboloid_to_disk(ends)
        reduced, _ = reduce_batch(group, z_raw)
        return reduced, z_raw, starts

    p_end = _flow_reduced(group, starts, v, T)
    reduced, _ = reduce_batch(group, hyperboloid_to_disk(p_end))
    return reduced


def _chunk_sizes(n: int) -> list[int]:
    full, rem = divmod(n, CHUNK)
    return [CHUNK] * full + ([rem] if rem else [])


def _run_chunks(n: int, job: Callable[[int, int], object]) -> list:
    """Run job(chunk_index, chunk_size) over all chunks, returning results in
    chunk order regardless of scheduling."""
    if n <= 0:
        raise ValueError("need a positive sample count")
    sizes = _chunk_sizes(n)
    workers = worker_count()
    if workers <= 1 or len(sizes) <= 1:
        return [job(ci, k) for ci, k in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, ci, k) for ci, k in enumerate(sizes)]
        return [f.result() for f in futures]


def _check_delta(group: FuchsianGroup, center: complex, delta: float) -> None:
    if delta < 0:
        raise ValueError("ball radius must be non-negative")
    if delta == 0:
        return
    bound = injectivity_radius_lower(group, center)
    if delta >= bound:
        raise ValueError(
            f"ball radius {delta} must stay below the injectivity bound {bound:.6f}"
        )


# -- surface processes --------------------------------------------------------


def geodesic_surface_samples(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    center,
    delta: float,
    t: float,
    stream: SeededStream,
    n: int,
    keep_unreduced: bool = False,
):
    """n samples of the time-t geodesic process started uniformly in the
    delta-ball at `center` with uniform directions; returns reduced disk
    representatives (with keep_unreduced, also the unreduced endpoints and
    the lifted hyperboloid starts, for short flows only)."""
    if t < 0:
        raise ValueError("time must be non-negative")
    zc = _as_disk(center)
    _check_delta(group, zc, delta)
    res = _run_chunks(
        n,
        lambda ci, k: _flow_chunk(
            group, zc, delta, t, stream.substream(ci), k, keep_unreduced
        ),
    )
    if keep_unreduced:
        return (
            np.concatenate([r[0] for r in res]),
            np.concatenate([r[1] for r in res]),
            np.concatenate([r[2] for r in res]),
        )
    return np.concatenate(res)


def brownian_surface_samples(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    center,
    t: float,
    stream: SeededStream,
    n: int,
    dt: float | None = None,
):
    """n samples of Brownian motion on the surface at time t, realized by the
    radial coupling: an independent radius from the radial SDE, then the
    geodesic flow from the exact start.  Direction draws are shared with the
    delta = 0 geodesic engine, so conditioning the radius on a fixed value
    reproduces geodesic samples exactly."""
    if not t > 0:
        raise ValueError("time must be positive")
    step = DT_FACTOR * max(1.0, t) if dt is None else dt
    zc = _as_disk(center)
    times = lambda rng, k: brownian_radii(t, 2, step, rng, k)
    return np.concatenate(
        _run_chunks(
            n, lambda ci, k: _flow_chunk(group, zc, 0.0, times, stream.substream(ci), k)
        )
    )


def _uniform_chunk(
    domain: FundamentalDomain, chunk_stream: SeededStream, k: int
) -> np.ndarray:
    """One chunk of rejection sampling from the area measure: proposals
    uniform in the circumscribing hyperbolic ball, accepted inside the
    octagon.  Rounds draw radii and angles in lock-step, so the accepted
    sequence is a deterministic function of the chunk stream."""
    rng_radial = chunk_stream.substream(0).generator()
    rng_angle = chunk_stream.substream(1).generator()
    sampler = _cached_sampler(2, domain.circumradius())
    out = np.empty(k, dtype=complex)
    filled = 0
    while filled < k:
        want = k - filled
        batch = max(64, int(1.6 * want) + 8)
        r = sampler.sample(rng_radial, batch)
        ang = rng_angle.uniform(0.0, 2.0 * math.pi, batch)
        z = np.tanh(0.5 * r) * np.exp(1j * ang)
        z = z[domain.contains(z, tol=0.0)]
        take = min(len(z), want)
        out[filled : filled + take] = z[:take]
        filled += take
    return out


def sample_surface_uniform(domain: FundamentalDomain, stream: SeededStream, n: int):
    """n points distributed by the normalized area measure."""
    return np.concatenate(
        _run_chunks(n, lambda ci, k: _uniform_chunk(domain, stream.substream(ci), k))
    )


def _liouville_chunk(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    t: float,
    chunk_stream: SeededStream,
    k: int,
) -> np.ndarray:
    """Stationary start: area-uniform position, uniform direction, flow t."""
    z0 = _uniform_chunk(domain, chunk_stream, k)
    rng_dir = chunk_stream.substream(2).generator()
    starts = disk_to_hyperboloid(z0)
    theta = rng_dir.uniform(0.0, 2.0 * math.pi, k)
    frames = tangent_frame(starts)
    v = np.cos(theta)[:, None] * frames[:, 0, :] + np.sin(theta)[:, None] * frames[:, 1, :]
    p_end = _flow_reduced(group, starts, v, np.full(k, float(t)))
    reduced, _ = reduce_batch(group, hyperboloid_to_disk(p_end))
    return reduced


def liouville_surface_samples(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    t: float,
    stream: SeededStream,
    n: int,
):
    """n samples of the geodesic flow started from the stationary law:
    area-uniform positions, uniform directions, flowed for time t."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return np.concatenate(
        _run_chunks(
            n, lambda ci, k: _liouville_chunk(group, domain, t, stream.substream(ci), k)
        )
    )


def geodesic_sample(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    x,
    delta: float,
    t: float,
    stream: SeededStream,
) -> SurfacePoint:
    """Single draw of the time-t geodesic process from the delta-ball at x."""
    z = geodesic_surface_samples(group, domain, x, delta, t, stream, 1)
    return SurfacePoint(complex(z[0]))


def brownian_sample(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    x,
    t: float,
    stream: SeededStream,
    dt: float | None = None,
) -> SurfacePoint:
    """Single draw of surface Brownian motion at time t started at x."""
    z = brownian_surface_samples(group, domain, x, t, stream, 1, dt=dt)
    return SurfacePoint(complex(z[0]))


# -- measure-producing runs (chunk-merged, low memory) ------------------------


def _measure_run(domain: FundamentalDomain, m: int, n: int, chunk_samples) -> EmpiricalMeasure:
    areas = cell_areas(domain, m)

    def job(ci: int, k: int):
        z = chunk_samples(ci, k)
        inside = domain.contains(z, tol=CONTAIN_TOL)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise InvariantViolation(
                f"chunk {ci}: sample {bad} = {z[bad]!r} outside the fundamental domain"
            )
        return np.bincount(bin_indices(domain, m, z), minlength=m * m).astype(np.int64)

    counts = _run_chunks(n, job)
    weights = np.zeros(m * m, dtype=np.int64)
    for c in counts:
        weights += c
    return EmpiricalMeasure(resolution=m, weights=weights, areas=areas, n_samples=n)


def geodesic_measure(
    group, domain, center, delta: float, t: float, stream: SeededStream, n: int, m: int
) -> EmpiricalMeasure:
    """Binned law of the time-t geodesic process (chunk-binned, merge-exact)."""
    zc = _as_disk(center)
    _check_delta(group, zc, delta)
    if t < 0:
        raise ValueError("time must be non-negative")
    return _measure_run(
        domain, m, n,
        lambda ci, k: _flow_chunk(group, zc, delta, t, stream.substream(ci), k),
    )


def brownian_measure(
    group, domain, center, t: float, stream: SeededStream, n: int, m: int,
    dt: float | None = None,
) -> EmpiricalMeasure:
    """Binned law of surface Brownian motion at time t."""
    if not t > 0:
        raise ValueError("time must be positive")
    step = DT_FACTOR * max(1.0, t) if dt is None else dt
    zc = _as_disk(center)
    times = lambda rng, k: brownian_radii(t, 2, step, rng, k)
    return _measure_run(
        domain, m, n,
        lambda ci, k: _flow_chunk(group, zc, 0.0, times, stream.substream(ci), k),
    )


def liouville_measure(
    group, domain, t: float, stream: SeededStream, n: int, m: int
) -> EmpiricalMeasure:
    """Binned law of the flow started from the stationary phase-space law."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return _measure_run(
        domain, m, n,
        lambda ci, k: _liouville_chunk(group, domain, t, stream.substream(ci), k),
    )

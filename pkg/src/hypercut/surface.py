"""Compact hyperbolic surfaces as quotients of the Poincare disk.

A surface is described by a finite set of disk isometries (SU(1,1) Mobius
maps) pairing the sides of a Dirichlet polygon centered at 0.  The module
ships the genus-2 surface generated by the eight maps with

    a = 1 + sqrt(2),   b_k = sqrt(2 + 2 sqrt(2)) * exp(i k pi / 4),  k = 0..7,

whose Dirichlet domain is the regular octagon of area 4 pi, and accepts other
side-pairing sets through the same interface (JSON description files).  The
disk model is only used here (dimension 2); all flowing happens in the
hyperboloid model through the charts at the bottom of the module.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, ReductionError
from . import hypgeom

# |a|^2 - |b|^2 = 1 must hold this tightly for any accepted element.
UNIT_TOL = 1e-12
# Greedy reduction moves only when it wins this much hyperbolic distance.
REDUCE_MARGIN = 1e-13
REDUCE_MAX_STEPS = 10 ** 6
# Side-pairing closure and vertex matching tolerance.
PAIRING_TOL = 1e-10


def disk_distance(z, w) -> np.ndarray:
    """Hyperbolic distance in the unit disk, 2 artanh |(z-w)/(1 - conj(z) w)|."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = np.abs(z - w)
    den = np.abs(1.0 - np.conj(z) * w)
    return 2.0 * np.arctanh(num / den)


@dataclass(frozen=True)
class MobiusElement:
    """Disk isometry z -> (a z + b) / (conj(b) z + conj(a)), |a|^2 - |b|^2 = 1."""

    a: complex
    b: complex

    def __post_init__(self):
        unit = abs(self.a) ** 2 - abs(self.b) ** 2
        if abs(unit - 1.0) > max(UNIT_TOL, UNIT_TOL * abs(self.a) ** 2):
            raise InvariantViolation(
                f"matrix is not in SU(1,1): |a|^2 - |b|^2 = {unit!r}"
            )

    def apply(self, z):
        z = np.asarray(z, dtype=complex)
        out = (self.a * z + self.b) / (np.conj(self.b) * z + np.conj(self.a))
        return out if out.ndim else complex(out)

    def compose(self, other: "MobiusElement") -> "MobiusElement":
        """Matrix product: self after other."""
        a = self.a * other.a + self.b * np.conj(other.b)
        b = self.a * other.b + self.b * np.conj(other.a)
        return MobiusElement(complex(a), complex(b))

    def inverse(self) -> "MobiusElement":
        return MobiusElement(complex(np.conj(self.a)), complex(-self.b))

    def trace(self) -> float:
        return 2.0 * self.a.real

    def is_hyperbolic(self) -> bool:
        return abs(self.trace()) > 2.0

    def translation_length(self) -> float:
        t = abs(self.trace()) / 2.0
        if t <= 1.0:
            raise ValueError("translation length is defined for hyperbolic elements")
        return 2.0 * math.acosh(t)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return abs(self.b) <= tol and abs(self.a - 1.0) <= tol or abs(self.a + 1.0) <= tol and abs(self.b) <= tol


def _canonical_key(a: complex, b: complex, decimals: int = 9):
    """Dedup key for group elements; +-M act identically, so fix the sign."""
    vec = (a.real, a.imag, b.real, b.imag)
    for comp in vec:
        if abs(comp) > 1e-9:
            if comp < 0:
                vec = tuple(-c for c in vec)
            break
    return tuple(round(c, decimals) for c in vec)


@dataclass(eq=False)
class FuchsianGroup:
    """Finitely generated discrete group of disk isometries.

    generators must be closed under inversion (each generator's inverse is
    also in the list), which is what the reduction and enumeration routines
    assume.
    """

    generators: tuple[MobiusElement, ...]
    _elements_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.generators = tuple(self.generators)
        if not self.generators:
            raise ValueError("need at least one generator")
        for g in self.generators:
            if not g.is_hyperbolic():
                raise InvariantViolation("all side-pairing generators must be hyperbolic")
            if self.inverse_index(g) is None:
                raise InvariantViolation("generator set is not closed under inversion")
        # Packed coefficient arrays for the vectorized reduction hot path.
        self.gen_a = np.array([g.a for g in self.generators], dtype=complex)
        self.gen_b = np.array([g.b for g in self.generators], dtype=complex)

    def inverse_index(self, g: MobiusElement, tol: float = 1e-9) -> int | None:
        inv = g.inverse()
        for j, h in enumerate(self.generators):
            if abs(h.a - inv.a) <= tol and abs(h.b - inv.b) <= tol:
                return j
            if abs(h.a + inv.a) <= tol and abs(h.b + inv.b) <= tol:
                return j
        return None

    def elements_up_to(self, word_bound: int) -> list[tuple[MobiusElement, int]]:
        """Distinct group elements of word length <= word_bound (with length).

        Breadth-first product enumeration with sign-canonical dedup; the
        identity is included with length 0.
        """
        if not isinstance(word_bound, (int, np.integer)) or word_bound < 0:
            raise ValueError("word_bound must be a non-negative integer")
        word_bound = int(word_bound)
        if word_bound in self._elements_cache:
            return self._elements_cache[word_bound]
        ident = MobiusElement(1.0 + 0.0j, 0.0j)
        seen = {_canonical_key(ident.a, ident.b): 0}
        out = [(ident, 0)]
        frontier = [ident]
        for level in range(1, word_bound + 1):
            nxt = []
            for el in frontier:
                for g in self.generators:
                    cand = g.compose(el)
                    key = _canonical_key(cand.a, cand.b)
                    if key not in seen:
                        seen[key] = level
                        out.append((cand, level))
                        nxt.append(cand)
            frontier = nxt
        self._elements_cache[word_bound] = out
        return out

    def element_arrays(self, word_bound: int):
        """(a, b, word_length) arrays for the enumerated elements."""
        els = self.elements_up_to(word_bound)
        a = np.array([e.a for e, _ in els], dtype=complex)
        b = np.array([e.b for e, _ in els], dtype=complex)
        ln = np.array([l for _, l in els], dtype=np.int64)
        return a, b, ln


@dataclass(frozen=True, eq=False)
class FundamentalDomain:
    """Dirichlet polygon about 0: the set outside every side circle.

    Side k lies on the circle |z - center_k| = radius_k (the hyperbolic
    bisector between 0 and g_k(0)); vertices[k] joins side k and side k+1.
    area is the hyperbolic area from the angle defect.
    """

    vertices: np.ndarray
    side_centers: np.ndarray
    side_radii: np.ndarray
    side_gen_index: np.ndarray
    area: float
    genus: int

    @property
    def n_sides(self) -> int:
        return len(self.side_centers)

    def contains(self, z, tol: float = 1e-9) -> np.ndarray:
        """True where z is in the closed polygon (within tol of it)."""
        z = np.asarray(z, dtype=complex)
        ok = np.ones(z.shape, dtype=bool)
        for c, r in zip(self.side_centers, self.side_radii):
            ok &= np.abs(z - c) >= r - tol
        return ok

    def circumradius(self) -> float:
        """Hyperbolic distance from 0 to the farthest vertex."""
        return float(np.max(2.0 * np.arctanh(np.abs(self.vertices))))

    def coordinate_halfwidth(self) -> float:
        """Euclidean half-width of the tight axis-aligned bounding square."""
        return float(
            max(np.max(np.abs(self.vertices.real)), np.max(np.abs(self.vertices.imag)))
        )


def _interior_angle(v: complex, cw: tuple[complex, float, complex], ccw: tuple[complex, float, complex]) -> float:
    """Angle at vertex v between two circular sides.

    Each side is (center, radius, other_endpoint).  The disk model is
    conformal, so the Euclidean angle between tangent directions is the
    hyperbolic interior angle.
    """
    dirs = []
    for c, r, w in (cw, ccw):
        tang = 1j * (v - c)
        tang /= abs(tang)
        if (tang.conjugate() * (w - v)).real < 0:
            tang = -tang
        dirs.append(tang)
    cosang = (dirs[0].conjugate() * dirs[1]).real
    return math.acos(min(1.0, max(-1.0, cosang)))


def _circle_pair_vertex(c1: complex, r1: float, c2: complex, r2: float) -> complex:
    """In-disk intersection of two circles orthogonal to the unit circle.

    Orthogonality gives |c|^2 - r^2 = 1 for both, so the radical line passes
    through 0 perpendicular to c2 - c1; the two intersection points are
    inverse to each other in the unit circle and the in-disk one is returned.
    """
    e = 1j * (c2 - c1)
    e /= abs(e)
    m = (e.conjugate() * c1).real
    disc = m * m - 1.0
    if disc <= 0:
        raise InvariantViolation("adjacent side circles do not intersect")
    s = m - math.copysign(math.sqrt(disc), m)
    return s * e


def domain_from_generators(
    generators: tuple[MobiusElement, ...],
    genus: int,
    area_tol: float = 1e-6,
) -> FundamentalDomain:
    """Dirichlet polygon of the group at 0, validated against Gauss-Bonnet.

    Requires that the bisectors of the generators alone cut out a closed
    polygon whose consecutive (by angle) sides meet; this covers the shipped
    octagon and octagon-like user input, and anything else is rejected rather
    than silently mis-measured.
    """
    if genus < 2:
        raise ValueError("genus must be >= 2 for a compact hyperbolic surface")
    ws = np.array([g.apply(0.0) for g in generators], dtype=complex)
    if np.any(np.abs(ws) < 1e-9):
        raise InvariantViolation("a generator fixes 0; no Dirichlet side exists")
    centers = ws / np.abs(ws) ** 2
    radii = np.sqrt(1.0 / np.abs(ws) ** 2 - 1.0)
    order = np.argsort(np.mod(np.angle(centers), 2.0 * math.pi))
    centers = centers[order]
    radii = radii[order]
    n = len(centers)
    vertices = np.array(
        [
            _circle_pair_vertex(centers[k], radii[k], centers[(k + 1) % n], radii[(k + 1) % n])
            for k in range(n)
        ],
        dtype=complex,
    )
    # Polygon must be simple: every vertex on/outside all non-incident circles.
    for k, v in enumerate(vertices):
        for j in range(n):
            if j in (k, (k + 1) % n):
                continue
            if abs(v - centers[j]) < radii[j] - 1e-9:
                raise InvariantViolation("side circles do not bound a simple polygon")
    angles = []
    for k in range(n):
        v = vertices[k]
        side_a = (centers[k], radii[k], vertices[k - 1])          # side k: v_{k-1} -> v_k
        side_b = (centers[(k + 1) % n], radii[(k + 1) % n], vertices[(k + 1) % n])
        angles.append(_interior_angle(v, side_a, side_b))
    area = (n - 2) * math.pi - math.fsum(angles)
    target = 4.0 * math.pi * (genus - 1)
    if abs(area - target) > area_tol:
        raise InvariantViolation(
            f"angle-defect area {area!r} does not match Gauss-Bonnet target {target!r}"
        )
    return FundamentalDomain(
        vertices=vertices,
        side_centers=centers,
        side_radii=radii,
        side_gen_index=order,
        area=area,
        genus=genus,
    )


def _check_side_pairing(group: FuchsianGroup, domain: FundamentalDomain, tol: float = PAIRING_TOL):
    """Each generator must carry the side of its inverse onto its own side,
    vertex to vertex."""
    n = domain.n_sides
    side_of_gen = {int(domain.side_gen_index[s]): s for s in range(n)}
    for gi, g in enumerate(group.generators):
        hi = group.inverse_index(g)
        s_g = side_of_gen[gi]
        s_h = side_of_gen[hi]
        src = {domain.vertices[s_h - 1], domain.vertices[s_h]}
        dst = (domain.vertices[s_g - 1], domain.vertices[s_g])
        img = [g.apply(v) for v in src]
        ok = (
            min(abs(img[0] - dst[0]), abs(img[0] - dst[1])) <= tol
            and min(abs(img[1] - dst[0]), abs(img[1] - dst[1])) <= tol
            and abs(img[0] - img[1]) > tol
        )
        if not ok:
            raise InvariantViolation("side pairing does not map sides vertex-to-vertex")


def bolza_group() -> tuple[FuchsianGroup, FundamentalDomain]:
    """The genus-2 octagon surface group and its Dirichlet octagon.

    Generators g_k, k = 0..7, with a = 1 + sqrt(2) and
    b = sqrt(2 + 2 sqrt(2)) e^{i k pi / 4}; g_{k+4} = g_k^{-1} holds exactly,
    and the domain is the regular octagon with area 4 pi (genus 2).
    """
    a = 1.0 + math.sqrt(2.0)
    bmod = math.sqrt(2.0 + 2.0 * math.sqrt(2.0))
    gens = tuple(
        MobiusElement(complex(a), bmod * cmath.exp(1j * k * math.pi / 4.0))
        for k in range(8)
    )
    group = FuchsianGroup(gens)
    domain = domain_from_generators(gens, genus=2, area_tol=1e-8)
    _check_side_pairing(group, domain)
    return group, domain


@dataclass(frozen=True)
class SurfacePoint:
    """Point of the quotient surface, stored as its fundamental-domain
    representative."""

    rep: complex


# -- reduction to the fundamental domain ------------------------------------


def reduce_batch(
    group: FuchsianGroup,
    z,
    margin: float = REDUCE_MARGIN,
    max_steps: int = REDUCE_MAX_STEPS,
):
    """Greedy Dirichlet reduction of disk points into the fundamental domain.

    Repeatedly applies whichever generator strictly decreases hyperbolic
    distance to 0 by more than `margin`; on ties at the boundary the
    representative with lexicographically smallest (Re, Im) among the point
    and its one-step images is chosen, making reduction deterministic.

    Returns (reduced points, generator application counts) as arrays.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).copy()
    if np.any(np.abs(z) >= 1.0):
        raise ValueError("points must lie strictly inside the unit disk")
    a = group.gen_a[:, None]
    b = group.gen_b[:, None]
    ac = np.conj(a)
    bc = np.conj(b)
    n = z.size
    out = np.empty(n, dtype=complex)
    steps = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    cur = z
    d_cur = 2.0 * np.arctanh(np.abs(cur))
    iteration = 0
    while active.size:
        iteration += 1
        if iteration > max_steps:
            raise ReductionError(f"reduction exceeded {max_steps} steps")
        w = (a * cur + b) / (bc * cur + ac)
        r2 = w.real ** 2 + w.imag ** 2
        j = np.argmin(r2, axis=0)
        cols = np.arange(cur.size)
        d_best = 2.0 * np.arctanh(np.sqrt(r2[j, cols]))
        improve = d_best < d_cur - margin
        if not np.all(improve):
            sel = ~improve
            zf = cur[sel]
            cand = np.concatenate([zf[None, :], w[:, sel]], axis=0)
            cd = np.concatenate(
                [d_cur[sel][None, :], 2.0 * np.arctanh(np.sqrt(r2[:, sel]))], axis=0
            )
            dmin = cd.min(axis=0)
            tie = cd <= dmin + margin
            re = np.where(tie, cand.real, np.inf)
            re_min = re.min(axis=0)
            tie_re = tie & (cand.real == re_min)
            im = np.where(tie_re, cand.imag, np.inf)
            im_min = im.min(axis=0)
            pick = np.argmax(tie_re & (cand.imag == im_min), axis=0)
            out[active[sel]] = cand[pick, np.arange(zf.size)]
        if np.any(improve):
            wbest = w[j, cols]
            cur = wbest[improve]
            d_cur = d_best[improve]
            steps[active[improve]] += 1
            active = active[improve]
        else:
            break
    return out, steps


def reduce(
    group: FuchsianGroup,
    domain: FundamentalDomain,
    z: complex | SurfacePoint,
    margin: float = REDUCE_MARGIN,
    max_steps: int = REDUCE_MAX_STEPS,
) -> tuple[SurfacePoint, int]:
    """Reduce one disk point; returns (surface point, word length used)."""
    if isinstance(z, SurfacePoint):
        z = z.rep
    red, steps = reduce_batch(group, [z], margin=margin, max_steps=max_steps)
    if not bool(domain.contains(red[0], tol=1e-9)):
        raise InvariantViolation("reduced point escaped the fundamental domain")
    return SurfacePoint(complex(red[0])), int(steps[0])


# -- quotient metric helpers -------------------------------------------------


def _as_complex(p) -> complex:
    return p.rep if isinstance(p, SurfacePoint) else complex(p)


def surface_distance_upper(group: FuchsianGroup, p, q, word_bound: int = 3) -> float:
    """Upper bound on the quotient distance: min over enumerated gamma of
    d(p, gamma q).  Exact whenever the true minimizer has word length within
    word_bound."""
    zp = _as_complex(p)
    zq = _as_complex(q)
    ga, gb, _ = group.element_arrays(word_bound)
    imgs = (ga * zq + gb) / (np.conj(gb) * zq + np.conj(ga))
    return float(np.min(disk_distance(zp, imgs)))


def surface_distance_upper_batch(
    group: FuchsianGroup,
    p,
    q,
    word_bound: int = 3,
    cutoff: float | None = None,
) -> np.ndarray:
    """Vectorized surface_distance_upper for many q against one p.

    cutoff (optional) prunes enumerated elements that provably cannot beat
    it, which keeps the scan cheap for bulk containment checks; the returned
    minimum is still exact below the cutoff.
    """
    zp = _as_complex(p)
    q = np.asarray(q, dtype=complex)
    ga, gb, _ = group.element_arrays(word_bound)
    if cutoff is not None:
        d0 = 2.0 * np.arctanh(np.abs(gb / np.conj(ga)))  # d(0, gamma 0)
        dp = 2.0 * math.atanh(abs(zp))
        dq = float(np.max(2.0 * np.arctanh(np.abs(q))))
        keep = d0 <= cutoff + dp + dq + 1e-9
        ga, gb = ga[keep], gb[keep]
    best = np.full(q.shape, np.inf)
    for a_k, b_k in zip(ga, gb):
        img = (a_k * q + b_k) / (np.conj(b_k) * q + np.conj(a_k))
        np.minimum(best, disk_distance(zp, img), out=best)
    return best


def injectivity_radius_lower(group: FuchsianGroup, p, word_bound: int = 2) -> float:
    """Lower bound on the injectivity radius at p: half the shortest
    displacement of p by a non-identity enumerated element.

    Monotone non-increasing in word_bound; exact once word_bound covers the
    true minimizer.
    """
    zp = _as_complex(p)
    ga, gb, ln = group.element_arrays(word_bound)
    mask = ln > 0
    if not np.any(mask):
        raise ValueError("word_bound must be >= 1")
    ga, gb = ga[mask], gb[mask]
    imgs = (ga * zp + gb) / (np.conj(gb) * zp + np.conj(ga))
    return float(0.5 * np.min(disk_distance(zp, imgs)))


# -- disk <-> hyperboloid charts (d = 2) -------------------------------------


def disk_to_hyperboloid(z) -> np.ndarray:
    """Isometric chart z -> ((1+|z|^2), 2 Re z, 2 Im z) / (1 - |z|^2)."""
    z = np.asarray(z, dtype=complex)
    s = z.real ** 2 + z.imag ** 2
    if np.any(s >= 1.0):
        raise ValueError("points must lie strictly inside the unit disk")
    denom = 1.0 - s
    out = np.empty(z.shape + (3,))
    out[..., 0] = (1.0 + s) / denom
    out[..., 1] = 2.0 * z.real / denom
    out[..., 2] = 2.0 * z.imag / denom
    return out


def hyperboloid_to_disk(p) -> np.ndarray:
    """Inverse chart (x0, x1, x2) -> (x1 + i x2) / (1 + x0)."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError("chart is specific to dimension 2 (3 ambient coordinates)")
    z = (p[..., 1] + 1j * p[..., 2]) / (1.0 + p[..., 0])
    return z


# -- JSON surface descriptions -----------------------------------------------


def save_surface_json(path, group: FuchsianGroup, genus: int) -> None:
    """Write a side-pairing description: genus plus row-major 2x2 matrices
    with [re, im] entry pairs."""
    mats = []
    for g in group.generators:
        a, b = g.a, g.b
        mats.append(
            [
                [a.real, a.imag],
                [b.real, b.imag],
                [b.real, -b.imag],
                [a.real, -a.imag],
            ]
        )
    payload = {"genus": int(genus), "generators": mats}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_surface_json(path) -> tuple[FuchsianGroup, FundamentalDomain]:
    """Load and validate a side-pairing description file.

    Checks: SU(1,1) matrix shape (second row the conjugate-swap of the
    first), unit pseudo-determinant, hyperbolicity, closure under inversion,
    and the Gauss-Bonnet area of the resulting Dirichlet polygon against the
    declared genus.
    """
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        genus = int(payload["genus"])
        raw = payload["generators"]
    except (KeyError, TypeError) as exc:
        raise ValueError("surface file must carry 'genus' and 'generators'") from exc
    gens = []
    for m in raw:
        if len(m) != 4 or any(len(e) != 2 for e in m):
            raise ValueError("each generator must be 4 row-major [re, im] entries")
        a = complex(m[0][0], m[0][1])
        b = complex(m[1][0], m[1][1])
        c = complex(m[2][0], m[2][1])
        d = complex(m[3][0], m[3][1])
        if abs(c - b.conjugate()) > 1e-9 or abs(d - a.conjugate()) > 1e-9:
            raise ValueError("generator matrix is not of SU(1,1) form [[a,b],[conj b, conj a]]")
        gens.append(MobiusElement(a, b))
    group = FuchsianGroup(tuple(gens))
    domain = domain_from_generators(group.generators, genus=genus, area_tol=1e-6)
    _check_side_pairing(group, domain)
    return group, domain

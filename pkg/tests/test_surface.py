"""Tests for the compact-surface layer: octagon group, Dirichlet domain,
reduction, quotient-distance bounds, charts, and the surface file format.

Geometric constants (vertex radius, circumradius, systole) are frozen from
closed forms evaluated separately at 30 digits:
    vertex |v| = 2^{-1/4}                    = 0.84089641525371454
    circumradius = 2 artanh(2^{-1/4})        = 2.4484524476780758
    halfwidth = 2^{-1/4} cos(pi/8)           = 0.77688698701501865
    translation length = 2 arccosh(1+sqrt 2) = 3.0571418389619963
"""

import json
import math

import numpy as np
import pytest

from hypercut.errors import InvariantViolation
from hypercut.rng import SeededStream
from hypercut.surface import (
    FuchsianGroup,
    MobiusElement,
    SurfacePoint,
    bolza_group,
    disk_distance,
    disk_to_hyperboloid,
    domain_from_generators,
    hyperboloid_to_disk,
    injectivity_radius_lower,
    load_surface_json,
    reduce,
    reduce_batch,
    save_surface_json,
    surface_distance_upper,
    surface_distance_upper_batch,
)

GROUP, DOMAIN = bolza_group()


def random_disk_points(tag: int, n: int, rmax: float = 0.97) -> np.ndarray:
    rng = SeededStream(24680, tag).generator()
    r = np.sqrt(rng.random(n)) * rmax
    th = rng.random(n) * 2 * math.pi
    return r * np.exp(1j * th)


# -- Mobius elements ----------------------------------------------------------


def test_mobius_element_unit_condition_enforced():
    with pytest.raises(InvariantViolation):
        MobiusElement(1.5 + 0j, 0.2 + 0j)


def test_mobius_inverse_and_compose():
    g = GROUP.generators[0]
    h = GROUP.generators[3]
    gi = g.inverse()
    ident = g.compose(gi)
    assert ident.is_identity(tol=1e-12)
    z = 0.3 + 0.1j
    assert g.apply(h.apply(z)) == pytest.approx(g.compose(h).apply(z), abs=1e-14)


def test_mobius_preserves_hyperbolic_distance():
    z = random_disk_points(1, 50, rmax=0.9)
    w = random_disk_points(2, 50, rmax=0.9)
    g = GROUP.generators[2]
    before = disk_distance(z, w)
    after = disk_distance(g.apply(z), g.apply(w))
    assert np.max(np.abs(before - after)) < 1e-11


def test_translation_length_frozen_value():
    for g in GROUP.generators:
        assert g.translation_length() == pytest.approx(3.0571418389619963, rel=1e-14)


def test_translation_length_rejects_rotation():
    rot = MobiusElement(complex(math.cos(0.3), math.sin(0.3)), 0j)
    assert not rot.is_hyperbolic()
    with pytest.raises(ValueError):
        rot.translation_length()


# -- the octagon group and domain ----------------------------------------------


def test_group_closed_under_inversion():
    for g in GROUP.generators:
        assert GROUP.inverse_index(g) is not None


def test_domain_area_is_gauss_bonnet():
    assert DOMAIN.genus == 2
    assert DOMAIN.area == pytest.approx(4 * math.pi, abs=1e-9)


def test_domain_octagon_geometry_frozen_values():
    assert DOMAIN.n_sides == 8
    assert np.max(np.abs(np.abs(DOMAIN.vertices) - 0.84089641525371454)) < 1e-12
    assert DOMAIN.circumradius() == pytest.approx(2.4484524476780758, rel=1e-12)
    assert DOMAIN.coordinate_halfwidth() == pytest.approx(0.77688698701501865, rel=1e-12)


def test_domain_contains_center_and_excludes_far_points():
    assert bool(DOMAIN.contains(0j))
    assert bool(DOMAIN.contains(0.1 + 0.05j))
    # g(0) is deep inside a neighboring copy.
    g0 = GROUP.generators[0].apply(0.0)
    assert not bool(DOMAIN.contains(g0))


def test_element_enumeration_counts_and_lengths():
    els = GROUP.elements_up_to(2)
    lens = [l for _, l in els]
    assert lens.count(0) == 1
    assert lens.count(1) == 8
    # Distinct length-2 words exist and none collapses to length <= 1.
    assert lens.count(2) > 0
    a, b, ln = GROUP.element_arrays(2)
    assert len(a) == len(els)
    assert np.all(np.abs(np.abs(a) ** 2 - np.abs(b) ** 2 - 1.0) < 1e-9)


def test_domain_from_generators_rejects_wrong_genus():
    with pytest.raises(InvariantViolation):
        domain_from_generators(GROUP.generators, genus=3)


# -- reduction -------------------------------------------------------------------


def test_reduce_lands_in_domain():
    z = random_disk_points(3, 2000)
    red, steps = reduce_batch(GROUP, z)
    assert np.all(DOMAIN.contains(red, tol=1e-9))
    assert np.all(steps >= 0)


def test_reduce_is_orbit_invariant():
    z = random_disk_points(4, 300, rmax=0.8)
    red0, _ = reduce_batch(GROUP, z)
    g = GROUP.generators[1].compose(GROUP.generators[6])
    red1, _ = reduce_batch(GROUP, g.apply(z))
    assert np.max(np.abs(red0 - red1)) < 1e-9


def test_reduce_fixes_interior_points():
    z = np.array([0j, 0.2 + 0.1j, -0.3 - 0.25j])
    red, steps = reduce_batch(GROUP, z)
    assert np.array_equal(red, z)
    assert np.array_equal(steps, np.zeros(3, dtype=steps.dtype))


def test_reduce_tie_rule_is_deterministic_on_boundary():
    # A point on a side circle has an equidistant image; both must map to the
    # same canonical representative.
    c = DOMAIN.side_centers[0]
    r = DOMAIN.side_radii[0]
    bp = c - r * c / abs(c)  # the side's closest-to-0 point, on the circle
    gi = DOMAIN.side_gen_index[0]
    mate = GROUP.generators[int(GROUP.inverse_index(GROUP.generators[gi]))].apply(bp)
    ra, _ = reduce_batch(GROUP, np.array([bp]))
    rb, _ = reduce_batch(GROUP, np.array([mate]))
    assert abs(complex(ra[0]) - complex(rb[0])) < 1e-9


def test_reduce_scalar_wrapper_returns_surface_point():
    sp, steps = reduce(GROUP, DOMAIN, 0.95 + 0j)
    assert isinstance(sp, SurfacePoint)
    assert bool(DOMAIN.contains(sp.rep))
    assert steps >= 1


def test_reduce_rejects_points_on_or_outside_circle():
    with pytest.raises(ValueError):
        reduce_batch(GROUP, np.array([1.0 + 0j]))


# -- quotient distances -----------------------------------------------------------


def test_surface_distance_agrees_with_disk_distance_nearby():
    z = 0.1 + 0.05j
    w = 0.12 - 0.02j
    assert surface_distance_upper(GROUP, z, w) == pytest.approx(
        float(disk_distance(z, w)), rel=1e-12
    )


def test_surface_distance_sees_the_short_way_around():
    # 0 and g(0) project to the same surface point.
    g0 = GROUP.generators[0].apply(0.0)
    assert surface_distance_upper(GROUP, 0j, g0) < 1e-9
    # Disk distance is the full translation length instead.
    assert float(disk_distance(0j, g0)) == pytest.approx(3.0571418389619963, rel=1e-12)


def test_surface_distance_batch_matches_scalar():
    q = random_disk_points(5, 40, rmax=0.7)
    batch = surface_distance_upper_batch(GROUP, 0.2 + 0.1j, q)
    for k in range(0, 40, 7):
        assert batch[k] == pytest.approx(
            surface_distance_upper(GROUP, 0.2 + 0.1j, complex(q[k])), rel=1e-12
        )


def test_surface_distance_batch_cutoff_is_exact_below_cutoff():
    q = random_disk_points(6, 200, rmax=0.6)
    full = surface_distance_upper_batch(GROUP, 0j, q)
    pruned = surface_distance_upper_batch(GROUP, 0j, q, cutoff=1.0)
    mask = full <= 1.0
    assert np.array_equal(full[mask], pruned[mask])


def test_injectivity_radius_at_center_is_half_systole():
    assert injectivity_radius_lower(GROUP, 0j) == pytest.approx(
        1.5285709194809982, rel=1e-12
    )
    # Stable under a deeper enumeration (the minimizer is a generator).
    assert injectivity_radius_lower(GROUP, 0j, word_bound=3) == pytest.approx(
        1.5285709194809982, rel=1e-12
    )


# -- charts -----------------------------------------------------------------------


def test_chart_round_trip_and_isometry():
    z = random_disk_points(7, 500)
    p = disk_to_hyperboloid(z)
    assert np.max(np.abs(p[:, 0] ** 2 - p[:, 1] ** 2 - p[:, 2] ** 2 - 1.0) / p[:, 0] ** 2) < 1e-14
    back = hyperboloid_to_disk(p)
    assert np.max(np.abs(back - z)) < 1e-14
    w = random_disk_points(8, 500)
    q = disk_to_hyperboloid(w)
    pair = p[:, 0] * q[:, 0] - p[:, 1] * q[:, 1] - p[:, 2] * q[:, 2]
    assert np.max(np.abs(np.arccosh(np.maximum(pair, 1.0)) - disk_distance(z, w))) < 1e-9


def test_chart_rejects_bad_input():
    with pytest.raises(ValueError):
        disk_to_hyperboloid(np.array([1.0 + 0j]))
    with pytest.raises(ValueError):
        hyperboloid_to_disk(np.zeros(4))


# -- surface files -----------------------------------------------------------------


def test_surface_json_round_trip(tmp_path):
    path = tmp_path / "octagon.json"
    save_surface_json(path, GROUP, genus=2)
    group2, domain2 = load_surface_json(path)
    assert len(group2.generators) == len(GROUP.generators)
    for g, h in zip(GROUP.generators, group2.generators):
        assert g.a == h.a and g.b == h.b
    assert domain2.area == pytest.approx(DOMAIN.area, abs=1e-12)


def test_surface_json_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"generators": []}))
    with pytest.raises(ValueError):
        load_surface_json(path)

    payload = {"genus": 2, "generators": [[[1.5, 0], [0.2, 0], [0.2, 0], [1.5, 0]]]}
    path.write_text(json.dumps(payload))
    with pytest.raises((ValueError, InvariantViolation)):
        load_surface_json(path)

    # Second row not the conjugate-swap of the first.
    a = 1.0 + math.sqrt(2.0)
    b = math.sqrt(2.0 + 2.0 * math.sqrt(2.0))
    payload = {"genus": 2, "generators": [[[a, 0], [b, 0], [b, 0.5], [a, 0]]]}
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError):
        load_surface_json(path)


def test_group_requires_inverse_closure():
    g = GROUP.generators[0]
    with pytest.raises(InvariantViolation):
        FuchsianGroup((g,))

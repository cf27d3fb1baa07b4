"""Unit tests for the spherical-mean eigenvalue multiplier."""

import math

import numpy as np
import pytest

from hypercut.errors import AccuracyError
from hypercut.multiplier import (
    FROZEN_ENVELOPE_C,
    NuResult,
    Series,
    decay_bound,
    decay_class,
    fit_envelope_constant,
    multiplier_closed_d3,
    multiplier_grid,
    multiplier_quadrature,
    multiplier_quadrature_batch,
    sigma_d,
    spectral_point,
)

# Reference values computed once with a 40-digit arbitrary-precision
# evaluation of the defining integral (d=2 additionally cross-checked against
# the conical Legendre function P_{-1/2+iu}(cosh t), to which the d=2
# multiplier is classically equal) and frozen here as literals.
ORACLE = [
    # (d, eigenvalue, t, value)
    (2, 0.5, 1.0, 0.88353789884822377),
    (2, 4.25, 3.0, 0.075714214738357959),
    (2, 25.25, 10.0, 0.0016147988402974283),
    (2, 1.25, 20.0, 4.9937035433521707e-5),
    (2, 0.1, 2.0, 0.91528334216658975),
    (2, 0.21, 8.0, 0.17695665055349081),
    (4, 5.0, 2.0, 0.039345691324350411),
    (4, 0.5, 6.0, 0.40794827976437616),
    (5, 10.0, 3.0, -0.00053505733085876466),
    (5, 2.0, 12.0, 0.0015560185064347209),
]


class TestSpectralPoint:
    def test_principal(self):
        sp = spectral_point(3, 5.0)
        assert sp.series is Series.PRINCIPAL
        assert sp.u == pytest.approx(2.0)
        assert sp.u.imag == 0.0

    def test_bottom_of_principal(self):
        sp = spectral_point(2, 0.25)
        assert sp.series is Series.PRINCIPAL
        assert sp.u == 0.0

    def test_complementary(self):
        sp = spectral_point(3, 0.75)
        assert sp.series is Series.COMPLEMENTARY
        assert sp.u == pytest.approx(0.5j)

    def test_trivial(self):
        sp = spectral_point(4, 0.0)
        assert sp.series is Series.TRIVIAL
        assert sp.u == pytest.approx(1.5j)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            spectral_point(2, -0.1)

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError):
            spectral_point(1, 1.0)

    def test_sigma(self):
        assert sigma_d(2) == 0.25
        assert sigma_d(3) == 1.0
        assert sigma_d(5) == 4.0


class TestClosedFormD3:
    def test_matches_sine_formula(self):
        u, t = 2.0, 3.0
        assert multiplier_closed_d3(u, t) == pytest.approx(
            math.sin(u * t) / (u * math.sinh(t)), abs=1e-15
        )

    def test_zero_limit(self):
        t = 2.0
        assert multiplier_closed_d3(0.0, t) == pytest.approx(t / math.sinh(t), rel=1e-14)

    def test_limit_continuous(self):
        t = 2.0
        assert multiplier_closed_d3(1e-9, t) == pytest.approx(
            multiplier_closed_d3(0.0, t), rel=1e-12
        )

    def test_imaginary_parameter(self):
        v, t = 0.7, 4.0
        assert multiplier_closed_d3(0.7j, t) == pytest.approx(
            math.sinh(v * t) / (v * math.sinh(t)), rel=1e-14
        )

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            multiplier_closed_d3(1.0, 0.0)


class TestQuadrature:
    @pytest.mark.parametrize("d,lam,t,expected", ORACLE)
    def test_frozen_oracle(self, d, lam, t, expected):
        res = multiplier_quadrature(spectral_point(d, lam), t)
        assert res.value == pytest.approx(expected, abs=2e-13)

    def test_matches_d3_closed_form(self):
        for u in (0.0, 0.5, 3.0, 12.0):
            for t in (0.2, 1.0, 7.0, 18.0):
                sp = spectral_point(3, sigma_d(3) + u * u)
                got = multiplier_quadrature(sp, t).value
                assert got == pytest.approx(multiplier_closed_d3(u, t), abs=1e-12)

    def test_normalization_all_dims(self):
        for d in (2, 3, 4, 5, 7):
            for t in (0.1, 1.0, 10.0, 20.0):
                res = multiplier_quadrature(spectral_point(d, 0.0), t)
                assert abs(res.value - 1.0) < 1e-12
                assert res.imag_residual == 0.0

    def test_imag_residual_small_on_principal(self):
        res = multiplier_quadrature(spectral_point(2, 10.0), 5.0)
        assert res.imag_residual < 1e-14

    def test_error_estimate_covers_true_error(self):
        sp = spectral_point(3, sigma_d(3) + 25.0)
        res = multiplier_quadrature(sp, 5.0)
        true_err = abs(res.value - multiplier_closed_d3(5.0, 5.0))
        assert true_err <= max(res.error_estimate, 1e-14)

    def test_even_in_spectral_parameter(self):
        # lambda determines |u|; the value must not depend on any sign choice,
        # which the batch evaluator realizes by construction. Check agreement
        # between scalar calls and a mixed batch.
        pts = [spectral_point(2, lam) for lam in (0.0, 0.1, 0.25, 2.0, 50.0)]
        batch = multiplier_quadrature_batch(2, pts, 3.0)
        for sp, res in zip(pts, batch):
            solo = multiplier_quadrature(sp, 3.0)
            assert res.value == pytest.approx(solo.value, abs=1e-13)

    def test_contraction_property(self):
        # |nu_t| <= 1 with equality only at lambda = 0: averaging contracts.
        for d in (2, 4):
            for lam in (0.3, 1.0, 17.0):
                for t in (0.5, 2.0, 9.0):
                    assert abs(multiplier_quadrature(spectral_point(d, lam), t).value) < 1.0

    def test_rejects_bad_inputs(self):
        sp = spectral_point(2, 1.0)
        with pytest.raises(ValueError):
            multiplier_quadrature(sp, -1.0)
        with pytest.raises(ValueError):
            multiplier_quadrature(sp, 1.0, tol=1e-30)
        with pytest.raises(ValueError):
            multiplier_quadrature_batch(3, [spectral_point(2, 1.0)], 1.0)

    def test_grid_shape_and_values(self):
        lams = [0.0, 1.0, 10.0]
        ts = [0.5, 2.0]
        vals, residuals, errs = multiplier_grid(3, lams, ts)
        assert vals.shape == (2, 3)
        for i, t in enumerate(ts):
            for j, lam in enumerate(lams):
                sp = spectral_point(3, lam)
                u = sp.u if sp.series is Series.PRINCIPAL else sp.u
                assert vals[i, j] == pytest.approx(
                    multiplier_closed_d3(sp.u, t), abs=1e-12
                )
        assert np.all(errs >= 0) and np.all(residuals >= 0)


class TestDecayEnvelopes:
    def test_bound_requires_t_at_least_t0(self):
        sp = spectral_point(2, 1.0)
        with pytest.raises(ValueError):
            decay_bound(sp, 0.5, t0=1.0)

    def test_principal_branches(self):
        d = 3
        sp = spectral_point(d, sigma_d(d) + 4.0)  # u = 2
        t = 5.0
        assert decay_bound(sp, t) == pytest.approx(0.5 * math.exp(-t), rel=1e-14)
        sp0 = spectral_point(d, sigma_d(d))  # u = 0 -> min(t, inf) = t
        assert decay_bound(sp0, t) == pytest.approx(t * math.exp(-t), rel=1e-14)

    def test_complementary_branch(self):
        sp = spectral_point(2, 0.25 - 0.04)  # v = 0.2
        t = 6.0
        expected = min(t, 5.0) * math.exp((0.2 - 0.5) * t)
        assert decay_bound(sp, t) == pytest.approx(expected, rel=1e-14)

    def test_trivial_is_order_one(self):
        sp = spectral_point(3, 0.0)  # v = 1 = (d-1)/2
        assert decay_bound(sp, 8.0) == pytest.approx(1.0, rel=1e-14)

    def test_decay_class_rates(self):
        d = 3
        t = 4.0
        assert decay_class(spectral_point(d, 9.0), t) == pytest.approx(
            t * math.exp(-t), rel=1e-14
        )
        # complementary with s = 1/2: lambda = sigma (1 - 1/4)
        sp = spectral_point(d, sigma_d(d) * 0.75)
        assert decay_class(sp, t) == pytest.approx(
            t * math.exp(-(d - 1) * 0.5 * t / 2.0), rel=1e-14
        )
        # trivial: no decay beyond the t factor
        assert decay_class(spectral_point(d, 0.0), t) == pytest.approx(t, rel=1e-14)

    def test_frozen_constants_dominate_spot_grid(self):
        for d in (2, 3):
            C, _ = fit_envelope_constant(
                d, np.linspace(1.0, 20.0, 7), [0.0, 0.2, 5.0, 100.0, 400.0]
            )
            assert C < FROZEN_ENVELOPE_C[d]

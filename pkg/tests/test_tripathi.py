"""Connection-family tests: coefficients vs the operator-form oracle."""

import numpy as np
import numpy.testing as npt
import pytest

from warpgeo.expr import eval_jet
from warpgeo.geometry import (
    Tensor11Field,
    VectorField,
    christoffel_at,
    nonmetricity_at,
    sym_skew_split_at,
    torsion_at,
)
from warpgeo.tripathi import (
    PresetId,
    TripathiData,
    TripathiError,
    coefficients,
    coefficients_at,
    connection_rhs_at,
    deformation_at,
    nonmetricity_claimed_at,
    one_forms_at,
    phi_from_skew,
    preset,
    torsion_claimed_at,
    validate_g_skew,
)

from conftest import random_field, random_polynomial, sample_box

NAMES = ("r", "theta")


def coord_field(axis, names=NAMES):
    return VectorField.coordinate(names, axis)


def random_data(names, rng, degree=1) -> TripathiData:
    n = len(names)
    return TripathiData(
        random_polynomial(names, rng, degree),
        random_polynomial(names, rng, degree),
        random_field(names, rng, degree),
        random_field(names, rng, degree),
        random_field(names, rng, degree),
        Tensor11Field(
            tuple(
                tuple(random_polynomial(names, rng, degree) for _ in range(n))
                for _ in range(n)
            )
        ),
    )


# ---------------------------------------------------------------------------
# one-forms
# ---------------------------------------------------------------------------


class TestOneForms:
    def test_radial_direction(self, polar_chart):
        d = TripathiData.create(NAMES, P=coord_field(0))
        u, u1, u2 = one_forms_at(polar_chart, d, (2.0, 1.0))
        npt.assert_allclose(u, [1.0, 0.0], atol=0)
        npt.assert_array_equal(u1, 0.0)
        npt.assert_array_equal(u2, 0.0)

    def test_angular_direction_picks_up_metric(self, polar_chart):
        d = TripathiData.create(NAMES, P=coord_field(1))
        u, _, _ = one_forms_at(polar_chart, d, (2.0, 1.0))
        npt.assert_allclose(u, [0.0, 4.0], atol=0)

    def test_zero_field(self, polar_chart):
        d = TripathiData.create(NAMES)
        u, u1, u2 = one_forms_at(polar_chart, d, (2.0, 1.0))
        npt.assert_array_equal(u, 0.0)


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


class TestCoefficients:
    def test_zero_data_reduces_to_levi_civita(self, polar_chart, hyperbolic_chart):
        rng = np.random.default_rng(31)
        d = TripathiData.create(NAMES)
        for m in (polar_chart, hyperbolic_chart):
            for p in sample_box(rng, [(0.5, 2.5), (0.0, 6.0)], 10):
                npt.assert_array_equal(coefficients_at(m, d, p), christoffel_at(m, p))

    def test_semi_symmetric_metric_hand_value(self, polar_chart):
        d = preset(PresetId.SEMI_SYMMETRIC_METRIC, NAMES, P=coord_field(0))
        gamma = coefficients_at(polar_chart, d, (2.0, 1.0))
        # Gamma~^r_theta_theta = Gamma^r_theta_theta - g_theta_theta P^r = -2 - 4
        assert gamma[0, 1, 1] == pytest.approx(-6.0, abs=1e-13)

    def test_coefficients_match_operator_form(self, polar_chart, hyperbolic_chart):
        # uniqueness probe: transcription vs operator evaluation, 100 draws
        rng = np.random.default_rng(32)
        for m in (polar_chart, hyperbolic_chart):
            d = random_data(NAMES, rng)
            conn = coefficients(m, d)
            for _ in range(50):
                X = random_field(NAMES, rng)
                Y = random_field(NAMES, rng)
                p = rng.uniform(0.4, 1.6, size=2)
                from warpgeo.geometry import cov_deriv_at

                npt.assert_allclose(
                    cov_deriv_at(conn, X, Y, p),
                    connection_rhs_at(m, d, X, Y, p),
                    atol=1e-10,
                )

    def test_coefficient_derivatives_match_finite_differences(self, hyperbolic_chart):
        rng = np.random.default_rng(33)
        d = random_data(NAMES, rng)
        conn = coefficients(hyperbolic_chart, d)
        step = 1e-5
        for p in sample_box(rng, [(0.2, 1.2), (0.5, 5.0)], 5):
            gamma, dgamma = conn.at_with_derivatives(p)
            npt.assert_allclose(gamma, conn.at(p), atol=1e-14)
            for axis in range(2):
                hi, lo = p.copy(), p.copy()
                hi[axis] += step
                lo[axis] -= step
                fd = (conn.at(hi) - conn.at(lo)) / (2 * step)
                npt.assert_allclose(dgamma[axis], fd, atol=1e-6, rtol=1e-6)

    def test_curvature_of_torsionful_connection(self, polar_chart):
        # curvature works for any coefficient field, not just Levi-Civita
        from warpgeo.geometry import curvature_at

        rng = np.random.default_rng(41)
        d = random_data(NAMES, rng)
        conn = coefficients(polar_chart, d)
        for _ in range(10):
            X, Y, Z = (random_field(NAMES, rng) for _ in range(3))
            p = rng.uniform(0.5, 2.0, size=2)
            npt.assert_allclose(
                curvature_at(conn, X, Y, Z, p),
                -curvature_at(conn, Y, X, Z, p),
                atol=1e-10,
            )


# ---------------------------------------------------------------------------
# claimed torsion / non-metricity
# ---------------------------------------------------------------------------


class TestClaimedIdentities:
    def test_torsion_antisymmetric_in_arguments(self, polar_chart):
        rng = np.random.default_rng(34)
        d = random_data(NAMES, rng)
        X = random_field(NAMES, rng)
        npt.assert_array_equal(torsion_claimed_at(polar_chart, d, X, X, (2.0, 1.0)), 0.0)

    def test_yano_polar_torsion(self, polar_chart):
        d = preset(PresetId.SEMI_SYMMETRIC_METRIC, NAMES, P=coord_field(0))
        out = torsion_claimed_at(
            polar_chart, d, coord_field(0), coord_field(1), (2.0, 1.0)
        )
        npt.assert_allclose(out, [0.0, -1.0], atol=1e-14)

    def test_torsion_identity_on_random_draws(self, polar_chart):
        rng = np.random.default_rng(35)
        d = random_data(NAMES, rng)
        conn = coefficients(polar_chart, d)
        for _ in range(100):
            X = random_field(NAMES, rng)
            Y = random_field(NAMES, rng)
            p = rng.uniform(0.5, 2.5, size=2)
            npt.assert_allclose(
                torsion_at(conn, X, Y, p),
                torsion_claimed_at(polar_chart, d, X, Y, p),
                atol=1e-10,
            )

    def test_metric_presets_have_zero_claimed_nonmetricity(self, polar_chart):
        rng = np.random.default_rng(36)
        phi = Tensor11Field(
            tuple(
                tuple(random_polynomial(NAMES, rng, 1) for _ in range(2))
                for _ in range(2)
            )
        )
        for d in (
            preset(PresetId.SEMI_SYMMETRIC_METRIC, NAMES, P=coord_field(0)),
            preset(PresetId.QUARTER_SYMMETRIC_METRIC, NAMES, P=coord_field(0), phi=phi),
        ):
            for _ in range(10):
                X, Y, Z = (random_field(NAMES, rng) for _ in range(3))
                p = rng.uniform(0.5, 2.5, size=2)
                assert nonmetricity_claimed_at(polar_chart, d, X, Y, Z, p) == 0.0

    def test_agashe_chafle_value(self, polar_chart):
        d = preset(PresetId.SEMI_SYMMETRIC_NON_METRIC, NAMES, P=coord_field(0))
        out = nonmetricity_claimed_at(
            polar_chart, d, coord_field(1), coord_field(0), coord_field(1), (2.0, 1.0)
        )
        assert out == pytest.approx(-4.0, abs=1e-13)

    def test_nonmetricity_identity_on_random_draws(self, hyperbolic_chart):
        rng = np.random.default_rng(37)
        d = random_data(NAMES, rng)
        conn = coefficients(hyperbolic_chart, d)
        for _ in range(100):
            X, Y, Z = (random_field(NAMES, rng) for _ in range(3))
            p = rng.uniform(0.2, 1.2, size=2)
            lhs = nonmetricity_at(conn, hyperbolic_chart, X, Y, Z, p)
            rhs = nonmetricity_claimed_at(hyperbolic_chart, d, X, Y, Z, p)
            assert abs(lhs - rhs) < 1e-10


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


class TestPresets:
    def test_levi_civita_all_zero(self, polar_chart):
        d = preset(PresetId.LEVI_CIVITA, NAMES)
        npt.assert_array_equal(
            coefficients_at(polar_chart, d, (2.0, 1.0)),
            christoffel_at(polar_chart, (2.0, 1.0)),
        )

    def test_identity_phi_has_no_skew_part(self, polar_chart):
        d = preset(PresetId.SEMI_SYMMETRIC_METRIC, NAMES, P=coord_field(0))
        phi1, phi2 = sym_skew_split_at(polar_chart, d.phi, (2.0, 1.0))
        npt.assert_allclose(phi1, np.eye(2), atol=1e-14)
        npt.assert_allclose(phi2, 0.0, atol=1e-14)

    def test_quarter_symmetric_reduces_to_semi_symmetric(self, polar_chart):
        rng = np.random.default_rng(38)
        P = random_field(NAMES, rng)
        quarter = preset(
            PresetId.QUARTER_SYMMETRIC_METRIC,
            NAMES,
            P=P,
            phi=Tensor11Field.identity(NAMES),
        )
        semi = preset(PresetId.SEMI_SYMMETRIC_METRIC, NAMES, P=P)
        for p in sample_box(rng, [(0.5, 2.5), (0.0, 6.0)], 10):
            npt.assert_allclose(
                coefficients_at(polar_chart, quarter, p),
                coefficients_at(polar_chart, semi, p),
                atol=1e-12,
            )

    def test_agashe_chafle_enforces_shared_field(self):
        d = preset(PresetId.SEMI_SYMMETRIC_NON_METRIC, NAMES, P=coord_field(0))
        assert d.P2 is d.P
        assert eval_jet(d.f2, (1.0, 1.0), 0).value == -1.0

    def test_fixed_parameter_rejected(self):
        with pytest.raises(TripathiError, match="fixes parameter"):
            preset(
                PresetId.SEMI_SYMMETRIC_METRIC,
                NAMES,
                P=coord_field(0),
                phi=Tensor11Field.identity(NAMES),
            )

    def test_missing_parameter_rejected(self):
        with pytest.raises(TripathiError, match="requires parameter"):
            preset(PresetId.QUARTER_SYMMETRIC_METRIC, NAMES, P=coord_field(0))

    def test_non_skew_phi_rejected(self, polar_chart):
        with pytest.raises(TripathiError, match="symmetric part"):
            preset(
                PresetId.QUARTER_SYMMETRIC_NON_METRIC,
                NAMES,
                P=coord_field(0),
                P2=coord_field(0),
                f2=1.0,
                phi=Tensor11Field.identity(NAMES),
                metric=polar_chart,
                probe_points=[(2.0, 1.0)],
            )

    def test_phi_from_skew_is_g_skew(self, polar_chart):
        phi = phi_from_skew(polar_chart, [["0", "r"], ["-r", "0"]])
        rng = np.random.default_rng(39)
        pts = sample_box(rng, [(0.5, 2.5), (0.0, 6.0)], 10)
        validate_g_skew(polar_chart, phi, pts)
        d = preset(
            PresetId.QUARTER_SYMMETRIC_NON_METRIC,
            NAMES,
            P=coord_field(0),
            P2=coord_field(1),
            f2="r",
            phi=phi,
            metric=polar_chart,
            probe_points=pts,
        )
        # quarter-symmetric non-metric data must still satisfy both identities
        conn = coefficients(polar_chart, d)
        for p in pts:
            X, Y = random_field(NAMES, rng), random_field(NAMES, rng)
            npt.assert_allclose(
                torsion_at(conn, X, Y, p),
                torsion_claimed_at(polar_chart, d, X, Y, p),
                atol=1e-10,
            )


# ---------------------------------------------------------------------------
# deformation consistency
# ---------------------------------------------------------------------------


def test_deformation_is_rhs_minus_levi_civita(polar_chart):
    rng = np.random.default_rng(40)
    d = random_data(NAMES, rng)
    from warpgeo.geometry import cov_deriv_at, levi_civita

    lc = levi_civita(polar_chart)
    for _ in range(20):
        X, Y = random_field(NAMES, rng), random_field(NAMES, rng)
        p = rng.uniform(0.5, 2.5, size=2)
        npt.assert_allclose(
            connection_rhs_at(polar_chart, d, X, Y, p),
            cov_deriv_at(lc, X, Y, p) + deformation_at(polar_chart, d, X, Y, p),
            atol=1e-12,
        )

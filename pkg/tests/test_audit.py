"""Audit engine tests: selection, sampling, placement validation, suites."""

import zlib

import numpy as np
import numpy.testing as npt
import pytest

from warpgeo.audit import (
    CHECKS,
    AuditConfigError,
    Placement,
    PlacementError,
    corollary_suite,
    expand_checks,
    random_block_phi,
    random_field,
    random_placed_data,
    random_tripathi_data,
    run_audit,
    sample_points,
)
from warpgeo.expr import eval_jet
from warpgeo.fixtures import FIXTURES, polar, sphere, torus3
from warpgeo.geometry import cov_deriv_at
from warpgeo.tripathi import PresetId, connection_rhs_at, coefficients
from warpgeo.warped import PositivityError, build_warped, lift_field, split_at
from warpgeo.geometry import ChartMetric


# ---------------------------------------------------------------------------
# registry and selection
# ---------------------------------------------------------------------------


class TestRegistry:
    def test_every_identity_has_a_check(self):
        groups = {cd.group for cd in CHECKS.values()}
        assert {"thm1", "lemma21", "prop22", "prop31", "prop32"} <= groups
        assert {f"cor4{i}" for i in range(1, 9)} <= groups

    def test_pair_variants_exist_where_derivation_differs(self):
        paired = {
            cd.check for cd in CHECKS.values() if cd.variant == "as-derived"
        }
        assert paired == {
            "prop31.3",
            "prop32.3",
            "prop32.4",
            "prop32.5",
            "cor45.3",
            "cor46.5",
            "cor47.3",
            "cor48.3",
            "cor48.4",
        }

    def test_substitution_notes_recorded(self):
        assert "U read as P" in CHECKS["cor42.3"].note
        assert "U2 read as P2" in CHECKS["cor48.3.as-printed"].note

    def test_ids_unique(self):
        ids = [cd.check_id for cd in CHECKS.values()]
        assert len(ids) == len(set(ids))

    def test_expand_all(self):
        assert len(expand_checks(["all"])) == len(CHECKS)

    def test_expand_group_and_bare_check(self):
        defs = expand_checks(["prop31"])
        assert {d.check_id for d in defs} == {
            "prop31.1",
            "prop31.2",
            "prop31.3.as-printed",
            "prop31.3.as-derived",
            "prop31.4",
        }
        both = expand_checks(["prop32.5"])
        assert {d.check_id for d in both} == {
            "prop32.5.as-printed",
            "prop32.5.as-derived",
        }
        one = expand_checks(["prop32.5.as-derived"])
        assert len(one) == 1

    def test_unknown_selector(self):
        with pytest.raises(AuditConfigError, match="unknown check selector"):
            expand_checks(["prop99"])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


class TestSampling:
    def test_deterministic(self):
        fx = polar()
        a = sample_points(fx.wp, fx.box, 50, seed=7)
        b = sample_points(fx.wp, fx.box, 50, seed=7)
        npt.assert_array_equal(np.array(a), np.array(b))

    def test_count_and_validation(self):
        fx = polar()
        pts = sample_points(fx.wp, fx.box, 100, seed=42)
        assert len(pts) == 100
        for p in pts:
            assert fx.box[0][0] <= p[0] <= fx.box[0][1]

    def test_positivity_failure_reports_point(self):
        wp = build_warped(
            ChartMetric.from_rows(("r",), [["1"]]),
            ChartMetric.from_rows(("theta",), [["1"]]),
            "r",
        )
        with pytest.raises(PositivityError, match="not positive"):
            sample_points(wp, [(-2.0, -1.0), (0.0, 6.0)], 5, seed=0)

    def test_box_shape_errors(self):
        fx = polar()
        with pytest.raises(AuditConfigError, match="intervals"):
            sample_points(fx.wp, [(0.5, 3.0)], 5, seed=0)
        with pytest.raises(AuditConfigError, match="low < high"):
            sample_points(fx.wp, [(0.5, 0.5), (0.0, 6.0)], 5, seed=0)
        with pytest.raises(AuditConfigError, match=">= 1"):
            sample_points(fx.wp, fx.box, 0, seed=0)


# ---------------------------------------------------------------------------
# run_audit behavior
# ---------------------------------------------------------------------------


class TestRunAudit:
    def test_thm1_passes_with_random_data(self):
        fx = FIXTURES["hyperbolic"]()
        rng = np.random.default_rng([1, 2])
        data = random_tripathi_data(fx.wp.chart.names, rng)
        rep = run_audit(fx.wp, data, None, ["thm1"], box=fx.box, samples=60, seed=3)
        assert rep.all_passed
        assert rep.by_id("thm1.torsion").max_residual <= 1e-9

    def test_placement_mismatch_rejected(self):
        fx = polar()
        rng = np.random.default_rng(4)
        data = random_placed_data(fx.wp, Placement.VERTICAL, rng)
        with pytest.raises(AuditConfigError, match="requires placement"):
            run_audit(fx.wp, data, "vertical", ["prop31"], box=fx.box, samples=5, seed=0)

    def test_preset_binding_enforced(self):
        fx = polar()
        rng = np.random.default_rng(5)
        data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        with pytest.raises(AuditConfigError, match="bound to preset"):
            run_audit(fx.wp, data, "horizontal", ["cor41"], box=fx.box, samples=5, seed=0)

    def test_placement_violation_detected(self):
        fx = polar()
        rng = np.random.default_rng(6)
        data = random_tripathi_data(fx.wp.chart.names, rng)  # P spans both factors
        with pytest.raises(PlacementError, match="components"):
            run_audit(fx.wp, data, "horizontal", ["prop31.1"], box=fx.box, samples=5, seed=0)

    def test_non_block_phi_detected(self):
        fx = polar()
        rng = np.random.default_rng(7)
        placed = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        full = random_tripathi_data(fx.wp.chart.names, rng)
        broken = type(placed)(
            placed.f1, placed.f2, placed.P, placed.P1, placed.P2, full.phi
        )
        with pytest.raises(PlacementError, match="block-preserving"):
            run_audit(fx.wp, broken, "horizontal", ["prop31.1"], box=fx.box, samples=5, seed=0)

    def test_as_printed_residual_matches_missing_term_pattern(self):
        # the prop31.3 printed residual is |f2 g(V,W)| * max|P2| exactly
        from warpgeo.audit import _Engine, _PointContext

        fx = polar()
        rng = np.random.default_rng([8, 1])
        data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        rep = run_audit(
            fx.wp, data, "horizontal", ["prop31.3"], box=fx.box, samples=30, seed=9
        )
        printed = rep.by_id("prop31.3.as-printed")
        derived = rep.by_id("prop31.3.as-derived")
        assert derived.passed
        assert not printed.passed  # random f2 is generically nonzero
        # rebuild the engine's battery and evaluate the pattern at the argmax
        eng = _Engine(fx.wp, data, Placement.HORIZONTAL, seed=9)
        ctx = _PointContext(eng, np.array(printed.argmax_point))
        pattern = max(
            abs(ctx.f2 * ctx.sprod(ctx.vals(V), ctx.vals(W)))
            * np.max(np.abs(ctx.P2v))
            for V, W in eng.vw_pairs()
        )
        assert printed.max_residual == pytest.approx(pattern, abs=1e-9)

    def test_projection_coherence(self):
        # tan(v) + nor(v) reconstructs v exactly for audited vectors
        fx = sphere()
        rng = np.random.default_rng(10)
        data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        conn = coefficients(fx.wp.chart, data)
        V = lift_field(fx.wp, "fiber", random_field(fx.wp.fiber.names, rng))
        W = lift_field(fx.wp, "fiber", random_field(fx.wp.fiber.names, rng))
        for p in sample_points(fx.wp, fx.box, 20, seed=11):
            lhs = cov_deriv_at(conn, V, W, p)
            nor, tan = split_at(fx.wp, lhs)
            npt.assert_array_equal(nor + tan, lhs)

    def test_placement_lemma_u_of_vertical_vanishes(self):
        # horizontal P with vertical V: u(V) = 0 exactly (block metric)
        fx = polar()
        rng = np.random.default_rng(12)
        data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        from warpgeo.geometry import metric_at

        V = lift_field(fx.wp, "fiber", random_field(fx.wp.fiber.names, rng))
        for p in sample_points(fx.wp, fx.box, 20, seed=13):
            g, _ = metric_at(fx.wp.chart, p)
            pv = np.array([eval_jet(c, p, 0).value for c in data.P.components])
            vv = np.array([eval_jet(c, p, 0).value for c in V.components])
            assert pv @ g @ vv == 0.0

    def test_ground_truth_self_consistency(self):
        # coefficient contraction vs operator evaluation of the same nabla
        for name in ("polar", "sphere"):
            fx = FIXTURES[name]()
            rng = np.random.default_rng([14, zlib.crc32(name.encode()) % 1000])
            data = random_tripathi_data(fx.wp.chart.names, rng)
            conn = coefficients(fx.wp.chart, data)
            A = random_field(fx.wp.chart.names, rng)
            B = random_field(fx.wp.chart.names, rng)
            for p in sample_points(fx.wp, fx.box, 25, seed=15):
                npt.assert_allclose(
                    cov_deriv_at(conn, A, B, p),
                    connection_rhs_at(fx.wp.chart, data, A, B, p),
                    atol=1e-11,
                )

    def test_monotone_tolerance_under_box_shrink(self):
        # moving the box away from the r -> 0 singularity cannot blow up
        # residuals; compare with a 1e-13 floor (rounding noise)
        fx = polar()
        rng = np.random.default_rng([16, 0])
        data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
        wide = run_audit(
            fx.wp, data, "horizontal",
            ["thm1", "prop31"], box=((0.2, 3.0), (0.1, 6.0)), samples=60, seed=17,
        )
        shrunk = run_audit(
            fx.wp, data, "horizontal",
            ["thm1", "prop31"], box=((1.0, 2.0), (1.0, 5.0)), samples=60, seed=17,
        )
        for r_wide in wide.results:
            if r_wide.variant == "as-printed":
                continue
            r_shrunk = shrunk.by_id(r_wide.check_id)
            assert r_shrunk.max_residual <= max(10.0 * r_wide.max_residual, 1e-13)

    def test_report_determinism(self):
        fx = polar()
        rng = np.random.default_rng([18, 0])
        data = random_tripathi_data(fx.wp.chart.names, rng)
        rep1 = run_audit(fx.wp, data, None, ["thm1"], box=fx.box, samples=40, seed=19)
        rep2 = run_audit(fx.wp, data, None, ["thm1"], box=fx.box, samples=40, seed=19)
        for a, b in zip(rep1.results, rep2.results):
            assert a == b


# ---------------------------------------------------------------------------
# corollary suites
# ---------------------------------------------------------------------------


SUITE_CASES = [
    (PresetId.SEMI_SYMMETRIC_METRIC, Placement.HORIZONTAL),
    (PresetId.SEMI_SYMMETRIC_METRIC, Placement.VERTICAL),
    (PresetId.SEMI_SYMMETRIC_NON_METRIC, Placement.HORIZONTAL),
    (PresetId.SEMI_SYMMETRIC_NON_METRIC, Placement.VERTICAL),
    (PresetId.QUARTER_SYMMETRIC_METRIC, Placement.HORIZONTAL),
    (PresetId.QUARTER_SYMMETRIC_METRIC, Placement.VERTICAL),
    (PresetId.QUARTER_SYMMETRIC_NON_METRIC, Placement.HORIZONTAL),
    (PresetId.QUARTER_SYMMETRIC_NON_METRIC, Placement.VERTICAL),
]


class TestCorollarySuites:
    @pytest.mark.parametrize("preset_id,placement", SUITE_CASES)
    def test_derived_forms_pass_on_torus3(self, preset_id, placement):
        rep = corollary_suite(preset_id, placement, torus3(), samples=30, seed=42)
        for r in rep.results:
            if r.variant != "as-printed":
                assert r.passed, f"{r.check_id}: {r.max_residual:.3e}"

    def test_printed_typo_items_fail_where_exercised(self):
        rep = corollary_suite(
            PresetId.QUARTER_SYMMETRIC_METRIC, Placement.HORIZONTAL, torus3(),
            samples=30, seed=42,
        )
        printed = rep.by_id("cor45.3.as-printed")
        derived = rep.by_id("cor45.3.as-derived")
        assert derived.passed and not printed.passed

    def test_levi_civita_degenerates_to_decomposition_checks(self):
        rep = corollary_suite(PresetId.LEVI_CIVITA, Placement.HORIZONTAL, polar(), samples=30)
        ids = {r.check_id for r in rep.results}
        assert ids == {"lemma21", "prop22.1", "prop22.2", "prop22.3", "prop22.4"}
        assert rep.all_passed


# ---------------------------------------------------------------------------
# randomized ingredients
# ---------------------------------------------------------------------------


def test_random_placed_data_respects_placement():
    fx = polar()
    rng = np.random.default_rng(20)
    data = random_placed_data(fx.wp, Placement.HORIZONTAL, rng)
    for f in (data.P, data.P1, data.P2):
        assert f.components[1].is_zero_constant()
    assert data.phi.components[0][1].is_zero_constant()
    assert data.phi.components[1][0].is_zero_constant()


def test_random_block_phi_is_block(n=3):
    fx = torus3()
    rng = np.random.default_rng(21)
    phi = random_block_phi(fx.wp, rng)
    m = fx.wp.base_dim
    for k in range(fx.wp.dim):
        for i in range(fx.wp.dim):
            if (k < m) != (i < m):
                assert phi.components[k][i].is_zero_constant()

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakmzi.interferometer import Detector, ExperimentConfig
from weakmzi.lhv import (
    BinningMismatchError,
    ClampedDomainWarning,
    HiddenBivariateModel,
    UndefinedWeightsError,
    classify_convex_weights,
    convex_weights,
    default_distribution,
    default_distributions,
    factorized_solutions,
    histogram_overlap,
    mixture_before_B2,
    negative_interval,
    negative_region_onset,
    scan_violations,
    split_weights,
    verify_bivariate_constraints,
    weight_histogram,
    weight_range,
    wigner_model,
)
from weakmzi.numerics import BracketError, integrate
from weakmzi.phasespace import default_scan_grids, negativity_scan, wigner_closed_form
from weakmzi.pointer import POSITION, WAVENUMBER, click_probability, default_grid, density, normalized_density, quadrature

BASE = ExperimentConfig()

# Violation windows of the factorised solutions at g=1, sigma=1, from the
# 720-point midpoint scan over (0, 2 pi): every scanned phi in [lo, hi]
# violates the [0, 1] weight bound and no phi outside does.
SOLUTION1_WINDOW = (1.0690141668465267, 5.214171140333059, 476)
SOLUTION2_WINDOW = (0.7112216701876892, 5.571963636991897, 558)

# Onsets of w_A < 0 found by root finding on the default 2048-point grid.
ONSET_D1 = 0.2687603375313339
ONSET_D2 = 0.26457698087477766


class TestDefaults:
    def test_shapes(self):
        dd = default_distributions(BASE)
        x = default_grid(BASE).values
        assert x[np.argmax(dd.phi_A_x(x))] == pytest.approx(BASE.g, abs=2 * (x[1] - x[0]))
        np.testing.assert_array_equal(dd.phi_A_k(x), dd.phi_B_k(x))
        np.testing.assert_allclose(dd.phi_A_x(x + BASE.g), dd.phi_B_x(x), atol=1e-15)

    @pytest.mark.parametrize("which", ["A", "B"])
    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER, quadrature(1, 1)], ids=lambda b: b.label)
    def test_normalised(self, which, basis):
        assert integrate(default_distribution(BASE, which, basis)) == pytest.approx(1.0, abs=1e-10)

    def test_bad_which(self):
        with pytest.raises(ValueError):
            default_distribution(BASE, "C", POSITION)


class TestMixture:
    def test_phi0(self):
        config = ExperimentConfig(phi=0.0)
        x = default_grid(config).values
        np.testing.assert_allclose(mixture_before_B2(config)(x), 0.5 * default_distribution(config, "A", POSITION)(x), atol=1e-16)

    def test_phi_pi(self):
        config = ExperimentConfig(phi=math.pi)
        x = default_grid(config).values
        want = 0.5 * default_distribution(config, "A", POSITION)(x) + 0.5 * default_distribution(config, "B", POSITION)(x)
        np.testing.assert_allclose(mixture_before_B2(config)(x), want, atol=1e-16)

    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER], ids=lambda b: b.label)
    def test_no_communication(self, basis):
        lam = default_grid(BASE, basis).values
        lhs = mixture_before_B2(BASE, basis)(lam)
        rhs = density(BASE, "D1", basis)(lam) + density(BASE, "D2", basis)(lam)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    @given(st.floats(-math.pi, math.pi))
    def test_mass(self, phi):
        assert mixture_before_B2(ExperimentConfig(phi=phi)).mass == pytest.approx((3 - math.cos(phi)) / 4)


class TestConvexWeights:
    def test_classification_at_pi_over_2(self):
        c = classify_convex_weights(convex_weights(BASE, "D1"))
        assert c.above_one and c.below_zero

    @pytest.mark.parametrize("det", ["D1", "D2"])
    def test_reconstructs_normalised_density(self, det):
        w = convex_weights(BASE, det)
        x = np.linspace(-6, 7, 400) + 1e-3  # avoid the excluded point exactly
        a = default_distribution(BASE, "A", POSITION)(x)
        b = default_distribution(BASE, "B", POSITION)(x)
        want = normalized_density(BASE, det)(x)
        np.testing.assert_allclose(w(x) * a + (1 - w(x)) * b, want, atol=1e-12)

    def test_complement(self):
        w = convex_weights(BASE, "D2")
        x = np.linspace(-3, 3, 50) + 0.01
        np.testing.assert_allclose(w(x) + w.complement()(x), 1.0, atol=1e-15)
        assert w.complement().component == "B"

    def test_excluded_point(self):
        w = convex_weights(BASE, "D1")
        assert w.excluded_points == (BASE.g / 2,)
        assert math.isnan(float(w(BASE.g / 2)))

    @pytest.mark.parametrize("basis", [WAVENUMBER, quadrature(0.0, 2.0)], ids=lambda b: b.label)
    def test_wavenumber_undefined(self, basis):
        with pytest.raises(UndefinedWeightsError):
            convex_weights(BASE, "D1", basis)

    def test_zero_coupling_undefined(self):
        with pytest.raises(UndefinedWeightsError):
            convex_weights(ExperimentConfig(g=0.0), "D1")

    def test_far_tails_finite(self):
        w = convex_weights(ExperimentConfig(g=10.0), "D1")
        assert np.all(np.isfinite(w(np.array([-1e4, -60.0, 60.0, 1e4]))))

    def test_d3_is_zero(self):
        assert float(convex_weights(BASE, "D3")(1.3)) == 0.0

    @pytest.mark.parametrize("det", ["D1", "D2"])
    @pytest.mark.parametrize("phi", [0.05, 0.3, math.pi / 2, 2.8, -1.0])
    def test_negative_interval_exact(self, det, phi):
        config = ExperimentConfig(phi=phi)
        lo, hi = negative_interval(config, det)
        w = convex_weights(config, det)
        inside = np.linspace(lo, hi, 41)[1:-1]
        assert np.all(w(inside) < 0)
        eps = 1e-6 * max(1.0, hi - lo)
        outside = np.array([lo - eps, hi + eps])
        assert np.all(w(outside) >= 0) or np.all(np.isnan(w(outside)) | (w(outside) >= 0))

    def test_no_interval_at_phi0(self):
        assert negative_interval(ExperimentConfig(phi=0.0), "D1") is None

    @pytest.mark.parametrize("det,value", [("D1", ONSET_D1), ("D2", ONSET_D2)])
    def test_grid_onset_regression(self, det, value):
        assert negative_region_onset(BASE, det) == pytest.approx(value, abs=1e-9)

    def test_onset_needs_bracket(self):
        with pytest.raises(BracketError):
            negative_region_onset(BASE, "D1", bracket=(0.05, 0.2))


class TestSplitWeights:
    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER, quadrature(1, 1), quadrature(0.1, 1)], ids=lambda b: b.label)
    @pytest.mark.parametrize("phi", [0.0, 0.5, math.pi / 2, -2.0, math.pi])
    @pytest.mark.parametrize("g,s", [(0.1, 1.0), (1.0, 1.0), (10.0, 0.5), (1.0, 2.0)])
    def test_admissible_and_complementary(self, basis, phi, g, s):
        config = ExperimentConfig(phi=phi, g=g, sigma=s)
        w1, w2 = split_weights(config, "D1", basis), split_weights(config, "D2", basis)
        lam = np.linspace(*w1.domain, 4001)
        a, b = w1.raw(lam), w2.raw(lam)
        np.testing.assert_allclose(a + b, 1.0, atol=1e-15)
        assert np.all((a >= 0) & (a <= 1))

    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER, quadrature(1, 1)], ids=lambda b: b.label)
    def test_ratio_of_densities(self, basis):
        w = split_weights(BASE, "D1", basis)
        lam = default_grid(BASE, basis, 301).values
        want = density(BASE, "D1", basis)(lam) / mixture_before_B2(BASE, basis)(lam)
        np.testing.assert_allclose(w(lam), want, rtol=1e-12)

    def test_ranges(self):
        assert weight_range(split_weights(BASE, "D1", POSITION)) == pytest.approx((0.5, 0.85355), abs=1e-5)
        lo, hi = weight_range(split_weights(BASE, "D1", WAVENUMBER))
        assert (lo, hi) == (pytest.approx(0.028595, abs=1e-6), pytest.approx(0.971405, abs=1e-6))

    def test_clamped_domain_warns(self):
        w = split_weights(BASE, "D1", POSITION)
        with pytest.warns(ClampedDomainWarning):
            v = w(np.array([w.domain[1] + 100.0]))
        assert float(v[0]) == pytest.approx(float(w.raw(np.array([w.domain[1]]))[0]))

    def test_domain_inside_is_quiet(self):
        w = split_weights(BASE, "D2", WAVENUMBER)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            w(np.linspace(-3, 3, 11))

    def test_d3_rejected(self):
        with pytest.raises(ValueError):
            split_weights(BASE, "D3")

    def test_phi0_half(self):
        w = split_weights(ExperimentConfig(phi=0.0), "D1")
        np.testing.assert_array_equal(w.raw(np.linspace(-3, 3, 7)), 0.5)


class TestBivariate:
    @pytest.mark.parametrize("phi", [0.0, 0.3, math.pi / 2, 2.5])
    def test_wigner_model_consistent_with_negativity(self, phi):
        config = ExperimentConfig(phi=phi)
        verdict = verify_bivariate_constraints(wigner_model(config), config)
        gx, gk = default_scan_grids(config)
        negative = min(negativity_scan(wigner_closed_form(l, config), gx, gk).min_value for l in ("W_1", "W_2")) < 0
        for name in ("marginal_A_x", "marginal_A_k", "marginal_B_x", "marginal_B_k", "nonnegative_f_A",
                     "nonnegative_f_B", "reproduce_D1_x", "reproduce_D1_k", "reproduce_D2_x", "reproduce_D2_k"):
            assert verdict[name].passed, name
        assert verdict["weight_range_A"].passed is (not negative)

    def test_half_weights_fail_reproduction(self):
        wa, wb = wigner_closed_form("W_A", BASE), wigner_closed_form("W_B", BASE)
        half = lambda x, k: np.full(np.broadcast(x, k).shape, 0.5)
        verdict = verify_bivariate_constraints(HiddenBivariateModel(wa, wb, half, half, "half"), BASE)
        assert not verdict["reproduce_D1_x"].passed
        assert not verdict["reproduce_D1_k"].passed
        assert verdict["weight_range_A"].passed

    def test_negative_density_flagged_at_location(self):
        wa, wb = wigner_closed_form("W_A", BASE), wigner_closed_form("W_1", BASE)
        half = lambda x, k: 0.5 + 0 * x * k
        verdict = verify_bivariate_constraints(HiddenBivariateModel(wa, wb, half, half), BASE)
        check = verdict["nonnegative_f_B"]
        assert not check.passed
        assert float(wigner_closed_form("W_1", BASE)(*check.where)) < 0
        assert "nonnegative_f_B" in verdict.failed()

    def test_missing_check(self):
        verdict = verify_bivariate_constraints(wigner_model(BASE), BASE, points=64)
        with pytest.raises(KeyError):
            verdict["nope"]


class TestFactorized:
    @pytest.mark.parametrize("which", ["solution1", "solution2"])
    def test_integral_equations(self, which):
        sol = factorized_solutions(BASE, which)
        assert sol.satisfies_equations
        assert max(sol.residuals.values()) < 1e-6

    def test_inadmissible_at_pi_over_2(self):
        s1 = factorized_solutions(BASE, "solution1")
        s2 = factorized_solutions(BASE, "solution2")
        assert s1.weight_max > 1 and not s1.admissible
        assert s2.weight_min < 0 and not s2.admissible

    def test_kernel_bounds_match_grid(self):
        sol = factorized_solutions(BASE, "solution1")
        x = default_grid(BASE, POSITION, 801).values
        k = default_grid(BASE, WAVENUMBER, 801).values
        values = sol.w1_plus(x[:, None], k[None, :])
        assert values.max() <= sol.weight_max + 1e-12
        assert values.max() == pytest.approx(sol.weight_max, abs=1e-4)

    def test_model_marginals(self):
        sol = factorized_solutions(BASE, "solution1")
        verdict = verify_bivariate_constraints(sol.model, BASE)
        assert verdict["marginal_A_x"].passed and verdict["nonnegative_f_A"].passed
        assert not verdict["weight_range_A"].passed

    def test_unknown_solution(self):
        with pytest.raises(ValueError):
            factorized_solutions(BASE, "solution3")

    @pytest.mark.slow
    @pytest.mark.parametrize("which,window", [("solution1", SOLUTION1_WINDOW), ("solution2", SOLUTION2_WINDOW)])
    def test_violation_scan_regression(self, which, window):
        scan = scan_violations(BASE, which)
        v = scan.violating_phis
        lo, hi, count = window
        assert v.size == count
        assert v.min() == pytest.approx(lo, abs=1e-12) and v.max() == pytest.approx(hi, abs=1e-12)
        inside = (scan.phis >= lo) & (scan.phis <= hi)
        np.testing.assert_array_equal(scan.violating, inside)


class TestHistograms:
    @pytest.mark.parametrize("bins", [10, 100, 1000])
    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER], ids=lambda b: b.label)
    @pytest.mark.parametrize("det", ["D1", "D2"])
    def test_mass_identity(self, bins, basis, det):
        h = weight_histogram(BASE, det, basis, bins=bins)
        assert h.component_mass.sum() == pytest.approx(click_probability(BASE, det), abs=1e-6)
        assert h.p.sum() == pytest.approx(mixture_before_B2(BASE).mass, abs=1e-6)

    @pytest.mark.parametrize("basis", [POSITION, WAVENUMBER], ids=lambda b: b.label)
    def test_reversal(self, basis):
        h1 = weight_histogram(BASE, "D1", basis, bins=100)
        h2 = weight_histogram(BASE, "D2", basis, bins=100)
        np.testing.assert_allclose(h1.p, h2.p[::-1], atol=1e-12)

    def test_support(self):
        hx = weight_histogram(BASE, "D1", POSITION)
        hk = weight_histogram(BASE, "D1", WAVENUMBER)
        assert 0.5 - 1e-3 <= hx.support[0] and hx.support[1] <= 0.854 + 1e-3
        assert 0.029 - 1e-3 <= hk.support[0] and hk.support[1] <= 0.971 + 1e-3
        occupied = np.nonzero(hx.p > 0)[0]
        assert hx.edges[occupied[0]] >= 0.5 - 0.01 and hx.edges[occupied[-1] + 1] <= 0.86

    def test_density_mode(self):
        h = weight_histogram(BASE, "D1", POSITION, bins=50, mode="density")
        assert (h.values * h.width).sum() == pytest.approx(h.p.sum())

    @pytest.mark.parametrize("kw", [{"bins": 1}, {"mode": "cumulative"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            weight_histogram(BASE, "D1", POSITION, **kw)

    def test_refinement_stable(self):
        masses = [weight_histogram(BASE, "D2", WAVENUMBER, bins=b).component_mass.sum() for b in (10, 100, 1000)]
        assert max(masses) - min(masses) <= 1e-6


class TestOverlap:
    def test_self_overlap(self):
        h = weight_histogram(BASE, "D1", POSITION, bins=40)
        rec = histogram_overlap(h, h)
        assert np.all(rec.remainder_x == 0) and np.all(rec.remainder_k == 0)

    def test_remainders_equal(self):
        hx = weight_histogram(BASE, "D1", POSITION)
        hk = weight_histogram(BASE, "D1", WAVENUMBER)
        rec = histogram_overlap(hx, hk)
        assert rec.precondition_ok
        assert abs(rec.remainder_mass[0] - rec.remainder_mass[1]) <= 1e-6
        assert abs(rec.split_mass[0] - rec.split_mass[1]) <= 1e-6
        assert rec.remainders_equal
        assert np.all(rec.overlap <= np.minimum(hx.p, hk.p) + 1e-18)

    def test_mismatch(self):
        with pytest.raises(BinningMismatchError):
            histogram_overlap(weight_histogram(BASE, "D1", POSITION, bins=10), weight_histogram(BASE, "D1", WAVENUMBER, bins=20))
        with pytest.raises(BinningMismatchError):
            histogram_overlap(weight_histogram(BASE, "D1", POSITION, bins=10), weight_histogram(BASE, "D2", WAVENUMBER, bins=10))

    @settings(deadline=None, max_examples=10)
    @given(st.floats(0.2, 3.0))
    def test_remainders_equal_any_phi(self, phi):
        config = ExperimentConfig(phi=phi)
        rec = histogram_overlap(weight_histogram(config, "D2", POSITION, bins=20),
                                weight_histogram(config, "D2", WAVENUMBER, bins=20))
        assert abs(rec.remainder_mass[0] - rec.remainder_mass[1]) <= 1e-6

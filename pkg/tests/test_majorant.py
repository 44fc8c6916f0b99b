import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from yukawa.errors import ConvergenceDomain, DomainError, FitDegenerate, ThresholdExceeded
from yukawa.majorant import (
    MajorantParams,
    ThresholdLadder,
    Variant,
    cn_system,
    collapse_scan,
    gamma_b,
    improved_integral_residual,
    integrating_factor,
    linear_coefficients,
    literature_radius,
    majorant_coefficients,
    radius_estimate,
    scaled_cn_system,
    tau_k,
    tau_k_leading_term,
    tau_k_limit_bound,
    tau_split,
    taut0_bound,
    theta_bound,
    theta_pde_residual,
    theta_series,
)
from yukawa.models import KernelKind, ScaleWindow
from yukawa.numerics import OdeGridSpec

WINDOW = ScaleWindow(1e-3, 1.0)
GRID = OdeGridSpec(400)


def constant_profile(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.ones_like(t), np.zeros_like(t)


class ThresholdTests(unittest.TestCase):
    def test_ladder_values(self) -> None:
        self.assertAlmostEqual(ThresholdLadder.beta(2), 4.0 * math.pi, delta=1e-14)
        self.assertAlmostEqual(ThresholdLadder.lagrange_threshold(3), 6.0 * math.pi, delta=1e-14)
        self.assertAlmostEqual(ThresholdLadder.collapse_threshold(2), 6.0 * math.pi, delta=1e-14)
        low, high = ThresholdLadder.interval(1)
        self.assertAlmostEqual(low, 4.0 * math.pi, delta=1e-14)
        self.assertAlmostEqual(high, 6.0 * math.pi, delta=1e-14)

    def test_order_for_coupling(self) -> None:
        self.assertEqual(ThresholdLadder.order_for(2.0 * math.pi), 1)
        self.assertEqual(ThresholdLadder.order_for(5.0 * math.pi), 2)
        self.assertEqual(ThresholdLadder.order_for(6.9 * math.pi), 7)
        with self.assertRaises(ThresholdExceeded):
            ThresholdLadder.order_for(8.0 * math.pi)
        with self.assertRaises(DomainError):
            ThresholdLadder.beta(1)


class TauTests(unittest.TestCase):
    def test_leading_term(self) -> None:
        self.assertAlmostEqual(tau_k_leading_term(5.0 * math.pi, 3), 8.456, delta=1e-3)
        with self.assertRaises(ThresholdExceeded):
            tau_k_leading_term(6.0 * math.pi, 3)

    def test_single_scale_bound_against_leading_term(self) -> None:
        beta = 2.0 * math.pi
        gap = taut0_bound(beta) - tau_k_leading_term(beta, 1)
        expected = (
            0.25 * beta * math.pi * math.exp(beta / (10.0 * math.pi)) * 0.2
            * (1.0 / (6.0 * math.pi - beta) - 1.0 / (8.0 * math.pi - beta))
        )
        self.assertAlmostEqual(gap, expected, delta=1e-12)
        with self.assertRaises(ThresholdExceeded):
            taut0_bound(4.0 * math.pi)

    def test_tau_grows_and_stays_below_the_limit_bound(self) -> None:
        beta, k = 5.0 * math.pi, 3
        values = [tau_k(beta, k, ScaleWindow(t0, math.inf)) for t0 in (1e-2, 1e-4, 1e-6)]
        self.assertTrue(values[0] < values[1] < values[2])
        self.assertLess(values[-1], tau_k_limit_bound(beta, k))
        self.assertLess(tau_k(beta, k, ScaleWindow(1e-6, 1.0)), tau_k_leading_term(beta, k))

    def test_tau_settles_as_the_window_opens(self) -> None:
        beta, k = 5.0 * math.pi, 3
        values = np.array(
            [tau_k(beta, k, ScaleWindow(t0, math.inf)) for t0 in (1e-2, 1e-3, 1e-4, 1e-5)]
        )
        np.testing.assert_allclose(values, [67.63, 73.66, 76.45, 77.75], atol=0.5)
        steps = np.diff(values)
        self.assertTrue(np.all(steps > 0))
        # increments contract by roughly 10^{-1/3} per decade
        self.assertTrue(np.all(steps[1:] < 0.6 * steps[:-1]))
        self.assertLess(steps[-1] / values[-1], 0.02)
        self.assertLess(values[-1], tau_k_limit_bound(beta, k))

    def test_tau_grows_logarithmically_at_the_lagrange_threshold(self) -> None:
        beta, k = 6.0 * math.pi, 3
        values = [tau_k(beta, k, ScaleWindow(t0, math.inf)) for t0 in (1e-3, 1e-4, 1e-5)]
        first, second = np.diff(values)
        self.assertGreater(first, 50.0)
        self.assertAlmostEqual(second / first, 1.0, delta=0.2)

    def test_split_at_unit_scale(self) -> None:
        whole, split = tau_split(5.0 * math.pi, 3, 1e-3)
        self.assertAlmostEqual(split / whole, 1.0, delta=1e-8)
        with self.assertRaises(DomainError):
            tau_split(5.0 * math.pi, 3, 2.0)

    def test_empty_window(self) -> None:
        self.assertEqual(tau_k(2.0 * math.pi, 1, ScaleWindow(0.5, 0.5)), 0.0)
        self.assertEqual(radius_estimate(2.0 * math.pi, 1, ScaleWindow(0.5, 0.5)), math.inf)

    def test_radius_shrinks_as_the_window_opens(self) -> None:
        radii = [
            radius_estimate(5.0 * math.pi, 3, ScaleWindow(t0, math.inf)) for t0 in (1e-2, 1e-3)
        ]
        self.assertGreater(radii[0], radii[1])
        with self.assertRaises(ThresholdExceeded):
            radius_estimate(7.0 * math.pi, 1, WINDOW)

    def test_literature_radius(self) -> None:
        self.assertAlmostEqual(
            literature_radius(2.0 * math.pi), 1.0 / (4.0 * math.pi * math.e), delta=1e-15
        )
        self.assertTrue(math.isnan(literature_radius(5.0 * math.pi)))

    def test_standard_profile(self) -> None:
        gamma, b = gamma_b(2.0, 0.5, KernelKind.STANDARD_BESSEL)
        self.assertAlmostEqual(gamma, 2.0, delta=1e-15)
        self.assertAlmostEqual(b, 1.0 / math.pi, delta=1e-15)


class LambertBoundTests(unittest.TestCase):
    def test_edges(self) -> None:
        self.assertEqual(theta_bound(0.0, 3.0), 1.0)
        self.assertEqual(theta_bound(2.0, 0.0), 1.0)
        self.assertEqual(theta_bound(1.0, math.exp(-1.0)), math.e)
        with self.assertRaises(ConvergenceDomain):
            theta_bound(1.0, 0.37)
        with self.assertRaises(DomainError):
            theta_bound(-1.0, 0.1)

    def test_interior_value(self) -> None:
        expected = -float(special.lambertw(-0.2).real) / 0.2
        self.assertAlmostEqual(theta_bound(0.4, 0.5), expected, delta=1e-13)

    def test_series_sums_to_the_bound(self) -> None:
        tau, z = 0.25, 0.4
        coefficients = majorant_coefficients(tau, 60)
        series = float(np.sum(coefficients * z ** np.arange(60)))
        self.assertAlmostEqual(series, theta_bound(z, tau), delta=1e-12)

    def test_coefficients(self) -> None:
        np.testing.assert_allclose(
            majorant_coefficients(0.5, 4), [1.0, 0.5, 0.375, 1.0 / 3.0], rtol=1e-14
        )
        np.testing.assert_array_equal(majorant_coefficients(0.0, 3), [1.0, 0.0, 0.0])
        with self.assertRaises(DomainError):
            majorant_coefficients(-1.0, 3)


class CoefficientFlowTests(unittest.TestCase):
    def test_linear_coefficients(self) -> None:
        np.testing.assert_array_equal(linear_coefficients(Variant.PLAIN, 2, 4), [0, 2, 3, 4])
        np.testing.assert_array_equal(linear_coefficients(Variant.IMPROVED, 2, 4), [0, 1, 2, 3])
        np.testing.assert_allclose(
            linear_coefficients(Variant.LAGRANGE, 3, 5), [0, 4.0 / 3.0, 8.0 / 3.0, 4, 5]
        )

    def test_constant_profile_has_closed_coefficients(self) -> None:
        window = ScaleWindow(1.0, 1.5)
        for variant in Variant:
            trajectory = cn_system(
                MajorantParams(1.0, 1, window, variant, 8),
                OdeGridSpec(2000),
                profile=constant_profile,
            )
            with self.subTest(variant=variant):
                np.testing.assert_allclose(
                    trajectory.final, majorant_coefficients(0.5, 8), rtol=1e-8
                )

    def test_second_coefficient_is_tau(self) -> None:
        beta = 2.0 * math.pi
        plain = cn_system(MajorantParams(beta, 1, WINDOW), GRID)
        self.assertAlmostEqual(plain.final[1] / tau_k(beta, 1, WINDOW), 1.0, delta=1e-7)
        beta = 5.0 * math.pi
        lagrange = cn_system(MajorantParams(beta, 3, WINDOW, Variant.LAGRANGE), GRID)
        self.assertAlmostEqual(lagrange.final[1] / tau_k(beta, 3, WINDOW), 1.0, delta=1e-7)

    def test_variants_are_ordered_and_capped(self) -> None:
        beta, k = 5.0 * math.pi, 3
        finals = {
            variant: cn_system(MajorantParams(beta, k, WINDOW, variant, 8), GRID).final
            for variant in Variant
        }
        ceiling = majorant_coefficients(tau_k(beta, k, WINDOW), 8)
        slack = 1.0 + 1e-6
        self.assertTrue(np.all(finals[Variant.IMPROVED] <= finals[Variant.LAGRANGE] * slack))
        self.assertTrue(np.all(finals[Variant.LAGRANGE] <= finals[Variant.PLAIN] * slack))
        self.assertTrue(np.all(finals[Variant.LAGRANGE] <= ceiling * slack))
        # the Lagrange coefficients meet the ceiling up to order k + 1
        np.testing.assert_allclose(finals[Variant.LAGRANGE][: k + 1], ceiling[: k + 1], rtol=1e-6)

    @given(k=st.integers(min_value=1, max_value=12), n_terms=st.integers(min_value=2, max_value=30))
    def test_linear_coefficients_are_ordered(self, k: int, n_terms: int) -> None:
        improved = linear_coefficients(Variant.IMPROVED, k, n_terms)
        lagrange = linear_coefficients(Variant.LAGRANGE, k, n_terms)
        plain = linear_coefficients(Variant.PLAIN, k, n_terms)
        self.assertTrue(np.all(improved <= lagrange + 1e-12))
        self.assertTrue(np.all(lagrange <= plain + 1e-12))
        np.testing.assert_array_equal(lagrange[k + 1:], plain[k + 1:])

    @settings(max_examples=8, deadline=None)
    @given(
        k=st.integers(min_value=1, max_value=4),
        fraction=st.floats(min_value=0.2, max_value=0.9),
        log_t0=st.floats(min_value=-3.0, max_value=-1.0),
    )
    def test_variants_are_ordered_for_any_coupling(
        self, k: int, fraction: float, log_t0: float
    ) -> None:
        beta = fraction * ThresholdLadder.lagrange_threshold(k)
        window = ScaleWindow(10.0 ** log_t0, 1.0)
        finals = {
            variant: cn_system(MajorantParams(beta, k, window, variant, 6), GRID).final
            for variant in Variant
        }
        ceiling = majorant_coefficients(tau_k(beta, k, window), 6)
        slack = 1.0 + 1e-5
        self.assertTrue(np.all(finals[Variant.IMPROVED] <= finals[Variant.LAGRANGE] * slack))
        self.assertTrue(np.all(finals[Variant.LAGRANGE] <= finals[Variant.PLAIN] * slack))
        self.assertTrue(np.all(finals[Variant.LAGRANGE] <= ceiling * slack))

    def test_scaled_system_matches_rescaled_flow(self) -> None:
        params = MajorantParams(5.0 * math.pi, 3, WINDOW, Variant.LAGRANGE, 6)
        grid = OdeGridSpec(1000)
        direct = cn_system(params, grid).final
        scaled = scaled_cn_system(params, grid).final
        factor = float(integrating_factor(params, WINDOW.t1))
        np.testing.assert_allclose(scaled * factor ** np.arange(6), direct, rtol=1e-8)

    def test_series_residual(self) -> None:
        for variant in (Variant.PLAIN, Variant.IMPROVED):
            params = MajorantParams(2.0 * math.pi, 1, WINDOW, variant, 6)
            trajectory = cn_system(params, OdeGridSpec(1000))
            with self.subTest(variant=variant):
                self.assertLess(theta_pde_residual(trajectory, params, 0.1), 1e-4)

    def test_theta_series_starts_at_one(self) -> None:
        trajectory = cn_system(MajorantParams(2.0 * math.pi, 1, WINDOW, n_terms=4), GRID)
        self.assertEqual(theta_series(trajectory, 0.3)[0], 1.0)
        self.assertEqual(len(trajectory.rows()), trajectory.t_grid.size)
        self.assertEqual(set(trajectory.rows()[0]), {"t", "C1", "C2", "C3", "C4"})

    def test_improved_flow_solves_its_integral_form(self) -> None:
        params = MajorantParams(2.0 * math.pi, 1, WINDOW, Variant.IMPROVED, 6)
        trajectory = cn_system(params, OdeGridSpec(1000))
        self.assertLess(improved_integral_residual(trajectory, params), 1e-6)

    def test_flow_needs_finite_window(self) -> None:
        params = MajorantParams(2.0 * math.pi, 1, ScaleWindow(1e-3, math.inf))
        with self.assertRaises(DomainError):
            cn_system(params)
        with self.assertRaises(DomainError):
            scaled_cn_system(params)
        with self.assertRaises(ValueError):
            MajorantParams(2.0 * math.pi, 0, WINDOW)


class CollapseTests(unittest.TestCase):
    def test_pair_exponents(self) -> None:
        cases = ((5.0 * math.pi, -0.5), (4.0 * math.pi, 0.0), (3.0 * math.pi, 0.5))
        for beta, expected in cases:
            fit = collapse_scan(beta, 1)
            with self.subTest(beta=beta):
                self.assertAlmostEqual(fit.predicted_exponent, expected, delta=1e-12)
                self.assertAlmostEqual(fit.fitted_exponent, expected, delta=0.05)
                self.assertAlmostEqual(fit.exact_exponent, expected, delta=0.05)

    def test_quadruple_exponent(self) -> None:
        fit = collapse_scan(6.0 * math.pi, 2)
        self.assertAlmostEqual(fit.predicted_exponent, 0.0, delta=1e-12)
        self.assertAlmostEqual(fit.fitted_exponent, 0.0, delta=0.05)
        self.assertIsNone(fit.exact_exponent)
        self.assertEqual(fit.to_row()["exact_exponent"], "")

    def test_fit_arguments(self) -> None:
        with self.assertRaises(FitDegenerate):
            collapse_scan(3.0 * math.pi, 1, deltas=(1e-2, 1e-3))
        with self.assertRaises(DomainError):
            collapse_scan(3.0 * math.pi, 1, deltas=(1e-3, 1e-2, 1e-1))
        with self.assertRaises(DomainError):
            collapse_scan(3.0 * math.pi, 1, deltas=(1.5, 1e-2, 1e-3))


if __name__ == "__main__":
    unittest.main()

import math
import unittest

import numpy as np
from scipy import special

from yukawa.constants import BOUND_SLACK, M_PEAK_LOCATION, M_PEAK_VALUE
from yukawa.errors import DomainError
from yukawa.models import KernelKind, ScaleWindow
from yukawa.numerics import QuadratureSpec, integrate_adaptive
from yukawa.potentials import (
    density_integral,
    euclid_hat,
    euclid_hat_array,
    find_m_peak,
    kernel_inflection_point,
    m_bounds,
    m_near_origin,
    mixture_g,
    mixture_m,
    mixture_m_raw,
    mixture_m_scaled,
    mixture_table,
    standard_kernel,
    standard_kernel_table,
    windowed_v,
    yukawa_v,
)
from yukawa.specfun import find_p_max


def product_form(s: np.ndarray) -> np.ndarray:
    half = 0.5 * np.asarray(s, dtype=float)
    k0, k1 = special.k0(half), special.k1(half)
    return 0.25 * s * s * (s * k0 * k1 + k1 * k1)


class KernelTests(unittest.TestCase):
    def test_hat_values(self) -> None:
        self.assertEqual(euclid_hat(0.0), 1.0)
        self.assertEqual(euclid_hat(1.5), 0.0)
        self.assertAlmostEqual(euclid_hat(0.5), 0.391002218, delta=1e-8)
        np.testing.assert_allclose(
            euclid_hat_array(np.array([0.0, 0.5, 2.0])), [1.0, euclid_hat(0.5), 0.0], atol=1e-15
        )

    def test_hat_rejects_negative_distance(self) -> None:
        with self.assertRaises(DomainError):
            euclid_hat(-0.1)

    def test_standard_kernel_table_matches_direct_values(self) -> None:
        table = standard_kernel_table()
        for w in (1e-9, 1e-3, 0.3, 1.0, 8.0, 90.0):
            with self.subTest(w=w):
                self.assertAlmostEqual(
                    float(table.h(w)) / standard_kernel(w), 1.0, delta=1e-7
                )
        self.assertEqual(float(table.h(0.0)), 1.0)
        self.assertEqual(float(table.h(1e4)), 0.0)

    def test_inflection_point_is_the_maximiser_of_p(self) -> None:
        location, _ = find_p_max()
        self.assertAlmostEqual(kernel_inflection_point(), location, delta=1e-5)


class MixtureTests(unittest.TestCase):
    def test_mixture_matches_product_form(self) -> None:
        scales = np.array([0.01, 0.2, 0.812, 1.0, 3.0, 10.0, 40.0])
        values = np.exp(-scales) * mixture_m_scaled(scales)
        np.testing.assert_allclose(values, product_form(scales), rtol=1e-9)

    def test_third_derivative_representation_agrees(self) -> None:
        self.assertAlmostEqual(mixture_m(0.7, verify=True), float(product_form(0.7)), delta=1e-9)
        for s in np.geomspace(0.05, 10.0, 10):
            with self.subTest(s=s):
                self.assertAlmostEqual(
                    mixture_m_raw(float(s)) / float(product_form(s)), 1.0, delta=1e-8
                )
        with self.assertRaises(DomainError):
            mixture_m_raw(0.0)

    def test_origin_value(self) -> None:
        self.assertEqual(mixture_m(0.0), 1.0)
        self.assertAlmostEqual(mixture_g(1.0), float(product_form(1.0)) / (2.0 * math.pi),
                               delta=1e-10)

    def test_exponential_bounds(self) -> None:
        scales = np.geomspace(0.01, 30.0, 20)
        values = np.exp(-scales) * mixture_m_scaled(scales)
        for s, value in zip(scales, values):
            bounds = m_bounds(float(s))
            with self.subTest(s=s):
                self.assertLessEqual(bounds.lower, value + BOUND_SLACK)
                self.assertLessEqual(value, bounds.upper + BOUND_SLACK)

    def test_hat_ratio_bound(self) -> None:
        scales = np.geomspace(0.01, 5.0, 15)
        values = np.exp(-scales) * mixture_m_scaled(scales)
        for s, value in zip(scales, values):
            with self.subTest(s=s):
                self.assertLessEqual(value, m_bounds(float(s)).mh + BOUND_SLACK)

    def test_bounds_on_a_dense_grid(self) -> None:
        scales = np.geomspace(0.01, 10.0, 1000)
        values = np.exp(-scales) * mixture_m_scaled(scales)
        lower = np.array([m_bounds(float(s)).lower for s in scales])
        upper = np.array([m_bounds(float(s)).upper for s in scales])
        self.assertTrue(np.all(lower <= values + BOUND_SLACK))
        self.assertTrue(np.all(values <= upper + BOUND_SLACK))
        inner = scales <= 1.0
        envelope = m_near_origin(scales[inner])
        self.assertTrue(np.all(values[inner] <= envelope + BOUND_SLACK))

    def test_near_origin_expansion(self) -> None:
        scales = np.array([1e-3, 1e-2, 0.05])
        values = np.exp(-scales) * mixture_m_scaled(scales)
        gaps = np.abs(values - m_near_origin(scales))
        self.assertTrue(np.all(gaps <= scales**4 * (1.0 + np.log(scales) ** 2)))
        for s in (M_PEAK_LOCATION, 1.0):
            self.assertLess(float(product_form(s)), float(m_near_origin(s)))

    def test_peak(self) -> None:
        location, value = find_m_peak()
        self.assertAlmostEqual(location, M_PEAK_LOCATION, delta=2e-3)
        self.assertAlmostEqual(value, M_PEAK_VALUE, delta=1e-3)

    def test_table_matches_direct_values(self) -> None:
        table = mixture_table()
        scales = np.array([2e-6, 1e-3, 0.5, 2.0, 20.0])
        np.testing.assert_allclose(table.m(scales), product_form(scales), rtol=1e-7)
        self.assertEqual(float(table.m(100.0)), 0.0)
        self.assertEqual(float(table.m(0.0)), 1.0)

    def test_log_integral(self) -> None:
        table = mixture_table()
        spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11)
        direct = integrate_adaptive(
            lambda s: product_form(s) / (2.0 * math.pi * s), 0.1, 2.0, spec, vectorized=True
        )
        self.assertAlmostEqual(table.log_integral(0.1, 2.0) / direct, 1.0, delta=1e-7)
        split = table.log_integral(0.1, 0.7) + table.log_integral(0.7, 2.0)
        self.assertAlmostEqual(split, table.log_integral(0.1, 2.0), delta=1e-13)
        below = table.log_integral(1e-9, 1e-8)
        self.assertAlmostEqual(below, math.log(10.0) / (2.0 * math.pi), delta=1e-12)
        np.testing.assert_allclose(
            table.log_integral(np.array([0.1, 0.2]), 2.0),
            [table.log_integral(0.1, 2.0), table.log_integral(0.2, 2.0)],
            rtol=1e-14,
        )

    def test_log_integral_domain(self) -> None:
        with self.assertRaises(DomainError):
            mixture_table().log_integral(0.0, 1.0)
        with self.assertRaises(DomainError):
            mixture_table().log_integral(2.0, 1.0)


class WindowedPotentialTests(unittest.TestCase):
    def test_full_hat_superposition_is_yukawa(self) -> None:
        for r in (0.3, 1.0, 2.5):
            window = ScaleWindow(1e-4, math.inf)
            with self.subTest(r=r):
                value = windowed_v(KernelKind.EUCLID_HAT, window, r)
                self.assertAlmostEqual(value / yukawa_v(r), 1.0, delta=1e-6)

    def test_hat_window_below_distance_is_zero(self) -> None:
        self.assertEqual(windowed_v(KernelKind.EUCLID_HAT, ScaleWindow(0.1, 0.5), 0.6), 0.0)
        self.assertEqual(windowed_v(KernelKind.EUCLID_HAT, ScaleWindow(0.5, 0.5), 0.0), 0.0)

    def test_hat_at_coincidence_is_the_density_integral(self) -> None:
        window = ScaleWindow(0.01, 1.0)
        value = windowed_v(KernelKind.EUCLID_HAT, window, 0.0)
        self.assertAlmostEqual(value, density_integral(KernelKind.EUCLID_HAT, 0.01, 1.0),
                               delta=1e-9)

    def test_standard_window_at_coincidence(self) -> None:
        value = windowed_v(KernelKind.STANDARD_BESSEL, ScaleWindow(0.01, 1.0), 0.0)
        self.assertAlmostEqual(value, math.log(100.0) / (2.0 * math.pi), delta=1e-10)
        self.assertAlmostEqual(
            density_integral(KernelKind.STANDARD_BESSEL, 0.01, 1.0), value, delta=1e-10
        )

    def test_windows_are_additive(self) -> None:
        for kind in KernelKind:
            whole = windowed_v(kind, ScaleWindow(0.01, 2.0), 0.2)
            parts = windowed_v(kind, ScaleWindow(0.01, 0.3), 0.2) + windowed_v(
                kind, ScaleWindow(0.3, 2.0), 0.2
            )
            with self.subTest(kind=kind):
                self.assertAlmostEqual(whole, parts, delta=1e-9)

    def test_standard_window_needs_finite_scale(self) -> None:
        with self.assertRaises(DomainError):
            windowed_v(KernelKind.STANDARD_BESSEL, ScaleWindow(0.01, math.inf), 0.5)

    def test_yukawa_domain(self) -> None:
        self.assertAlmostEqual(yukawa_v(1.0), special.k0(1.0) / (2.0 * math.pi), delta=1e-12)
        with self.assertRaises(DomainError):
            yukawa_v(0.0)


if __name__ == "__main__":
    unittest.main()

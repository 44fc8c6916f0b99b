import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from yukawa.constants import P_MAX_BRACKET, P_MAX_LOCATION, P_MAX_VALUE
from yukawa.errors import DomainError
from yukawa.specfun import (
    BRANCH_POINT,
    aux_integrals,
    bessel_k,
    bessel_k2,
    bessel_k_array,
    bessel_k_scaled,
    bessel_series_k,
    find_p_max,
    kk_bounds,
    lambert_w0,
    p_profile,
)

ARGUMENTS = (0.01, 0.1, 0.5, 1.0, 2.5, 7.0, 30.0, 200.0)


class BesselTests(unittest.TestCase):
    def test_k0_and_k1_match_reference(self) -> None:
        for x in ARGUMENTS:
            with self.subTest(x=x):
                self.assertAlmostEqual(bessel_k(0, x) / special.k0(x), 1.0, delta=1e-10)
                self.assertAlmostEqual(bessel_k(1, x) / special.k1(x), 1.0, delta=1e-10)

    def test_k2_recurrence(self) -> None:
        for x in (0.3, 1.0, 4.0):
            self.assertAlmostEqual(bessel_k2(x) / special.kn(2, x), 1.0, delta=1e-10)

    def test_ascending_series_agrees_with_quadrature(self) -> None:
        for x in (0.05, 0.4, 1.0, 2.0):
            for order in (0, 1):
                with self.subTest(x=x, order=order):
                    self.assertAlmostEqual(
                        bessel_series_k(order, x) / bessel_k(order, x), 1.0, delta=1e-11
                    )

    def test_series_is_limited_to_small_arguments(self) -> None:
        with self.assertRaises(DomainError):
            bessel_series_k(0, 3.0)

    def test_scaled_values_share_one_integral(self) -> None:
        xs = np.array([0.02, 0.7, 3.0, 50.0])
        np.testing.assert_allclose(bessel_k_scaled(0, xs), special.k0e(xs), rtol=1e-10)
        np.testing.assert_allclose(bessel_k_scaled(1, xs), special.k1e(xs), rtol=1e-10)

    def test_scaled_values_across_many_decades(self) -> None:
        for xs in ([1e-6, 1.0], [1e-9, 1.0], [1e-8, 1e-3, 0.5, 700.0]):
            with self.subTest(xs=xs):
                points = np.array(xs)
                np.testing.assert_allclose(
                    bessel_k_scaled(1, points), special.k1e(points), rtol=1e-10
                )
                np.testing.assert_allclose(
                    bessel_k_scaled(0, points), special.k0e(points), rtol=1e-10
                )

    def test_array_values_underflow_to_zero(self) -> None:
        values = bessel_k_array(1, np.array([1.0, 800.0]))
        self.assertAlmostEqual(values[0] / special.k1(1.0), 1.0, delta=1e-10)
        self.assertEqual(values[1], 0.0)
        self.assertEqual(bessel_k(0, 800.0), 0.0)

    def test_domain_errors(self) -> None:
        with self.assertRaises(DomainError):
            bessel_k(0, 0.0)
        with self.assertRaises(DomainError):
            bessel_k(2, 1.0)
        with self.assertRaises(DomainError):
            bessel_k_scaled(1, np.array([1.0, -1.0]))

    def test_exponential_envelopes(self) -> None:
        for x in np.geomspace(0.05, 10.0, 25):
            x = float(x)
            bounds = kk_bounds(x)
            k0, k1 = special.k0(x), special.k1(x)
            with self.subTest(x=x):
                self.assertLessEqual(bounds.k0_lower, k0)
                self.assertLessEqual(k0, bounds.k0_upper)
                self.assertLessEqual(bounds.ratio_lower, k1 / k0)
                self.assertLessEqual(k1 / k0, bounds.ratio_upper)


class LambertTests(unittest.TestCase):
    def test_principal_branch_matches_reference(self) -> None:
        for x in (-0.367, -0.3, -0.1, 1e-8, 0.5, 1.0, 10.0, 1e6):
            with self.subTest(x=x):
                expected = float(special.lambertw(x).real)
                self.assertAlmostEqual(lambert_w0(x), expected, delta=1e-12 * (1.0 + abs(expected)))

    def test_special_values(self) -> None:
        self.assertEqual(lambert_w0(0.0), 0.0)
        self.assertEqual(lambert_w0(BRANCH_POINT), -1.0)
        self.assertAlmostEqual(lambert_w0(1.0), 0.5671432904097838, delta=1e-15)

    def test_below_branch_point_is_rejected(self) -> None:
        with self.assertRaises(DomainError):
            lambert_w0(-0.4)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=-0.36, max_value=100.0))
    def test_inverse_relation(self, x: float) -> None:
        w = lambert_w0(x)
        self.assertAlmostEqual(w * math.exp(w), x, delta=1e-12 * (1.0 + abs(x)))


class ProfileTests(unittest.TestCase):
    def test_p_at_origin(self) -> None:
        self.assertEqual(p_profile(0.0), 1.0)

    def test_p_maximum_inside_bracket(self) -> None:
        location, value = find_p_max()
        lower, upper = P_MAX_BRACKET
        self.assertTrue(lower < location < upper)
        self.assertAlmostEqual(location, P_MAX_LOCATION, delta=1e-3)
        self.assertAlmostEqual(value, P_MAX_VALUE, delta=1e-3)
        self.assertGreater(value, p_profile(0.4))

    def test_auxiliary_closed_forms_verify(self) -> None:
        for s in (0.0, 0.5):
            with self.subTest(s=s):
                closed = aux_integrals(s, verify=True)
                self.assertAlmostEqual(closed.I, 0.5 * math.pi * math.exp(-s), delta=1e-15)

    def test_auxiliary_rejects_negative_scale(self) -> None:
        with self.assertRaises(DomainError):
            aux_integrals(-1.0)


if __name__ == "__main__":
    unittest.main()

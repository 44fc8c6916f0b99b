import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from yukawa.errors import DomainError, StepCheckFailed, SubdivisionLimit, TailNotDecaying
from yukawa.numerics import (
    OdeGridSpec,
    QuadratureSpec,
    RngStream,
    integrate_adaptive,
    integrate_semi_infinite,
    minimize_scalar,
    ode_solve,
    scale_grid,
)

TIGHT = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-12)
LOOSE = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10)


class QuadratureTests(unittest.TestCase):
    def test_sine_over_half_period(self) -> None:
        value = integrate_adaptive(math.sin, 0.0, math.pi, TIGHT)
        self.assertAlmostEqual(value, 2.0, delta=1e-12)

    def test_vectorized_and_scalar_integrands_agree(self) -> None:
        scalar = integrate_adaptive(lambda x: math.exp(-x * x), -1.0, 2.0, TIGHT)
        vector = integrate_adaptive(lambda x: np.exp(-x * x), -1.0, 2.0, TIGHT, vectorized=True)
        self.assertAlmostEqual(scalar, vector, delta=1e-13)

    def test_vector_valued_integrand_shares_panels(self) -> None:
        value = integrate_adaptive(
            lambda x: np.column_stack((x, x * x)), 0.0, 3.0, TIGHT, vectorized=True
        )
        np.testing.assert_allclose(value, [4.5, 9.0], rtol=1e-12)

    def test_components_of_very_different_size_each_converge(self) -> None:
        spec = QuadratureSpec(abs_tol=1e-20, rel_tol=1e-9)
        value = integrate_adaptive(
            lambda x: np.column_stack((1e8 * np.sqrt(x), 1e-6 * np.sin(60.0 * x))),
            0.0, 3.0, spec, vectorized=True,
        )
        expected = [1e8 * 2.0 * 3.0**1.5 / 3.0, 1e-6 * (1.0 - math.cos(180.0)) / 60.0]
        np.testing.assert_allclose(value, expected, rtol=1e-8)

    def test_empty_interval_is_zero(self) -> None:
        self.assertEqual(integrate_adaptive(math.exp, 1.5, 1.5), 0.0)

    def test_reversed_limits_are_rejected(self) -> None:
        with self.assertRaises(DomainError):
            integrate_adaptive(math.exp, 1.0, 0.0)

    def test_non_finite_integrand_is_rejected(self) -> None:
        with self.assertRaises(DomainError):
            integrate_adaptive(lambda x: math.nan, 0.0, 1.0)

    def test_budget_exhaustion_reports_estimate(self) -> None:
        spec = QuadratureSpec(abs_tol=1e-16, rel_tol=1e-15, max_subdivisions=1)
        with self.assertRaises(SubdivisionLimit) as caught:
            integrate_adaptive(math.sqrt, 0.0, 1.0, spec)
        self.assertAlmostEqual(caught.exception.estimate, 2.0 / 3.0, delta=1e-3)
        self.assertGreater(caught.exception.error, 0.0)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=0.1, max_value=4.0),
    )
    def test_linearity(self, alpha: float, beta: float, b: float) -> None:
        def f(x: float) -> float:
            return math.cos(3.0 * x)

        def g(x: float) -> float:
            return x**3 - x

        combined = integrate_adaptive(lambda x: alpha * f(x) + beta * g(x), 0.0, b, LOOSE)
        separate = alpha * integrate_adaptive(f, 0.0, b, LOOSE) + beta * integrate_adaptive(
            g, 0.0, b, LOOSE
        )
        self.assertAlmostEqual(combined, separate, delta=1e-8 * (1.0 + abs(separate)))

    def test_semi_infinite_exponential(self) -> None:
        value = integrate_semi_infinite(
            lambda x: np.exp(-x), 0.0, TIGHT, envelope=lambda x: math.exp(-x), vectorized=True
        )
        self.assertAlmostEqual(value, 1.0, delta=1e-12)

    def test_semi_infinite_needs_decaying_envelope(self) -> None:
        with self.assertRaises(TailNotDecaying):
            integrate_semi_infinite(lambda x: 1.0, 0.0, envelope=lambda x: 1.0, ceiling=1e3)


class MinimizeTests(unittest.TestCase):
    def test_parabola_minimum(self) -> None:
        x, fx = minimize_scalar(lambda x: (x - 0.3) ** 2 + 1.0, 0.0, 1.0, tol=1e-9)
        self.assertAlmostEqual(x, 0.3, delta=1e-6)
        self.assertAlmostEqual(fx, 1.0, delta=1e-12)

    def test_vectorized_objective(self) -> None:
        x, _ = minimize_scalar(lambda x: np.cos(x), 2.0, 4.0, vectorized=True)
        self.assertAlmostEqual(x, math.pi, delta=1e-6)

    def test_bad_bracket(self) -> None:
        with self.assertRaises(DomainError):
            minimize_scalar(lambda x: x, 1.0, 1.0)


class GridAndOdeTests(unittest.TestCase):
    def test_log_grid_spacing_and_breakpoints(self) -> None:
        grid = scale_grid(0.01, 1.0, 10, breakpoints=(0.0333, 5.0))
        self.assertEqual(grid[0], 0.01)
        self.assertEqual(grid[-1], 1.0)
        self.assertIn(0.0333, grid)
        self.assertTrue(np.all(np.diff(grid) > 0))
        self.assertEqual(grid.size, 22)

    def test_uniform_grid_from_zero(self) -> None:
        grid = scale_grid(0.0, 2.0, 5)
        np.testing.assert_allclose(np.diff(grid), 0.2)

    def test_power_law_solution(self) -> None:
        trajectory = ode_solve(lambda t, y: y / t, [1.0], 0.01, 1.0)
        self.assertAlmostEqual(float(trajectory.final[0]), 100.0, delta=1e-7)
        self.assertEqual(trajectory.y.shape, (trajectory.t.size, 1))

    def test_step_halving_check_passes_on_smooth_flow(self) -> None:
        trajectory = ode_solve(
            lambda t, y: -y / t, [1.0], 0.1, 10.0, OdeGridSpec(200, richardson_check=True)
        )
        self.assertAlmostEqual(float(trajectory.final[0]), 0.01, delta=1e-9)

    def test_step_halving_check_catches_coarse_grids(self) -> None:
        with self.assertRaises(StepCheckFailed) as caught:
            ode_solve(
                lambda t, y: np.cos(20.0 * t) * np.ones_like(y),
                [0.0],
                1.0,
                10.0,
                OdeGridSpec(2, richardson_check=True),
            )
        self.assertGreater(caught.exception.discrepancy, 1e-8)

    def test_refined_grid_doubles_steps(self) -> None:
        self.assertEqual(OdeGridSpec(100).refined().steps_per_decade, 200)


class RngStreamTests(unittest.TestCase):
    def test_streams_are_reproducible(self) -> None:
        first = RngStream(7, 3).generator().random(5)
        second = RngStream(7, 3).generator().random(5)
        np.testing.assert_array_equal(first, second)

    def test_indices_give_distinct_streams(self) -> None:
        first = RngStream(7, 0).generator().random(5)
        second = RngStream(7).child(1).generator().random(5)
        self.assertFalse(np.array_equal(first, second))

    def test_child_matches_explicit_index(self) -> None:
        np.testing.assert_array_equal(
            RngStream(11).child(4).generator().random(3),
            RngStream(11, 4).generator().random(3),
        )

    def test_seed_must_be_unsigned(self) -> None:
        with self.assertRaises(ValueError):
            RngStream(-1)

    def test_quadrature_spec_validation(self) -> None:
        with self.assertRaises(ValueError):
            QuadratureSpec(abs_tol=0.0)
        with self.assertRaises(ValueError):
            OdeGridSpec(1)


if __name__ == "__main__":
    unittest.main()

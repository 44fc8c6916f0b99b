"""Cauchy majorants of the Mayer series: coefficient flows, tau_k, Lambert-W bounds, thresholds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from yukawa.constants import DEFAULT_TRUNCATION_ORDER
from yukawa.errors import ConvergenceDomain, DomainError, FitDegenerate, ThresholdExceeded
from yukawa.models import KernelKind, ScaleWindow
from yukawa.numerics import (
    DEFAULT_GRID,
    OdeGridSpec,
    QuadratureSpec,
    integrate_adaptive,
    ode_solve,
)
from yukawa.potentials import mixture_table, windowed_v
from yukawa.specfun import lambert_w0

logger = logging.getLogger(__name__)

TAU_QUADRATURE = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10)
DEFAULT_DELTAS = tuple(float(d) for d in np.geomspace(1e-2, 1e-6, 9))
_BRANCH_TOLERANCE = 1e-12

Profile = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class Variant(str, Enum):
    """Linear coefficient of the coefficient flow: n B, the Lagrange form or (n - 1) B."""

    PLAIN = "plain"
    LAGRANGE = "lagrange"
    IMPROVED = "improved"


class ThresholdLadder:
    """Thresholds beta_j = 8 pi (1 - 1/j); a neutral 2r-cluster collapses at beta_{2r}."""

    @staticmethod
    def beta(index: int) -> float:
        if index < 2:
            raise DomainError(f"threshold index must be >= 2, got {index}")
        return 8.0 * math.pi * (1.0 - 1.0 / index)

    @classmethod
    def lagrange_threshold(cls, k: int) -> float:
        """beta_{k+1} = 8 pi k / (k + 1), the limit of the order-k majorant."""
        return cls.beta(k + 1)

    @classmethod
    def collapse_threshold(cls, r: int) -> float:
        return cls.beta(2 * r)

    @classmethod
    def interval(cls, n: int) -> tuple[float, float]:
        return cls.beta(2 * n), cls.beta(2 * (n + 1))

    @classmethod
    def order_for(cls, beta: float) -> int:
        """Smallest k with beta < beta_{k+1}."""
        if not 0 < beta < 8.0 * math.pi:
            raise ThresholdExceeded(f"no finite order covers beta={beta}")
        k = 1
        while beta >= cls.lagrange_threshold(k):
            k += 1
        return k


@dataclass(frozen=True)
class MajorantParams:
    beta: float
    k: int
    window: ScaleWindow
    variant: Variant = Variant.PLAIN
    n_terms: int = DEFAULT_TRUNCATION_ORDER

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.n_terms < 2:
            raise ValueError(f"n_terms must be >= 2, got {self.n_terms}")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def exponent_factor(self) -> float:
        return (self.k + 1) / self.k


@dataclass(frozen=True, eq=False)
class CoefficientTrajectory:
    """C_n(t) for n = 1..N (rows) on the scale grid (columns)."""

    t_grid: np.ndarray
    C: np.ndarray = field(repr=False)
    variant: Variant | None = None

    @property
    def n_terms(self) -> int:
        return self.C.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.C[:, -1]

    def rows(self) -> list[dict[str, float]]:
        result = []
        for index, t in enumerate(self.t_grid):
            row: dict[str, float] = {"t": float(t)}
            for n in range(1, self.n_terms + 1):
                row[f"C{n}"] = float(self.C[n - 1, index])
            result.append(row)
        return result


@dataclass(frozen=True)
class CollapseFit:
    beta: float
    r: int
    fitted_exponent: float
    predicted_exponent: float
    exact_exponent: float | None = None
    deltas: tuple[float, ...] = ()
    log_c: tuple[float, ...] = ()

    def to_row(self) -> dict[str, float | int | str]:
        return {
            "beta": self.beta,
            "r": self.r,
            "fitted_exponent": self.fitted_exponent,
            "predicted_exponent": self.predicted_exponent,
            "exact_exponent": "" if self.exact_exponent is None else self.exact_exponent,
        }


def gamma_b(
    beta: float, t: float | np.ndarray, kind: KernelKind = KernelKind.EUCLID_HAT
) -> tuple[float | np.ndarray, float | np.ndarray]:
    """(Gamma, B) at scale t.

    Euclid's hat: Gamma = (beta pi / 4) t^2 g(t) and B = (beta / 2) g(t).
    Standard decomposition: B = beta / (4 pi t) and Gamma = 2 beta t.
    """
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    scales = np.asarray(t, dtype=float)
    if np.any(~(scales > 0)):
        raise DomainError("gamma_b needs t > 0")
    if kind is KernelKind.STANDARD_BESSEL:
        gamma, b = 2.0 * beta * scales, beta / (4.0 * math.pi * scales)
    else:
        g = mixture_table().g(scales)
        gamma, b = 0.25 * beta * math.pi * scales * scales * g, 0.5 * beta * g
    if gamma.ndim == 0:
        return float(gamma), float(b)
    return gamma, b


def _b_integral(beta: float, a: np.ndarray | float, b: np.ndarray | float):
    return 0.5 * beta * mixture_table().log_integral(a, b)


def tau_k(
    beta: float, k: int, window: ScaleWindow, spec: QuadratureSpec = TAU_QUADRATURE
) -> float:
    """int_{t0}^{t1} Gamma(s) exp(((k+1)/k) int_s^{t1} B) ds for Euclid's hat.

    Integrated in ln s; the inner integral comes from the memo table's
    antiderivative of g. ``t1`` may be infinite.
    """
    if not beta > 0 or k < 1:
        raise DomainError("tau_k needs beta > 0 and k >= 1")
    if window.empty:
        return 0.0
    table = mixture_table()
    upper = min(window.t1, table.s_max)
    if window.t0 >= upper:
        return 0.0
    factor = (k + 1) / k

    def integrand(log_s: np.ndarray) -> np.ndarray:
        s = np.exp(log_s)
        gamma, _ = gamma_b(beta, s)
        return s * gamma * np.exp(factor * _b_integral(beta, s, window.t1))

    return integrate_adaptive(
        integrand, math.log(window.t0), math.log(upper), spec, vectorized=True
    )


def tau_k_leading_term(beta: float, k: int) -> float:
    """(beta/16) e^{2x/5} (1/(1 - x) + (1/5)/(2 - x)) with x = beta / beta_{k+1}."""
    threshold = ThresholdLadder.lagrange_threshold(k)
    if beta >= threshold:
        raise ThresholdExceeded(f"beta={beta} is not below beta_{k + 1}={threshold}")
    x = beta / threshold
    return beta / 16.0 * math.exp(0.4 * x) * (1.0 / (1.0 - x) + 0.2 / (2.0 - x))


def tau_k_limit_bound(beta: float, k: int) -> float:
    """Bound on lim_{t0 -> 0} tau_k(t0, inf) from the split at s = 1."""
    leading = tau_k_leading_term(beta, k)
    table = mixture_table()
    carry = math.exp((k + 1) / k * _b_integral(beta, 1.0, table.s_max))
    return leading * carry + tau_k(beta, k, ScaleWindow(1.0, math.inf))


def taut0_bound(beta: float) -> float:
    """(beta pi / 4) e^{beta / 10 pi} (1/(4 pi - beta) + (1/5)/(6 pi - beta)) for beta < 4 pi."""
    if not 0 < beta < 4.0 * math.pi:
        raise ThresholdExceeded(f"taut0_bound needs 0 < beta < 4 pi, got {beta}")
    return (
        0.25 * beta * math.pi * math.exp(beta / (10.0 * math.pi))
        * (1.0 / (4.0 * math.pi - beta) + 0.2 / (6.0 * math.pi - beta))
    )


def tau_split(beta: float, k: int, t0: float) -> tuple[float, float]:
    """tau_k(t0, inf) directly and as tau_k(t0, 1) exp(((k+1)/k) int_1^inf B) + tau_k(1, inf)."""
    if not 0 < t0 < 1:
        raise DomainError(f"tau_split needs 0 < t0 < 1, got {t0}")
    whole = tau_k(beta, k, ScaleWindow(t0, math.inf))
    carry = math.exp((k + 1) / k * _b_integral(beta, 1.0, mixture_table().s_max))
    inner = tau_k(beta, k, ScaleWindow(t0, 1.0))
    split = inner * carry + tau_k(beta, k, ScaleWindow(1.0, math.inf))
    return whole, split


def theta_bound(z: float, tau: float) -> float:
    """-W(-tau z) / (tau z), the closed majorant of Theta; 1 at z = 0 and e on the boundary."""
    if z < 0 or tau < 0:
        raise DomainError(f"theta_bound needs z >= 0 and tau >= 0, got z={z}, tau={tau}")
    x = z * tau
    if x == 0.0:
        return 1.0
    if math.e * x > 1.0 + _BRANCH_TOLERANCE:
        raise ConvergenceDomain(f"e z tau = {math.e * x!r} exceeds 1")
    if math.e * x >= 1.0 - _BRANCH_TOLERANCE:
        return math.e
    return -lambert_w0(-x) / x


def majorant_coefficients(tau: float, n_terms: int) -> np.ndarray:
    """n^{n-1} tau^{n-1} / n! for n = 1..N, the Taylor coefficients of theta_bound in z."""
    if tau < 0 or n_terms < 1:
        raise DomainError("majorant_coefficients needs tau >= 0 and n_terms >= 1")
    n = np.arange(1, n_terms + 1, dtype=float)
    if tau == 0.0:
        return (n == 1).astype(float)
    return np.exp((n - 1.0) * np.log(n * tau) - np.array([math.lgamma(v + 1.0) for v in n]))


def radius_estimate(
    beta: float, k: int, window: ScaleWindow, spec: QuadratureSpec = TAU_QUADRATURE
) -> float:
    """1 / (e tau_k): a lower bound on the convergence radius of the Mayer series."""
    threshold = ThresholdLadder.lagrange_threshold(k)
    if beta >= threshold:
        raise ThresholdExceeded(f"beta={beta} is not below beta_{k + 1}={threshold}")
    tau = tau_k(beta, k, window, spec)
    return math.inf if tau == 0.0 else 1.0 / (math.e * tau)


def literature_radius(beta: float) -> float:
    """(4 pi - beta) / (4 pi e beta); nan from beta = 4 pi on, where it no longer applies."""
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if beta >= 4.0 * math.pi:
        return math.nan
    return (4.0 * math.pi - beta) / (4.0 * math.pi * math.e * beta)


def linear_coefficients(variant: Variant, k: int, n_terms: int) -> np.ndarray:
    """a_n with C_n' = a_n B C_n + (n Gamma / 2) sum C_j C_{n-j}; entry 0 belongs to C_1."""
    n = np.arange(1, n_terms + 1, dtype=float)
    variant = Variant(variant)
    if variant is Variant.PLAIN:
        coefficients = n.copy()
    elif variant is Variant.IMPROVED:
        coefficients = n - 1.0
    else:
        coefficients = np.where(n <= k, (k + 1) / k * (n - 1.0), n)
    coefficients[0] = 0.0
    return coefficients


def _convolution(c: np.ndarray) -> np.ndarray:
    # sum_{j=1}^{n-1} C_j C_{n-j} for n = 2..N
    return np.convolve(c, c)[: c.size - 1]


def _euclid_profile(beta: float) -> Profile:
    def profile(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return gamma_b(beta, t)

    return profile


def integrate_coefficients(
    linear: np.ndarray,
    profile: Profile,
    t0: float,
    t1: float,
    grid: OdeGridSpec = DEFAULT_GRID,
    variant: Variant | None = None,
) -> CoefficientTrajectory:
    """Integrate C_n' = a_n B C_n + (n Gamma / 2) sum C_j C_{n-j} from C = (1, 0, ..., 0)."""
    linear = np.asarray(linear, dtype=float)
    n_terms = linear.size
    half_n = 0.5 * np.arange(2, n_terms + 1)

    def rhs(t: float, c: np.ndarray) -> np.ndarray:
        gamma, b = profile(np.array(t))
        derivative = linear * float(b) * c
        derivative[1:] += float(gamma) * half_n * _convolution(c)
        derivative[0] = 0.0
        return derivative

    start = np.zeros(n_terms)
    start[0] = 1.0
    trajectory = ode_solve(rhs, start, t0, t1, grid)
    return CoefficientTrajectory(t_grid=trajectory.t, C=trajectory.y.T.copy(), variant=variant)


def cn_system(
    params: MajorantParams, grid: OdeGridSpec = DEFAULT_GRID, profile: Profile | None = None
) -> CoefficientTrajectory:
    """Coefficient flow of the selected variant on a finite window.

    ``profile`` overrides the Euclid's-hat (Gamma, B) pair, e.g. with constants
    for closed-form checks.
    """
    if not params.window.finite:
        raise DomainError("the coefficient flow runs on a finite window")
    linear = linear_coefficients(params.variant, params.k, params.n_terms)
    trajectory = integrate_coefficients(
        linear,
        profile or _euclid_profile(params.beta),
        params.window.t0,
        params.window.t1,
        grid,
        variant=params.variant,
    )
    logger.debug(
        "%s coefficient flow beta=%g k=%d on [%g, %g]: C_N(t1)=%.6e",
        params.variant.value, params.beta, params.k, params.window.t0, params.window.t1,
        trajectory.C[-1, -1],
    )
    return trajectory


def integrating_factor(params: MajorantParams, t: np.ndarray | float) -> np.ndarray:
    """f_k(t) = exp(((k+1)/k) int_{t0}^t B)."""
    return np.exp(params.exponent_factor * _b_integral(params.beta, params.window.t0, t))


def scaled_cn_system(
    params: MajorantParams, grid: OdeGridSpec = DEFAULT_GRID
) -> CoefficientTrajectory:
    """C_n^(k) = C_n / f_k^{n-1}, integrated in its own right.

    The linear coefficient drops by ((k+1)/k)(n-1) B and the quadratic term
    picks up 1/f_k.
    """
    if not params.window.finite:
        raise DomainError("the coefficient flow runs on a finite window")
    n_terms = params.n_terms
    n = np.arange(1, n_terms + 1, dtype=float)
    linear = linear_coefficients(params.variant, params.k, n_terms)
    shifted = linear - params.exponent_factor * (n - 1.0)
    half_n = 0.5 * n[1:]
    profile = _euclid_profile(params.beta)

    def rhs(t: float, c: np.ndarray) -> np.ndarray:
        gamma, b = profile(np.array(t))
        derivative = shifted * float(b) * c
        weight = float(gamma) / float(integrating_factor(params, t))
        derivative[1:] += weight * half_n * _convolution(c)
        derivative[0] = 0.0
        return derivative

    start = np.zeros(n_terms)
    start[0] = 1.0
    trajectory = ode_solve(rhs, start, params.window.t0, params.window.t1, grid)
    return CoefficientTrajectory(
        t_grid=trajectory.t, C=trajectory.y.T.copy(), variant=params.variant
    )


def theta_series(trajectory: CoefficientTrajectory, z: float) -> np.ndarray:
    """Theta(t, z) = sum_n C_n(t) z^{n-1} along the grid."""
    powers = z ** np.arange(trajectory.n_terms)
    return powers @ trajectory.C


def theta_pde_residual(
    trajectory: CoefficientTrajectory, params: MajorantParams, z: float
) -> float:
    """Largest relative gap between d Theta / d ln t and t times the series right-hand side.

    The right-hand side is (Gamma / 2) (z^2 Theta^2)_z + B sum_n a_n C_n z^{n-1}, truncated
    at degree N - 1; for the plain flow the linear part is B ((z Theta)_z - 1).
    The time derivative is a second-order finite difference at interior nodes.
    """
    t = trajectory.t_grid
    c = trajectory.C
    n_terms = trajectory.n_terms
    powers = z ** np.arange(n_terms)
    linear = linear_coefficients(params.variant, params.k, n_terms)
    gamma, b = gamma_b(params.beta, t)
    squares = np.array([_convolution(c[:, j]) for j in range(t.size)]).T
    weights = 0.5 * np.arange(2, n_terms + 1) * powers[1:]
    quadratic = (weights[:, None] * squares).sum(axis=0)
    linear_part = ((linear[:, None] * c) * powers[:, None]).sum(axis=0)
    rhs = t * (gamma * quadratic + b * linear_part)
    lhs = np.gradient(theta_series(trajectory, z), np.log(t), edge_order=2)
    interior = slice(1, t.size - 1)
    scale = np.maximum(np.abs(rhs[interior]), np.finfo(float).tiny)
    return float(np.max(np.abs(lhs[interior] - rhs[interior]) / scale))


def improved_integral_residual(
    trajectory: CoefficientTrajectory, params: MajorantParams
) -> float:
    """Largest relative gap in C_n(t) = (n/2) int e^{(n-1) gamma(s,t)} Gamma(s) sum C_j C_{n-j} ds.

    ``gamma(s, t) = int_s^t B``; the integral runs over the trajectory grid in ln s.
    """
    t = trajectory.t_grid
    c = trajectory.C
    end = t[-1]
    gamma_profile, _ = gamma_b(params.beta, t)
    decay = _b_integral(params.beta, t, end)
    squares = np.array([_convolution(c[:, j]) for j in range(t.size)]).T
    worst = 0.0
    for n in range(2, trajectory.n_terms + 1):
        integrand = np.exp((n - 1) * decay) * gamma_profile * squares[n - 2] * t
        value = 0.5 * n * simpson(integrand, x=np.log(t))
        target = c[n - 1, -1]
        worst = max(worst, abs(value - target) / max(abs(target), np.finfo(float).tiny))
    return worst


def _fit_slope(deltas: Sequence[float], log_c: np.ndarray) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(deltas)), log_c, 1)
    return float(slope)


def _exact_pair_log_c(beta: float, delta: float) -> float:
    # C(delta) = 2 pi delta^2 int_0^1 u exp(beta v_(delta, 1)(delta u)) du for one opposite pair
    window = ScaleWindow(delta, 1.0)

    def integrand(u: np.ndarray) -> np.ndarray:
        potentials = np.array(
            [windowed_v(KernelKind.EUCLID_HAT, window, delta * float(x)) for x in u]
        )
        return u * np.exp(beta * potentials)

    value = integrate_adaptive(integrand, 0.0, 1.0, TAU_QUADRATURE, vectorized=True)
    return math.log(2.0 * math.pi * delta * delta * value)


def collapse_scan(
    beta: float, r: int, deltas: Sequence[float] = DEFAULT_DELTAS
) -> CollapseFit:
    """Slope of log C(delta) against log delta for a neutral 2r-cluster.

    C(delta) = delta^{2(2r-1)} exp(beta (r^2 - r(r-1)) int_delta^1 g) is the
    entropy-energy balance; for r = 1 the pair integral is also evaluated
    exactly. The predicted exponent is 2(2r-1) - beta r / (2 pi).
    """
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    deltas = tuple(float(d) for d in deltas)
    if len(deltas) < 3:
        raise FitDegenerate(f"a slope fit needs at least 3 deltas, got {len(deltas)}")
    if any(not 0 < d < 1 for d in deltas):
        raise DomainError("deltas must lie in (0, 1)")
    if any(later >= earlier for earlier, later in zip(deltas, deltas[1:])):
        raise DomainError("deltas must be strictly decreasing")
    table = mixture_table()
    logs = np.log(np.array(deltas))
    energy = beta * (r * r - r * (r - 1)) * np.array([table.log_integral(d, 1.0) for d in deltas])
    log_c = 2.0 * (2 * r - 1) * logs + energy
    exact = None
    if r == 1:
        exact = _fit_slope(deltas, np.array([_exact_pair_log_c(beta, d) for d in deltas]))
    fit = CollapseFit(
        beta=beta,
        r=r,
        fitted_exponent=_fit_slope(deltas, log_c),
        predicted_exponent=2.0 * (2 * r - 1) - beta * r / (2.0 * math.pi),
        exact_exponent=exact,
        deltas=deltas,
        log_c=tuple(float(v) for v in log_c),
    )
    logger.info(
        "collapse r=%d beta=%g: fitted %.4f, predicted %.4f",
        r, beta, fit.fitted_exponent, fit.predicted_exponent,
    )
    return fit

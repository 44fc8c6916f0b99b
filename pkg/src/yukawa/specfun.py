"""Modified Bessel functions K0/K1, the principal Lambert W branch and related integrals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from yukawa.constants import BESSEL_UNDERFLOW, EULER_GAMMA, P_MAX_BRACKET
from yukawa.errors import BracketViolation, DomainError, VerificationMismatch
from yukawa.numerics import (
    QuadratureSpec,
    integrate_adaptive,
    integrate_semi_infinite,
    minimize_scalar,
)

logger = logging.getLogger(__name__)

BESSEL_QUADRATURE = QuadratureSpec(abs_tol=1e-15, rel_tol=1e-12, max_subdivisions=500)
VERIFY_QUADRATURE = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10)
AUX_VERIFY_TOLERANCE = 1e-7
BRANCH_POINT = -math.exp(-1.0)
_SERIES_LIMIT = 2.0


class BesselOrder(IntEnum):
    ZERO = 0
    ONE = 1


@dataclass(frozen=True)
class AuxIntegrals:
    I: float  # noqa: E741
    J: float
    L: float


@dataclass(frozen=True)
class KKBounds:
    """Exponential envelopes of K0 and of the ratio K1/K0 at one argument."""

    k0_lower: float
    k0_upper: float
    ratio_lower: float
    ratio_upper: float


def _order(order: int) -> BesselOrder:
    try:
        return BesselOrder(order)
    except ValueError as exc:
        raise DomainError(f"only Bessel orders 0 and 1 are available, got {order}") from exc


def bessel_k(order: int, x: float, spec: QuadratureSpec = BESSEL_QUADRATURE) -> float:
    """K0 or K1 from the integral representation over k = sinh(u).

    ``e^x K_nu(x) = int_0^inf exp(-x (cosh u - 1)) cosh(nu u) du``; the scaled
    integrand is of order one, so the absolute tail cut acts as a relative one.
    """
    nu = _order(order)
    if not x > 0:
        raise DomainError(f"K_{int(nu)}(x) needs x > 0, got {x}")
    if x > BESSEL_UNDERFLOW:
        return 0.0

    if nu is BesselOrder.ZERO:
        def integrand(u: np.ndarray) -> np.ndarray:
            return np.exp(-x * (np.cosh(u) - 1.0))
    else:
        def integrand(u: np.ndarray) -> np.ndarray:
            return np.exp(-x * (np.cosh(u) - 1.0)) * np.cosh(u)

    def envelope(u: float) -> float:
        return math.exp(-x * (math.cosh(u) - 1.0) + int(nu) * u)

    scaled = integrate_semi_infinite(integrand, 0.0, spec, envelope=envelope, vectorized=True)
    return math.exp(-x) * scaled


def bessel_k_scaled(
    order: int, xs: np.ndarray, spec: QuadratureSpec = BESSEL_QUADRATURE
) -> np.ndarray:
    """``e^x K_nu(x)`` for every entry of ``xs``, sharing one adaptive integral.

    The scaled values stay of order one for large arguments, which is what the
    memo tables interpolate.
    """
    nu = _order(order)
    values = np.asarray(xs, dtype=float)
    flat = values.reshape(-1)
    if flat.size == 0:
        return np.zeros(values.shape)
    if not np.all(flat > 0):
        raise DomainError(f"K_{int(nu)} needs positive arguments, got min {flat.min()}")
    smallest = float(flat.min())

    def integrand(u: np.ndarray) -> np.ndarray:
        weights = np.exp(-np.outer(np.cosh(u) - 1.0, flat))
        if nu is BesselOrder.ONE:
            weights *= np.cosh(u)[:, None]
        return weights

    def envelope(u: float) -> float:
        return math.exp(-smallest * (math.cosh(u) - 1.0) + int(nu) * u)

    scaled = integrate_semi_infinite(integrand, 0.0, spec, envelope=envelope, vectorized=True)
    return np.asarray(scaled, dtype=float).reshape(values.shape)


def bessel_k_array(order: int, xs: np.ndarray) -> np.ndarray:
    """K0 or K1 on an array; zero beneath underflow."""
    values = np.asarray(xs, dtype=float)
    result = np.zeros(values.shape)
    live = values <= BESSEL_UNDERFLOW
    if np.any(live):
        result[live] = np.exp(-values[live]) * bessel_k_scaled(order, values[live])
    return result


def bessel_k2(x: float) -> float:
    """K2 through the recurrence K2 = K0 + 2 K1 / x."""
    return bessel_k(0, x) + 2.0 * bessel_k(1, x) / x


def bessel_series_k(order: int, x: float, terms: int = 40) -> float:
    """Ascending-series K0/K1, accurate for 0 < x <= 2."""
    nu = _order(order)
    if not 0 < x <= _SERIES_LIMIT:
        raise DomainError(f"ascending series is used only on (0, {_SERIES_LIMIT}], got {x}")
    quarter = 0.25 * x * x
    log_half = math.log(0.5 * x)
    if nu is BesselOrder.ZERO:
        term, harmonic = 1.0, 0.0
        total = -(log_half + EULER_GAMMA) * term
        for n in range(1, terms):
            term *= quarter / (n * n)
            harmonic += 1.0 / n
            total += term * (harmonic - log_half - EULER_GAMMA)
        return total
    # K1 = 1/x + ln(x/2) I1(x) - (x/4) sum (psi(k+1) + psi(k+2)) (x^2/4)^k / (k! (k+1)!)
    term = 1.0
    harmonic_k, harmonic_k1 = 0.0, 1.0
    bessel_i1 = 0.0
    correction = 0.0
    for k in range(terms):
        if k > 0:
            term *= quarter / (k * (k + 1))
            harmonic_k += 1.0 / k
            harmonic_k1 += 1.0 / (k + 1)
        bessel_i1 += 0.5 * x * term
        correction += (harmonic_k + harmonic_k1 - 2.0 * EULER_GAMMA) * term
    return 1.0 / x + log_half * bessel_i1 - 0.25 * x * correction


def kk_bounds(x: float) -> KKBounds:
    if not x > 0:
        raise DomainError(f"bounds need x > 0, got {x}")
    root_pi_decay = math.sqrt(math.pi) * math.exp(-x)
    return KKBounds(
        k0_lower=root_pi_decay / math.sqrt(2.0 * x + 0.5),
        k0_upper=root_pi_decay / math.sqrt(2.0 * x),
        ratio_lower=1.0 + 1.0 / (2.0 * x + 0.5),
        ratio_upper=1.0 + 1.0 / (2.0 * x),
    )


def bessel_envelope(order: int, y: float) -> float:
    """Upper bound of K0 or K1 at ``y`` from the exponential envelopes."""
    bounds = kk_bounds(y)
    if _order(order) is BesselOrder.ZERO:
        return bounds.k0_upper
    return bounds.k0_upper * bounds.ratio_upper


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function by bracketed Halley iteration."""
    if math.isnan(x) or x < BRANCH_POINT - 4.0 * np.finfo(float).eps:
        raise DomainError(f"W0 is real only for x >= -1/e, got {x}")
    if x <= BRANCH_POINT + 4.0 * np.finfo(float).eps:
        return -1.0
    if x == 0.0:
        return 0.0
    if x < 0.0:
        lo, hi = -1.0, 0.0
    else:
        lo, hi = 0.0, (x if x < math.e else math.log(x))
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    elif x < 3.0:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    w = min(max(w, lo), hi)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if f > 0:
            hi = w
        else:
            lo = w
        derivative = ew * (w + 1.0)
        if derivative == 0.0:
            candidate = 0.5 * (lo + hi)
        else:
            candidate = w - f / (derivative - (w + 2.0) * f / (2.0 * w + 2.0))
        if not lo <= candidate <= hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - w) <= 1e-15 * (1.0 + abs(candidate)):
            return candidate
        w = candidate
    return w


def aux_integrals(
    s: float, verify: bool = False, spec: QuadratureSpec = VERIFY_QUADRATURE
) -> AuxIntegrals:
    """Closed forms of I, J and L; ``verify`` re-derives them by quadrature."""
    if not s >= 0:
        raise DomainError(f"aux_integrals needs s >= 0, got {s}")
    decay = math.exp(-s)
    closed = AuxIntegrals(
        I=0.5 * math.pi * decay,
        J=0.5 * math.pi * (1.0 + s) * decay,
        L=0.25 * math.pi * (3.0 + 3.0 * s + s * s) * decay,
    )
    if not verify:
        return closed
    computed = _aux_by_quadrature(s, spec)
    for name in ("I", "J", "L"):
        expected, actual = getattr(closed, name), getattr(computed, name)
        if abs(expected - actual) > AUX_VERIFY_TOLERANCE * max(1.0, abs(expected)):
            raise VerificationMismatch(
                f"{name}({s}) closed form {expected!r} disagrees with quadrature {actual!r}"
            )
    logger.debug("aux integrals verified at s=%g", s)
    return closed


def _aux_by_quadrature(s: float, spec: QuadratureSpec) -> AuxIntegrals:
    if s == 0.0:
        return AuxIntegrals(
            I=_integrate_y(lambda y: y * bessel_k(1, y), 1, 1, spec),
            J=_integrate_y(lambda y: y * y * bessel_k(0, y), 0, 2, spec),
            L=0.5 * _integrate_y(lambda y: y**3 * bessel_k(1, y), 1, 3, spec),
        )

    # y = s sqrt(z^2 + 1) removes the square-root singularity at y = s.
    def y_of(z: float) -> float:
        return s * math.sqrt(z * z + 1.0)

    def i_integrand(z: float) -> float:
        return bessel_k(1, y_of(z)) * z * z / math.sqrt(z * z + 1.0)

    def j_integrand(z: float) -> float:
        return bessel_k(0, y_of(z)) * z * z

    def l_integrand(z: float) -> float:
        return bessel_k(1, y_of(z)) * z * z * math.sqrt(z * z + 1.0)

    def envelope(power: float, order: int):
        return lambda z: (1.0 + z) ** power * bessel_envelope(order, y_of(z))

    return AuxIntegrals(
        I=s * s * integrate_semi_infinite(i_integrand, 0.0, spec, envelope=envelope(2, 1)),
        J=s**3 * integrate_semi_infinite(j_integrand, 0.0, spec, envelope=envelope(2, 0)),
        L=0.5 * s**4 * integrate_semi_infinite(l_integrand, 0.0, spec, envelope=envelope(3, 1)),
    )


def _integrate_y(f, order: int, power: int, spec: QuadratureSpec) -> float:
    head = integrate_adaptive(f, 0.0, 1.0, spec)
    tail = integrate_semi_infinite(
        f, 1.0, spec, envelope=lambda y: y**power * bessel_envelope(order, y)
    )
    return head + tail


def p_profile(x: float) -> float:
    """p(x) = x K1(x) + x^2 K0(x), with p(0) = 1."""
    if x == 0.0:
        return 1.0
    return x * bessel_k(1, x) + x * x * bessel_k(0, x)


def find_p_max() -> tuple[float, float]:
    """Maximum of p on [0.1, 2]; the maximiser must stay inside its proven bracket."""
    x0, neg_pmax = minimize_scalar(lambda x: -p_profile(x), 0.1, 2.0, tol=1e-7)
    lower, upper = P_MAX_BRACKET
    if not lower < x0 < upper:
        raise BracketViolation(f"p(x) maximiser {x0} left the bracket ({lower}, {upper})")
    return x0, -neg_pmax

"""Euclid's hat, the standard kernel wK1(w), the mixture density m(s) and windowed potentials."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from yukawa.constants import (
    BESSEL_UNDERFLOW,
    EULER_GAMMA,
    KERNEL_POINTS_PER_DECADE,
    KERNEL_W_MAX,
    KERNEL_W_MIN,
    M_NEAR_ORIGIN_COEFF,
    MIXTURE_POINTS_PER_DECADE,
    MIXTURE_S_MAX,
    MIXTURE_S_MIN,
    P_MAX_BRACKET,
)
from yukawa.errors import DomainError, VerificationMismatch
from yukawa.models import KernelKind, ScaleWindow
from yukawa.numerics import (
    QuadratureSpec,
    integrate_adaptive,
    integrate_semi_infinite,
    minimize_scalar,
)
from yukawa.specfun import bessel_envelope, bessel_k, bessel_k_array, bessel_k_scaled

logger = logging.getLogger(__name__)

MIXTURE_QUADRATURE = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-11)
WINDOW_QUADRATURE = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10)
RAW_VERIFY_TOLERANCE = 1e-8
_TABLE_CHUNK = 32
_LEGENDRE_X, _LEGENDRE_W = np.polynomial.legendre.leggauss(8)
_TWO_PI = 2.0 * math.pi

ArrayFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MBounds:
    """Envelopes of m(s): two-sided exponential bounds and two upper bounds near 0."""

    lower: float
    upper: float
    near_origin: float
    mh: float


def euclid_hat(w: float) -> float:
    if w < 0:
        raise DomainError(f"euclid_hat needs w >= 0, got {w}")
    if w == 0.0:
        return 1.0
    if w >= 1.0:
        return 0.0
    return (2.0 / math.pi) * (math.acos(w) - w * math.sqrt(1.0 - w * w))


def euclid_hat_array(w: np.ndarray) -> np.ndarray:
    """Vectorized Euclid's hat; arguments are assumed nonnegative."""
    clipped = np.minimum(np.asarray(w, dtype=float), 1.0)
    return (2.0 / math.pi) * (np.arccos(clipped) - clipped * np.sqrt(1.0 - clipped * clipped))


def standard_kernel(w: float) -> float:
    """h~(w) = w K1(w), with the limit value 1 at w = 0."""
    if w < 0:
        raise DomainError(f"standard_kernel needs w >= 0, got {w}")
    if w == 0.0:
        return 1.0
    return w * bessel_k(1, w)


def kernel_inflection_point(iterations: int = 80) -> float:
    """Zero of w K1(w) - K0(w), where h~ changes concavity."""
    lo, hi = P_MAX_BRACKET

    def excess(w: float) -> float:
        return w * bessel_k(1, w) - bessel_k(0, w)

    f_lo = excess(lo)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def _scaled_mixture_integral(s: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    # e^s m(s) = (s^3/2) int_0^inf cosh(u)^3 e^{-s (cosh u - 1)} e^y K1(y) du, y = s cosh u
    prefactor = 0.5 * s**3

    def integrand(u: np.ndarray) -> np.ndarray:
        c = np.cosh(u)[:, None]
        exponent = s[None, :] * (c - 1.0)
        weights = prefactor[None, :] * c**3 * np.exp(-exponent)
        values = np.zeros(weights.shape)
        live = exponent < BESSEL_UNDERFLOW
        if np.any(live):
            y = (s[None, :] * c)[live]
            values[live] = weights[live] * bessel_k_scaled(1, y)
        return values

    def envelope(u: float) -> float:
        c = math.cosh(u)
        y = s * c
        bound = (
            prefactor * c**3 * np.exp(-s * (c - 1.0))
            * np.sqrt(math.pi / (2.0 * y)) * (1.0 + 0.5 / y)
        )
        return float(np.max(bound))

    return np.asarray(
        integrate_semi_infinite(integrand, 0.0, spec, envelope=envelope, vectorized=True),
        dtype=float,
    ).reshape(s.shape)


def mixture_m_scaled(s: np.ndarray, spec: QuadratureSpec = MIXTURE_QUADRATURE) -> np.ndarray:
    """``e^s m(s)`` on an array of scales, all sharing one outer integral."""
    values = np.asarray(s, dtype=float)
    flat = values.reshape(-1)
    if np.any(~(flat >= 0)):
        raise DomainError("mixture_m needs s >= 0")
    result = np.ones(flat.shape)
    live = flat > 0
    if np.any(live):
        result[live] = _scaled_mixture_integral(flat[live], spec)
    return result.reshape(values.shape)


def mixture_m(s: float, verify: bool = False, spec: QuadratureSpec = MIXTURE_QUADRATURE) -> float:
    """m(s) = int_0^inf (k^2 + 1) (s^3/2) K1(s sqrt(k^2 + 1)) dk, with m(0) = 1.

    ``verify`` recomputes the value from the third-derivative representation and
    raises :class:`VerificationMismatch` when the two disagree.
    """
    if not s >= 0:
        raise DomainError(f"mixture_m needs s >= 0, got {s}")
    if s == 0.0:
        return 1.0
    value = math.exp(-s) * float(mixture_m_scaled(np.array([s]), spec)[0])
    if verify:
        raw = mixture_m_raw(s)
        if abs(raw - value) > RAW_VERIFY_TOLERANCE * max(abs(value), 1e-300):
            raise VerificationMismatch(
                f"m({s}) = {value!r} disagrees with the K0''' representation {raw!r}"
            )
        logger.debug("m(%g) verified against the K0''' representation", s)
    return value


def mixture_m_raw(s: float, spec: QuadratureSpec = MIXTURE_QUADRATURE) -> float:
    """m(s) = 2 pi s g(s) from g(s) = -(s/4pi) int_s^inf K0'''(r) r / sqrt(r^2 - s^2) dr.

    With r = s sqrt(z^2 + 1) and -K0''' = K1 + K0/y + 2 K1/y^2 this becomes
    (s^3/2) int_0^inf (K1(y) + K0(y)/y + 2 K1(y)/y^2) dz.
    """
    if not s > 0:
        raise DomainError(f"mixture_m_raw needs s > 0, got {s}")
    prefactor = 0.5 * s**3

    def integrand(z: np.ndarray) -> np.ndarray:
        y = s * np.sqrt(z * z + 1.0)
        k0 = bessel_k_array(0, y)
        k1 = bessel_k_array(1, y)
        return prefactor * (k1 + k0 / y + 2.0 * k1 / (y * y))

    def envelope(z: float) -> float:
        y = s * math.sqrt(z * z + 1.0)
        return prefactor * (
            bessel_envelope(1, y) + bessel_envelope(0, y) / y + 2.0 * bessel_envelope(1, y) / y**2
        )

    return integrate_semi_infinite(integrand, 0.0, spec, envelope=envelope, vectorized=True)


def mixture_g(s: float) -> float:
    if not s > 0:
        raise DomainError(f"mixture_g needs s > 0, got {s}")
    return mixture_m(s) / (_TWO_PI * s)


def m_near_origin(s: np.ndarray | float) -> np.ndarray:
    """Upper envelope 1 + (a - ln(s)/4) s^2 of m near the origin."""
    values = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        result = 1.0 + (M_NEAR_ORIGIN_COEFF - 0.25 * np.log(values)) * values * values
    return np.where(values == 0.0, 1.0, result)


def m_bounds(s: float) -> MBounds:
    if not s >= 0:
        raise DomainError(f"m_bounds needs s >= 0, got {s}")
    decay = 0.25 * math.pi * math.exp(-s)
    mh = 1.0 if s == 0.0 else 1.0 + 0.5 * (1.0 - standard_kernel(s))
    return MBounds(
        lower=decay * (1.0 + s + s * s),
        upper=decay * (3.0 + 3.0 * s + s * s),
        near_origin=float(m_near_origin(s)),
        mh=mh,
    )


def _near_origin_antiderivative(log_s: np.ndarray) -> np.ndarray:
    # d/dL of this is 1 + (a - L/4) e^{2L}, the near-origin m in L = ln s.
    a = M_NEAR_ORIGIN_COEFF
    return log_s + np.exp(2.0 * log_s) * (0.5 * a + 1.0 / 16.0 - log_s / 8.0)


class MixtureTable:
    """Memo table of m(s) on a logarithmic grid.

    The spline interpolates ``e^s m(s)`` in ``ln s``. Below the grid the
    near-origin form is used, above it m is zero. ``log_integral`` integrates
    g(s) = m(s)/(2 pi s) exactly below the grid and by Gauss-Legendre on the
    spline inside it.
    """

    def __init__(
        self,
        s_min: float = MIXTURE_S_MIN,
        s_max: float = MIXTURE_S_MAX,
        points_per_decade: int = MIXTURE_POINTS_PER_DECADE,
        spec: QuadratureSpec = MIXTURE_QUADRATURE,
    ) -> None:
        if not 0 < s_min < s_max:
            raise ValueError("mixture table needs 0 < s_min < s_max")
        count = max(8, math.ceil(points_per_decade * math.log10(s_max / s_min))) + 1
        self.s_min = s_min
        self.s_max = s_max
        self.log_grid = np.linspace(math.log(s_min), math.log(s_max), count)
        scales = np.exp(self.log_grid)
        scaled = np.concatenate(
            [
                mixture_m_scaled(scales[i : i + _TABLE_CHUNK], spec)
                for i in range(0, count, _TABLE_CHUNK)
            ]
        )
        self._spline = CubicSpline(self.log_grid, scaled)
        widths = np.diff(self.log_grid)
        pieces = self._m_dlog_pieces(self.log_grid[:-1], widths)
        self._cumulative = np.concatenate(([0.0], np.cumsum(pieces)))
        self._origin_offset = float(_near_origin_antiderivative(np.array(self.log_grid[0])))
        logger.info("built mixture table with %d nodes on [%g, %g]", count, s_min, s_max)

    def _m_dlog_pieces(self, starts: np.ndarray, widths: np.ndarray) -> np.ndarray:
        nodes = starts[:, None] + 0.5 * widths[:, None] * (_LEGENDRE_X[None, :] + 1.0)
        values = np.exp(-np.exp(nodes)) * self._spline(nodes)
        return 0.5 * widths * (values @ _LEGENDRE_W)

    def m(self, s: np.ndarray | float) -> np.ndarray:
        shape = np.shape(s)
        values = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(~(values >= 0)):
            raise DomainError("m needs s >= 0")
        result = np.zeros(values.shape)
        small = values < self.s_min
        inside = ~small & (values <= self.s_max)
        result[small] = m_near_origin(values[small])
        if np.any(inside):
            result[inside] = np.exp(-values[inside]) * self._spline(np.log(values[inside]))
        return result.reshape(shape)

    def g(self, s: np.ndarray | float) -> np.ndarray:
        values = np.asarray(s, dtype=float)
        if np.any(~(values > 0)):
            raise DomainError("g needs s > 0")
        return self.m(values) / (_TWO_PI * values)

    def _antiderivative(self, log_s: np.ndarray) -> np.ndarray:
        # int m d(ln s), anchored to the near-origin antiderivative
        shape = np.shape(log_s)
        log_s = np.atleast_1d(np.asarray(log_s, dtype=float))
        first, last = self.log_grid[0], self.log_grid[-1]
        result = np.empty(log_s.shape)
        below = log_s < first
        result[below] = _near_origin_antiderivative(log_s[below])
        rest = ~below
        if np.any(rest):
            clipped = np.minimum(log_s[rest], last)
            index = np.clip(np.searchsorted(self.log_grid, clipped, side="right") - 1,
                            0, self.log_grid.size - 2)
            start = self.log_grid[index]
            partial = self._m_dlog_pieces(start, clipped - start)
            result[rest] = self._origin_offset + self._cumulative[index] + partial
        return result.reshape(shape)

    def log_integral(self, a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray | float:
        """int_a^b g(s) ds for 0 < a <= b; broadcasts over arrays."""
        lower = np.asarray(a, dtype=float)
        upper = np.asarray(b, dtype=float)
        if np.any(~(lower > 0)) or np.any(upper < lower):
            raise DomainError("log_integral needs 0 < a <= b")
        hi = self._antiderivative(np.log(np.minimum(upper, np.finfo(float).max)))
        value = (hi - self._antiderivative(np.log(lower))) / _TWO_PI
        if value.ndim == 0:
            return float(value)
        return value


class StandardKernelTable:
    """Memo table of h~(w) = w K1(w); the spline interpolates ``e^w h~(w)`` in ``ln w``."""

    def __init__(
        self,
        w_min: float = KERNEL_W_MIN,
        w_max: float = KERNEL_W_MAX,
        points_per_decade: int = KERNEL_POINTS_PER_DECADE,
    ) -> None:
        count = max(8, math.ceil(points_per_decade * math.log10(w_max / w_min))) + 1
        self.w_min = w_min
        self.w_max = w_max
        log_grid = np.linspace(math.log(w_min), math.log(w_max), count)
        nodes = np.exp(log_grid)
        self._spline = CubicSpline(log_grid, nodes * bessel_k_scaled(1, nodes))
        logger.info("built standard kernel table with %d nodes on [%g, %g]", count, w_min, w_max)

    def h(self, w: np.ndarray | float) -> np.ndarray:
        shape = np.shape(w)
        values = np.atleast_1d(np.asarray(w, dtype=float))
        result = np.zeros(values.shape)
        small = values < self.w_min
        inside = ~small & (values <= self.w_max)
        tiny = values[small]
        with np.errstate(divide="ignore", invalid="ignore"):
            series = 1.0 + 0.5 * tiny * tiny * (np.log(0.5 * tiny) + EULER_GAMMA - 0.5)
        result[small] = np.where(tiny == 0.0, 1.0, series)
        if np.any(inside):
            result[inside] = np.exp(-values[inside]) * self._spline(np.log(values[inside]))
        return result.reshape(shape)


@lru_cache(maxsize=1)
def mixture_table() -> MixtureTable:
    return MixtureTable()


@lru_cache(maxsize=1)
def standard_kernel_table() -> StandardKernelTable:
    return StandardKernelTable()


def find_m_peak(tol: float = 1e-7) -> tuple[float, float]:
    """Location and height of the maximum of m."""
    table = mixture_table()
    location, _ = minimize_scalar(lambda s: -table.m(s), 0.1, 3.0, tol=tol, vectorized=True)
    return location, mixture_m(location)


def kernel_function(kind: KernelKind) -> ArrayFunction:
    """Per-scale kernel evaluated on arrays of w = r/s."""
    if kind is KernelKind.EUCLID_HAT:
        return euclid_hat_array
    return standard_kernel_table().h


def density_function(kind: KernelKind) -> ArrayFunction:
    """Mixture density: m(s)/(2 pi s) for Euclid's hat, 1/(2 pi s) for the standard kernel."""
    if kind is KernelKind.EUCLID_HAT:
        return mixture_table().g

    def standard_density(s: np.ndarray) -> np.ndarray:
        return 1.0 / (_TWO_PI * np.asarray(s, dtype=float))

    return standard_density


def density_integral(kind: KernelKind, a: np.ndarray | float, b: np.ndarray | float):
    """int_a^b density(s) ds, broadcasting over arrays."""
    if kind is KernelKind.EUCLID_HAT:
        return mixture_table().log_integral(a, b)
    lower, upper = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(~(lower > 0)) or np.any(upper < lower):
        raise DomainError("density integral needs 0 < a <= b")
    value = np.log(upper / lower) / _TWO_PI
    return float(value) if value.ndim == 0 else value


def yukawa_v(r: float) -> float:
    if not r > 0:
        raise DomainError(f"yukawa_v needs r > 0, got {r}")
    return bessel_k(0, r) / _TWO_PI


def windowed_v(
    kind: KernelKind,
    window: ScaleWindow,
    r: float,
    spec: QuadratureSpec = WINDOW_QUADRATURE,
) -> float:
    """int_{t0}^{t1} kernel(r/s) density(s) ds, integrated in ln s.

    Euclid's hat vanishes for s < r, so the lower limit is raised to max(t0, r).
    An infinite upper scale is split at s = 1 and truncated with the exponential
    envelope of m. The standard decomposition diverges as t1 grows and needs a
    finite window.
    """
    if not r >= 0:
        raise DomainError(f"windowed_v needs r >= 0, got {r}")
    if window.empty:
        return 0.0
    kernel = kernel_function(kind)
    if kind is KernelKind.STANDARD_BESSEL:
        if not window.finite:
            raise DomainError("the standard decomposition needs a finite upper scale t1")

        def standard_integrand(log_s: np.ndarray) -> np.ndarray:
            return kernel(r * np.exp(-log_s)) / _TWO_PI

        return integrate_adaptive(
            standard_integrand, math.log(window.t0), math.log(window.t1), spec, vectorized=True
        )

    table = mixture_table()
    lower = max(window.t0, r)
    if window.finite and lower >= window.t1:
        return 0.0

    def hat_integrand(log_s: np.ndarray) -> np.ndarray:
        return kernel(r * np.exp(-log_s)) * table.m(np.exp(log_s)) / _TWO_PI

    if window.finite:
        return integrate_adaptive(
            hat_integrand, math.log(lower), math.log(window.t1), spec, vectorized=True
        )
    split = max(lower, 1.0)
    head = 0.0
    if lower < split:
        head = integrate_adaptive(hat_integrand, math.log(lower), 0.0, spec, vectorized=True)

    def envelope(log_s: float) -> float:
        s = math.exp(log_s)
        return 0.125 * math.exp(-s) * (3.0 + 3.0 * s + s * s)

    tail = integrate_semi_infinite(
        hat_integrand, math.log(split), spec, envelope=envelope, vectorized=True
    )
    return head + tail

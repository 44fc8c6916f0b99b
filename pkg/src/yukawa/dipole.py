"""Neutral-pair analysis: lens geometry of the hat, the Delta mass and the A2 bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from yukawa.constants import LENS_COMPLEMENT_BOUND, LENS_THRESHOLD
from yukawa.errors import DomainError
from yukawa.models import KernelKind, ScaleWindow
from yukawa.numerics import QuadratureSpec, RngStream, integrate_adaptive
from yukawa.potentials import euclid_hat_array, mixture_table, windowed_v

logger = logging.getLogger(__name__)

A2_QUADRATURE = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9)
DEFAULT_DELTA_SAMPLES = 20000
DEFAULT_A2_SAMPLES = 20000
_INNER_X, _INNER_W = np.polynomial.legendre.leggauss(32)
_TAU_GRID_POINTS = 400


@dataclass(frozen=True)
class LensGeometry:
    """Two discs of radius s/2 whose centers are ``center_distance`` apart."""

    disc_radius: float
    center_distance: float

    def __post_init__(self) -> None:
        if not self.disc_radius > 0:
            raise ValueError(f"disc_radius must be > 0, got {self.disc_radius}")
        if not self.center_distance >= 0:
            raise ValueError(f"center_distance must be >= 0, got {self.center_distance}")

    @property
    def area(self) -> float:
        return lens_area(2.0 * self.disc_radius, self.center_distance)


@dataclass(frozen=True)
class DeltaMass:
    """Sampled integrals of |Delta| over (x1, x2) next to the closed bound."""

    estimate: float
    stderr: float
    direct: float
    direct_stderr: float
    bound: float


@dataclass(frozen=True)
class RefinedExponents:
    outside_lens: float
    inside_lens: float

    @property
    def outside_integrable(self) -> bool:
        return self.outside_lens > -1.0

    @property
    def inside_integrable(self) -> bool:
        return self.inside_lens > -1.0


@dataclass(frozen=True)
class DipoleBoundReport:
    s: float
    t0: float
    beta: float
    bound_value: float
    mc_estimate: float
    stderr: float
    refined_exponents: RefinedExponents

    def to_row(self) -> dict[str, float]:
        return {
            "beta": self.beta,
            "t0": self.t0,
            "bound": self.bound_value,
            "mc_estimate": self.mc_estimate,
            "stderr": self.stderr,
            "outside_lens_exponent": self.refined_exponents.outside_lens,
            "inside_lens_exponent": self.refined_exponents.inside_lens,
        }


def lens_area(s: float, d: float) -> float:
    """Area of the intersection of two discs of radius s/2 at center distance d."""
    if not s > 0 or not d >= 0:
        raise DomainError(f"lens_area needs s > 0 and d >= 0, got s={s}, d={d}")
    if d >= s:
        return 0.0
    w = d / s
    return 0.5 * s * s * (math.acos(w) - w * math.sqrt(1.0 - w * w))


def disc_intersection_area(r1: float, r2: float, d: np.ndarray | float) -> np.ndarray:
    """|B_r1(0) intersect B_r2(d e)| for center distances d; broadcasts over d."""
    distance = np.asarray(d, dtype=float)
    small, large = min(r1, r2), max(r1, r2)
    result = np.zeros(distance.shape)
    nested = distance <= large - small
    result[nested] = math.pi * small * small
    partial = ~nested & (distance < r1 + r2)
    if np.any(partial):
        x = distance[partial]
        cos1 = np.clip((x * x + r1 * r1 - r2 * r2) / (2.0 * x * r1), -1.0, 1.0)
        cos2 = np.clip((x * x + r2 * r2 - r1 * r1) / (2.0 * x * r2), -1.0, 1.0)
        kite = (-x + r1 + r2) * (x + r1 - r2) * (x - r1 + r2) * (x + r1 + r2)
        result[partial] = (
            r1 * r1 * np.arccos(cos1)
            + r2 * r2 * np.arccos(cos2)
            - 0.5 * np.sqrt(np.maximum(kite, 0.0))
        )
    return result


def _uniform_disc(rng: np.random.Generator, radius: float, size: int) -> np.ndarray:
    rho = radius * np.sqrt(rng.random(size))
    angle = 2.0 * math.pi * rng.random(size)
    return np.column_stack((rho * np.cos(angle), rho * np.sin(angle)))


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _delta_values(s: float, s_tilde: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    # (h(|x1|/s) - h(|x2|/s)) h(|x1 - x2|/s~) with the reference particle at the origin
    outer = euclid_hat_array(np.hypot(*x1.T) / s) - euclid_hat_array(np.hypot(*x2.T) / s)
    return outer * euclid_hat_array(np.hypot(*(x1 - x2).T) / s_tilde)


def delta_mass(
    s: float,
    s_tilde: float,
    stream: RngStream,
    samples: int = DEFAULT_DELTA_SAMPLES,
) -> DeltaMass:
    """Integral over (x1, x2) of |Delta| next to its bound pi^2 s~^3 s / 8.

    The area representation samples |z - z~| uniformly by area in the shell
    (s - s~)/2 < |z - z~| < (s + s~)/2 and averages 2 A B, with A the area of
    B_{s/2}(z) intersect B_{s~/2}(z~) and B = pi s~^2/4 - A. It dominates the
    direct four-dimensional average of |Delta|, which is reported alongside.
    """
    if not 0 < s_tilde < s:
        raise DomainError(f"delta_mass needs 0 < s_tilde < s, got s={s}, s_tilde={s_tilde}")
    if samples < 2:
        raise DomainError("delta_mass needs at least 2 samples")
    rng = stream.generator()
    inner, outer = 0.5 * (s - s_tilde), 0.5 * (s + s_tilde)
    rho = np.sqrt(inner * inner + rng.random(samples) * (outer * outer - inner * inner))
    a = disc_intersection_area(0.5 * s, 0.5 * s_tilde, rho)
    b = 0.25 * math.pi * s_tilde * s_tilde - a
    mean, stderr = _mean_and_stderr(2.0 * a * b)
    factor = 4.0 * s / s_tilde

    x1 = _uniform_disc(rng, s, samples)
    x2 = x1 + _uniform_disc(rng, s_tilde, samples)
    volume = math.pi * s * s * math.pi * s_tilde * s_tilde
    direct, direct_stderr = _mean_and_stderr(np.abs(_delta_values(s, s_tilde, x1, x2)))
    mass = DeltaMass(
        estimate=factor * mean,
        stderr=factor * stderr,
        direct=volume * direct,
        direct_stderr=volume * direct_stderr,
        bound=math.pi**2 * s_tilde**3 * s / 8.0,
    )
    logger.debug("delta mass s=%g s~=%g: %.6e (bound %.6e)", s, s_tilde, mass.estimate, mass.bound)
    return mass


def delta_mass_exponent(
    s: float,
    s_tildes: tuple[float, ...],
    stream: RngStream,
    samples: int = DEFAULT_DELTA_SAMPLES,
) -> float:
    """Fitted power of s~ in the Delta mass; the closed bound has power 3."""
    if len(s_tildes) < 2:
        raise DomainError("an exponent fit needs at least 2 values of s_tilde")
    masses = [
        delta_mass(s, s_tilde, stream.child(index), samples).estimate
        for index, s_tilde in enumerate(s_tildes)
    ]
    slope, _ = np.polyfit(np.log(s_tildes), np.log(masses), 1)
    return float(slope)


def a2_bound(beta: float, s: float, t0: float, spec: QuadratureSpec = A2_QUADRATURE) -> float:
    """(beta/64) m(s) int_{t0}^{s} s~^2 m(s~) exp(beta int_{s~}^{s} g) ds~."""
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if not 0 < t0 <= s <= 1:
        raise DomainError(f"a2_bound needs 0 < t0 <= s <= 1, got t0={t0}, s={s}")
    if t0 == s:
        return 0.0
    table = mixture_table()

    def integrand(log_s: np.ndarray) -> np.ndarray:
        scales = np.exp(log_s)
        growth = np.exp(beta * table.log_integral(scales, s))
        return scales**3 * table.m(scales) * growth

    integral = integrate_adaptive(integrand, math.log(t0), math.log(s), spec, vectorized=True)
    return beta / 64.0 * float(table.m(s)) * integral


def _windowed_hat(r: np.ndarray, lower: np.ndarray, s: float) -> np.ndarray:
    # int_{lower}^{s} g(tau) h(r/tau) d tau with lower >= r, one Gauss-Legendre rule per sample
    table = mixture_table()
    lo = np.log(lower)
    width = math.log(s) - lo
    nodes = lo[:, None] + 0.5 * width[:, None] * (_INNER_X[None, :] + 1.0)
    taus = np.exp(nodes)
    values = table.m(taus) * euclid_hat_array(r[:, None] / taus) / (2.0 * math.pi)
    return 0.5 * width * (values @ _INNER_W)


def a2_mc_estimate(
    beta: float,
    s: float,
    t0: float,
    stream: RngStream,
    samples: int = DEFAULT_A2_SAMPLES,
) -> tuple[float, float]:
    """Monte-Carlo value of A2(s) for an opposite pair next to a reference charge.

    Samples ln s~ uniformly on [ln t0, ln s], x1 uniformly in the disc of
    radius s and x2 - x1 uniformly in the disc of radius s~, where Delta lives.
    """
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if not 0 < t0 < s <= 1:
        raise DomainError(f"a2_mc_estimate needs 0 < t0 < s <= 1, got t0={t0}, s={s}")
    table = mixture_table()
    rng = stream.generator()
    span = math.log(s / t0)
    s_tilde = t0 * np.exp(span * rng.random(samples))
    x1 = _uniform_disc(rng, s, samples)
    offsets = np.sqrt(rng.random(samples)) * s_tilde
    angle = 2.0 * math.pi * rng.random(samples)
    x2 = x1 + np.column_stack((offsets * np.cos(angle), offsets * np.sin(angle)))
    outer = euclid_hat_array(np.hypot(*x1.T) / s) - euclid_hat_array(np.hypot(*x2.T) / s)
    delta = np.abs(outer * euclid_hat_array(offsets / s_tilde))
    exponent = beta * _windowed_hat(offsets, s_tilde, s)
    volume = math.pi * s * s * math.pi * s_tilde * s_tilde
    weights = span * s_tilde * volume * table.g(s_tilde) * delta * np.exp(exponent)
    mean, stderr = _mean_and_stderr(weights)
    prefactor = 0.5 * float(table.g(s)) * beta
    return prefactor * mean, prefactor * stderr


def refined_collapse_exponents(beta: float) -> RefinedExponents:
    """Powers of s~ left after the mean-value split: (2 - 3 beta / 8 pi, 3 - beta / 2 pi)."""
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    return RefinedExponents(
        outside_lens=2.0 - 3.0 * beta / (8.0 * math.pi),
        inside_lens=3.0 - beta / (2.0 * math.pi),
    )


def _mean_value(r: float, s_tilde: float, s: float) -> float:
    # average of m(tau) h(r/tau) over ln tau in [ln s~, ln s]
    inner = windowed_v(KernelKind.EUCLID_HAT, ScaleWindow(s_tilde, s), r)
    return 2.0 * math.pi * inner / math.log(s / s_tilde)


def tau_star(r: float, s_tilde: float, s: float = 1.0) -> float:
    """A point tau in [s~, s] where m(tau) h(r/tau) equals its logarithmic mean over [s~, s].

    The first crossing above s~ is returned; it tends to s~ as r tends to 0.
    """
    if not 0 < s_tilde < s:
        raise DomainError(f"tau_star needs 0 < s_tilde < s, got s_tilde={s_tilde}, s={s}")
    if not r >= 0:
        raise DomainError(f"tau_star needs r >= 0, got {r}")
    table = mixture_table()
    target = _mean_value(r, s_tilde, s)

    def excess(tau: np.ndarray) -> np.ndarray:
        return table.m(tau) * euclid_hat_array(r / tau) - target

    grid = np.geomspace(s_tilde, s, _TAU_GRID_POINTS)
    values = excess(grid)
    crossings = np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]
    if values[0] == 0.0 or crossings.size == 0:
        return float(grid[np.argmin(np.abs(values))])
    lo, hi = float(grid[crossings[0]]), float(grid[crossings[0] + 1])
    f_lo = float(excess(np.array(lo)))
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        f_mid = float(excess(np.array(mid)))
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def lens_complement_supremum(
    threshold: float = LENS_THRESHOLD,
    s: float = 1.0,
    s_tildes: tuple[float, ...] | None = None,
    r_points: int = 100,
) -> float:
    """Largest m(tau*) h(r/tau*) over sampled (r, s~) with r/tau* > threshold.

    The product equals the logarithmic mean of m h over [s~, s], so only the
    mean-value point's location decides membership.
    Since m is at most its peak value and h decreases, the supremum never
    exceeds h(threshold) times the peak of m.
    """
    if not 0 < threshold < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")
    if s_tildes is None:
        s_tildes = tuple(float(v) for v in np.geomspace(1e-3, 0.99 * s, 24))
    best = 0.0
    for s_tilde in s_tildes:
        for r in np.linspace(0.0, s, r_points + 1)[1:-1]:
            point = tau_star(float(r), s_tilde, s)
            if r / point <= threshold:
                continue
            best = max(best, _mean_value(float(r), s_tilde, s))
    if best > LENS_COMPLEMENT_BOUND:
        logger.warning(
            "lens complement supremum %.4f at threshold %g exceeds %.2f",
            best, threshold, LENS_COMPLEMENT_BOUND,
        )
    else:
        logger.info("lens complement supremum %.4f at threshold %g", best, threshold)
    return best


def dipole_report(
    beta: float,
    t0: float,
    stream: RngStream,
    s: float = 1.0,
    samples: int = DEFAULT_A2_SAMPLES,
) -> DipoleBoundReport:
    mc_estimate, stderr = a2_mc_estimate(beta, s, t0, stream, samples)
    return DipoleBoundReport(
        s=s,
        t0=t0,
        beta=beta,
        bound_value=a2_bound(beta, s, t0),
        mc_estimate=mc_estimate,
        stderr=stderr,
        refined_exponents=refined_collapse_exponents(beta),
    )

"""Quadrature, scalar minimisation, ODE stepping and seeded random streams."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from yukawa.errors import DomainError, StepCheckFailed, SubdivisionLimit, TailNotDecaying

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[float], float]
RightHandSide = Callable[[float, np.ndarray], np.ndarray]

# Gauss-Kronrod 7/15 pair on [-1, 1]; abscissae of the positive half, centre last.
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

_NODES = np.concatenate((-_XGK[:7], [0.0], _XGK[6::-1]))
_KRONROD = np.concatenate((_WGK[:7], [_WGK[7]], _WGK[6::-1]))
_GAUSS = np.zeros(15)
_GAUSS[[1, 13]] = _WG[0]
_GAUSS[[3, 11]] = _WG[1]
_GAUSS[[5, 9]] = _WG[2]
_GAUSS[7] = _WG[3]

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_STEP_CHECK_TOLERANCE = 1e-8


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    tail_cut: float = 1e-16

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not self.tail_cut > 0:
            raise ValueError("tail_cut must be > 0")


@dataclass(frozen=True)
class OdeGridSpec:
    steps_per_decade: int = 200
    richardson_check: bool = False

    def __post_init__(self) -> None:
        if self.steps_per_decade < 2:
            raise ValueError("steps_per_decade must be >= 2")

    def refined(self) -> "OdeGridSpec":
        return OdeGridSpec(self.steps_per_decade * 2, self.richardson_check)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (base_seed, stream_index).

    Streams with different indices are statistically independent, so scans can
    hand one stream to every grid point or chunk without coordination.
    """

    base_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be >= 0")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.base_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.base_seed, index)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    y: np.ndarray = field(repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


DEFAULT_QUADRATURE = QuadratureSpec()
DEFAULT_GRID = OdeGridSpec()


def _evaluate(f: Callable, x: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        values = np.asarray(f(x), dtype=float)
        if values.ndim == 0:
            values = np.broadcast_to(values, x.shape)
        elif values.shape[0] != x.size:
            raise DomainError(
                f"vectorized integrand returned shape {values.shape} for {x.size} nodes"
            )
    else:
        values = np.array([f(float(xi)) for xi in x], dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"integrand is not finite on [{x[0]}, {x[-1]}]")
    return values


def _kronrod(f: Callable, a: float, b: float, vectorized: bool) -> tuple[Any, Any]:
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    values = _evaluate(f, centre + half * _NODES, vectorized)
    result_k = half * np.tensordot(_KRONROD, values, axes=1)
    result_g = half * np.tensordot(_GAUSS, values, axes=1)
    result_abs = half * np.tensordot(_KRONROD, np.abs(values), axes=1)
    mean = 0.5 * np.tensordot(_KRONROD, values, axes=1)
    result_asc = half * np.tensordot(_KRONROD, np.abs(values - mean), axes=1)
    error = np.abs(result_k - result_g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = result_asc * np.minimum(1.0, (200.0 * error / result_asc) ** 1.5)
    error = np.where((result_asc != 0.0) & (error != 0.0), scaled, error)
    error = np.where(
        result_abs > _TINY / (50.0 * _EPS), np.maximum(50.0 * _EPS * result_abs, error), error
    )
    if values.ndim == 1:
        return float(result_k), float(error)
    return result_k, error


def _priority(error: Any, tolerance: Any) -> float:
    # heap key: worst panel error measured against its own component's tolerance
    return -float(np.max(np.asarray(error) / tolerance))


def integrate_adaptive(
    f: Callable,
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    vectorized: bool = False,
) -> Any:
    """Integrate ``f`` over ``[a, b]`` by globally adaptive Gauss-Kronrod bisection.

    Args:
        f: Integrand. With ``vectorized`` it receives the 15 nodes of a panel as
            a numpy array and returns either one value per node or a
            ``(nodes, m)`` array, in which case ``m`` integrals share the panels.
        a: Lower limit.
        b: Upper limit.
        spec: Tolerances and the subdivision budget.
        vectorized: Whether ``f`` accepts arrays.

    Returns:
        The integral (a float, or an array of ``m`` integrals), with estimated
        error below ``max(abs_tol, rel_tol * |I|)`` in every component.

    Raises:
        SubdivisionLimit: The budget ran out before the tolerance was met.
        DomainError: ``a > b`` or the integrand returned non-finite values.
    """
    if a == b:
        sample = _evaluate(f, np.full(_NODES.size, float(a)), vectorized)
        return 0.0 if sample.ndim == 1 else np.zeros(sample.shape[1:])
    if not a < b:
        raise DomainError(f"integration limits must satisfy a < b, got a={a}, b={b}")
    value, error = _kronrod(f, a, b, vectorized)
    counter = itertools.count()
    tolerance = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(value))
    heap: list[tuple[float, int, float, float, Any, Any]] = [
        (_priority(error, tolerance), next(counter), a, b, value, error)
    ]
    settled: list[Any] = []
    total, total_error = value, error
    subdivisions = 0
    while True:
        tolerance = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(total_error <= tolerance):
            break
        if subdivisions >= spec.max_subdivisions or not heap:
            worst = float(np.max(total_error))
            raise SubdivisionLimit(
                f"quadrature on [{a}, {b}] stopped after {subdivisions} subdivisions "
                f"with error {worst:.3e}",
                estimate=total,
                error=worst,
            )
        _, _, lo, hi, part, part_error = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            settled.append(part)
            continue
        left, left_error = _kronrod(f, lo, mid, vectorized)
        right, right_error = _kronrod(f, mid, hi, vectorized)
        total = total + left + right - part
        total_error = total_error + left_error + right_error - part_error
        tolerance = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        heapq.heappush(
            heap, (_priority(left_error, tolerance), next(counter), lo, mid, left, left_error)
        )
        heapq.heappush(
            heap, (_priority(right_error, tolerance), next(counter), mid, hi, right, right_error)
        )
        subdivisions += 1
    parts = [item[4] for item in heap] + settled
    if np.ndim(value) == 0:
        return math.fsum(parts)
    return np.sum(np.array(parts), axis=0)


def integrate_semi_infinite(
    f: Callable,
    a: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    envelope: ScalarFunction,
    vectorized: bool = False,
    ceiling: float = 1e9,
) -> Any:
    """Integrate ``f`` over ``[a, inf)``.

    The range is truncated where the caller's decreasing ``envelope`` (a bound
    on ``|f|``) falls below ``spec.tail_cut``; the truncation point is found by
    doubling the distance from ``a``.
    """
    width = 1.0
    while envelope(a + width) > spec.tail_cut:
        width *= 2.0
        if width > ceiling:
            raise TailNotDecaying(
                f"envelope still above {spec.tail_cut:g} at distance {ceiling:g} from {a}"
            )
    logger.debug("semi-infinite integral from %g truncated at %g", a, a + width)
    return integrate_adaptive(f, a, a + width, spec, vectorized=vectorized)


def minimize_scalar(
    f: Callable,
    lo: float,
    hi: float,
    tol: float = 1e-8,
    *,
    vectorized: bool = False,
    grid_points: int = 1024,
) -> tuple[float, float]:
    """Minimise ``f`` on ``[lo, hi]``: best point of a coarse grid, then golden section."""
    if not lo < hi:
        raise DomainError(f"minimisation bracket must satisfy lo < hi, got [{lo}, {hi}]")
    xs = np.linspace(lo, hi, grid_points)
    if vectorized:
        fs = np.broadcast_to(np.asarray(f(xs), dtype=float), xs.shape)

        def scalar(x: float) -> float:
            return float(np.asarray(f(np.array([x])), dtype=float).reshape(-1)[0])
    else:
        fs = np.array([f(float(x)) for x in xs], dtype=float)

        def scalar(x: float) -> float:
            return float(f(x))

    fs = np.where(np.isfinite(fs), fs, np.inf)
    best = int(np.argmin(fs))
    a = float(xs[max(best - 1, 0)])
    b = float(xs[min(best + 1, grid_points - 1)])
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = scalar(c), scalar(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = scalar(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = scalar(d)
    x_refined = 0.5 * (a + b)
    f_refined = scalar(x_refined)
    if f_refined <= fs[best]:
        return x_refined, f_refined
    return float(xs[best]), float(fs[best])


def scale_grid(
    t0: float,
    t1: float,
    steps_per_decade: int,
    breakpoints: Sequence[float] = (),
) -> np.ndarray:
    """Logarithmic grid on ``[t0, t1]``; uniform when ``t0 <= 0``."""
    if not t0 < t1:
        raise DomainError(f"grid limits must satisfy t0 < t1, got t0={t0}, t1={t1}")
    if t0 > 0:
        steps = max(1, math.ceil(steps_per_decade * math.log10(t1 / t0)))
        grid = np.geomspace(t0, t1, steps + 1)
    else:
        steps = max(1, math.ceil(steps_per_decade * (t1 - t0)))
        grid = np.linspace(t0, t1, steps + 1)
    inner = [float(p) for p in breakpoints if t0 < p < t1]
    if inner:
        grid = np.union1d(grid, inner)
    grid[0], grid[-1] = t0, t1
    return grid


def _rk4(rhs: RightHandSide, y0: np.ndarray, grid: np.ndarray) -> np.ndarray:
    states = np.empty((grid.size, y0.size))
    y = y0.copy()
    states[0] = y
    for i in range(grid.size - 1):
        t, h = grid[i], grid[i + 1] - grid[i]
        k1 = np.asarray(rhs(t, y), dtype=float)
        k2 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(rhs(t + h, y + h * k3), dtype=float)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    return states


def ode_solve(
    rhs: RightHandSide,
    y0: Sequence[float] | np.ndarray,
    t0: float,
    t1: float,
    grid: OdeGridSpec = DEFAULT_GRID,
    *,
    breakpoints: Sequence[float] = (),
) -> Trajectory:
    """Classical fourth-order Runge-Kutta on a logarithmic scale grid.

    ``breakpoints`` are inserted into the grid so that kinks of the right-hand
    side fall on grid nodes. With ``grid.richardson_check`` the run is repeated
    with twice the steps and the final states must agree to relative 1e-8.
    """
    start = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    nodes = scale_grid(t0, t1, grid.steps_per_decade, breakpoints)
    states = _rk4(rhs, start, nodes)
    if grid.richardson_check:
        fine_nodes = scale_grid(t0, t1, grid.steps_per_decade * 2, breakpoints)
        fine_final = _rk4(rhs, start, fine_nodes)[-1]
        scale = max(float(np.max(np.abs(fine_final))), _TINY)
        discrepancy = float(np.max(np.abs(states[-1] - fine_final))) / scale
        logger.debug("step-halving discrepancy %.3e on [%g, %g]", discrepancy, t0, t1)
        if discrepancy > _STEP_CHECK_TOLERANCE:
            raise StepCheckFailed(
                f"step halving changed the solution by {discrepancy:.3e} (relative)",
                discrepancy=discrepancy,
            )
    return Trajectory(t=nodes, y=states)

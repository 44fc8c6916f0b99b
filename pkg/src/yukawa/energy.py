"""n-particle energies, the Euclid's-hat lower bound and minimal specific energies."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from yukawa.constants import BOUND_SLACK, DEFAULT_OPTIMIZER_STARTS
from yukawa.errors import BoundViolation, DomainError, OptimizerStall
from yukawa.models import ChargedConfiguration, KernelKind, ScanReport
from yukawa.numerics import RngStream, minimize_scalar
from yukawa.potentials import kernel_function, standard_kernel_table

logger = logging.getLogger(__name__)

SCAN_CHUNK = 10000
MAX_SPECIFIC_ENERGY_PARTICLES = 7
_DESCENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    net_charge: int
    bound: float
    margin: float

    def to_dict(self) -> dict[str, float | int]:
        return {
            "energy": self.energy,
            "net_charge": self.net_charge,
            "bound": self.bound,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class QuadraticFormEstimate:
    """Monte-Carlo value of the disc-indicator integral next to the direct double sum."""

    estimate: float
    stderr: float
    exact: float


def collapsed_configuration(charges: tuple[int, ...] | list[int]) -> ChargedConfiguration:
    return ChargedConfiguration.collapsed(charges)


def collinear_triple(r1: float, r2: float) -> ChargedConfiguration:
    """Charges (+, -, +) on a line, the negative charge between the other two."""
    if r1 < 0 or r2 < 0:
        raise DomainError("collinear distances must be >= 0")
    return ChargedConfiguration(
        positions=np.array([[-r1, 0.0], [0.0, 0.0], [r2, 0.0]]), charges=(1, -1, 1)
    )


def _batch_energies(
    positions: np.ndarray, charges: np.ndarray, kind: KernelKind, scale: float = 1.0
) -> np.ndarray:
    # positions (batch, n, 2), charges (batch, n)
    n = positions.shape[1]
    upper_i, upper_j = np.triu_indices(n, k=1)
    delta = positions[:, upper_i, :] - positions[:, upper_j, :]
    distances = np.sqrt(np.sum(delta * delta, axis=-1))
    products = charges[:, upper_i] * charges[:, upper_j]
    return np.sum(products * kernel_function(kind)(distances / scale), axis=-1)


def total_energy(config: ChargedConfiguration, kind: KernelKind, scale: float = 1.0) -> float:
    """Sum over pairs of sigma_i sigma_j kernel(|x_i - x_j| / scale)."""
    if not scale > 0:
        raise DomainError(f"scale must be > 0, got {scale}")
    if config.n == 1:
        return 0.0
    charges = np.array(config.charges, dtype=float)[None, :]
    return float(_batch_energies(config.positions[None, :, :], charges, kind, scale)[0])


def lower_bound(n: int, net_charge: int) -> float:
    return -0.5 * (n - abs(net_charge))


def energy_report(
    config: ChargedConfiguration, kind: KernelKind = KernelKind.EUCLID_HAT, scale: float = 1.0
) -> EnergyReport:
    energy = total_energy(config, kind, scale)
    bound = lower_bound(config.n, config.net_charge)
    return EnergyReport(
        energy=energy, net_charge=config.net_charge, bound=bound, margin=energy - bound
    )


def lower_bound_scan(
    n_max: int,
    samples: int,
    box: float,
    stream: RngStream,
    kind: KernelKind = KernelKind.EUCLID_HAT,
    chunk_size: int = SCAN_CHUNK,
) -> ScanReport:
    """Random configurations against U_n >= -(n - |net charge|)/2.

    Sample sizes n are uniform on {2, ..., n_max}, positions uniform in the box
    [-box, box]^2 and charges uniform. Chunk ``i`` draws from ``stream.child(i)``.
    The collapsed neutral configurations are evaluated as well. A violation
    beyond the slack raises :class:`BoundViolation` for Euclid's hat and is only
    counted for the standard kernel, where the bound does not hold.
    """
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if not box > 0:
        raise DomainError("box must be > 0")
    worst_margin = math.inf
    worst_config: ChargedConfiguration | None = None
    violations = 0
    for chunk, start in enumerate(range(0, samples, chunk_size)):
        count = min(chunk_size, samples - start)
        rng = stream.child(chunk).generator()
        sizes = rng.integers(2, n_max + 1, size=count)
        positions = rng.uniform(-box, box, size=(count, n_max, 2))
        charges = rng.choice(np.array([-1.0, 1.0]), size=(count, n_max))
        for n in range(2, n_max + 1):
            picked = np.flatnonzero(sizes == n)
            if picked.size == 0:
                continue
            batch_positions = positions[picked, :n, :]
            batch_charges = charges[picked, :n]
            energies = _batch_energies(batch_positions, batch_charges, kind)
            bounds = -0.5 * (n - np.abs(np.sum(batch_charges, axis=1)))
            margins = energies - bounds
            violations += int(np.count_nonzero(margins < -BOUND_SLACK))
            index = int(np.argmin(margins))
            if margins[index] < worst_margin:
                worst_margin = float(margins[index])
                worst_config = ChargedConfiguration(
                    batch_positions[index], tuple(int(c) for c in batch_charges[index])
                )
        logger.debug("scan chunk %d done, worst margin so far %.3e", chunk, worst_margin)

    collapsed_margins = {}
    for n in range(2, n_max + 1, 2):
        charges_n = (1,) * (n // 2) + (-1,) * (n // 2)
        collapsed_margins[str(n)] = energy_report(collapsed_configuration(charges_n), kind).margin

    worst_payload = worst_config.to_dict() if worst_config is not None else None
    if violations and kind is KernelKind.EUCLID_HAT:
        raise BoundViolation(
            f"{violations} configurations fall below the lower bound; "
            f"worst margin {worst_margin!r}",
            configuration=worst_payload,
            margin=worst_margin,
        )
    if violations:
        logger.warning(
            "%d of %d configurations fall below -(n - |Q|)/2 for the %s kernel",
            violations, samples, kind.value,
        )
    return ScanReport(
        name="energy-bound-scan",
        samples=samples,
        worst_margin=worst_margin,
        violations=violations,
        worst_configuration=worst_payload,
        details={
            "kind": kind.value,
            "n_max": n_max,
            "box": box,
            "seed": stream.base_seed,
            "collapsed_margins": collapsed_margins,
        },
    )


def _pair_excess_grid(grid_max: float, grid_step: float) -> tuple[np.ndarray, np.ndarray]:
    # F[i, j] = h~(x_i + x_j) - h~(x_i) - h~(x_j) on the grid x_i = i * step
    if not 0 < grid_step < grid_max:
        raise DomainError("grid must satisfy 0 < grid_step < grid_max")
    points = int(round(grid_max / grid_step)) + 1
    table = standard_kernel_table()
    values = table.h(grid_step * np.arange(2 * points - 1))
    index = np.arange(points)
    single = values[index]
    excess = values[index[:, None] + index[None, :]] - single[:, None] - single[None, :]
    return grid_step * index, excess


def _triple_value(r1: float, r2: float) -> float:
    h = standard_kernel_table().h
    return 0.5 * float(h(r1 + r2) - h(r1) - h(r2))


def minimize_ebar3_standard(
    grid_max: float = 6.0, grid_step: float = 0.01, tol: float = 1e-6
) -> tuple[float, float, float]:
    """min over r1, r2 >= 0 of (h~(r1 + r2) - h~(r1) - h~(r2)) / 2.

    The collinear reduction leaves two distances; a coarse grid picks the start
    and coordinate descent refines it.
    """
    grid, excess = _pair_excess_grid(grid_max, grid_step)
    i, j = np.unravel_index(int(np.argmin(excess)), excess.shape)
    r1, r2 = float(grid[i]), float(grid[j])
    value = _triple_value(r1, r2)
    for sweep in range(200):
        previous = (r1, r2)
        r1, _ = minimize_scalar(
            lambda x: _triple_value(x, r2),
            max(0.0, r1 - grid_step), min(grid_max, r1 + grid_step),
            tol=0.1 * tol, grid_points=16,
        )
        r2, value = minimize_scalar(
            lambda x: _triple_value(r1, x),
            max(0.0, r2 - grid_step), min(grid_max, r2 + grid_step),
            tol=0.1 * tol, grid_points=16,
        )
        if max(abs(r1 - previous[0]), abs(r2 - previous[1])) < tol:
            logger.debug("ebar3 descent converged after %d sweeps", sweep + 1)
            break
    return r1, r2, value


def superadditivity_minimum(
    c: float, grid_max: float = 6.0, grid_step: float = 0.01
) -> tuple[float, float, float]:
    """Smallest f(x + y) - f(x) - f(y) for f = h~ - c over the grid, with its location."""
    if not c > 0:
        raise DomainError(f"c must be > 0, got {c}")
    grid, excess = _pair_excess_grid(grid_max, grid_step)
    i, j = np.unravel_index(int(np.argmin(excess)), excess.shape)
    return float(excess[i, j]) + c, float(grid[i]), float(grid[j])


def superadditivity_margin(c: float, grid_max: float = 6.0, grid_step: float = 0.01) -> float:
    return superadditivity_minimum(c, grid_max, grid_step)[0]


def _charge_patterns(n: int) -> list[tuple[int, ...]]:
    # particles are interchangeable and a global flip leaves U unchanged
    return [(1,) * p + (-1,) * (n - p) for p in range((n + 1) // 2, n + 1)]


def _compass_descent(
    positions: np.ndarray,
    charges: np.ndarray,
    kind: KernelKind,
    step: float,
    max_sweeps: int,
) -> tuple[np.ndarray, np.ndarray]:
    batch, n, _ = positions.shape
    current = positions.copy()
    energies = _batch_energies(current, charges, kind)
    steps = np.full(batch, step)
    for _ in range(max_sweeps):
        improved = np.zeros(batch, dtype=bool)
        for particle in range(n):
            for axis in range(2):
                for sign in (1.0, -1.0):
                    trial = current.copy()
                    trial[:, particle, axis] += sign * steps
                    trial_energies = _batch_energies(trial, charges, kind)
                    better = trial_energies < energies - 1e-15
                    current[better] = trial[better]
                    energies[better] = trial_energies[better]
                    improved |= better
        steps = np.where(improved, steps, 0.5 * steps)
        if np.all(steps < _DESCENT_TOLERANCE):
            return current, energies
    raise OptimizerStall(
        f"compass descent did not converge in {max_sweeps} sweeps; "
        f"largest step {float(np.max(steps)):.3e}"
    )


def specific_energies(
    kind: KernelKind,
    n: int,
    starts: int = DEFAULT_OPTIMIZER_STARTS,
    stream: RngStream | None = None,
    max_sweeps: int = 4000,
) -> tuple[float, float]:
    """(e_n, ebar_n): minimal U_n / n and minimal U_n / (n - 1) over non-neutral charges.

    Euclid's hat has closed values. For the standard kernel the minimum is taken
    by multi-start compass descent over positions for every charge pattern, so
    the results are upper bounds on the true infima.
    """
    if not 2 <= n <= MAX_SPECIFIC_ENERGY_PARTICLES:
        raise DomainError(f"n must lie in [2, {MAX_SPECIFIC_ENERGY_PARTICLES}], got {n}")
    if kind is KernelKind.EUCLID_HAT:
        e_n = -(n - n % 2) / (2.0 * n)
        ebar_n = -0.5 if n % 2 else -(n - 2) / (2.0 * (n - 1))
        return e_n, ebar_n

    patterns = _charge_patterns(n)
    rng = (stream or RngStream(0)).generator()
    charges = np.repeat(np.array(patterns, dtype=float), starts, axis=0)
    positions = rng.uniform(-1.0, 1.0, size=(charges.shape[0], n, 2))
    _, energies = _compass_descent(positions, charges, kind, 0.25, max_sweeps)
    best = energies.reshape(len(patterns), starts).min(axis=1)
    neutral = np.array([sum(p) == 0 for p in patterns])
    e_n = float(best.min()) / n
    ebar_n = float(best[~neutral].min()) / (n - 1) if np.any(~neutral) else math.inf
    logger.info("standard kernel n=%d: e_n <= %.6f, ebar_n <= %.6f", n, e_n, ebar_n)
    return e_n, ebar_n


def quadratic_form_mc(
    config: ChargedConfiguration, scale: float, samples: int, stream: RngStream
) -> QuadraticFormEstimate:
    """sum_{i,j} s_i s_j h(|x_i - x_j| / s) as (4 / (pi s^2)) int (sum_j s_j chi_j(z))^2 dz.

    ``chi_j`` is the indicator of the disc of radius s/2 around x_j; the integral
    is estimated by uniform sampling of the bounding box of the discs.
    """
    if not scale > 0 or samples < 2:
        raise DomainError("quadratic_form_mc needs scale > 0 and samples >= 2")
    radius = 0.5 * scale
    lo = config.positions.min(axis=0) - radius
    hi = config.positions.max(axis=0) + radius
    area = float(np.prod(hi - lo))
    points = stream.generator().uniform(lo, hi, size=(samples, 2))
    delta = points[:, None, :] - config.positions[None, :, :]
    inside = np.sum(delta * delta, axis=-1) <= radius * radius
    field = inside @ np.array(config.charges, dtype=float)
    weight = 4.0 * area / (math.pi * scale * scale)
    values = weight * field * field
    exact = config.n + 2.0 * total_energy(config, KernelKind.EUCLID_HAT, scale)
    return QuadraticFormEstimate(
        estimate=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(samples)),
        exact=exact,
    )

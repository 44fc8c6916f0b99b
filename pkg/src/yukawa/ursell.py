"""Ursell functions from the scale flow and from the connected-graph Mayer sum."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from yukawa.constants import MAX_URSELL_PARTICLES
from yukawa.errors import DomainError, SizeLimit
from yukawa.models import ChargedConfiguration, KernelKind, ScaleWindow
from yukawa.numerics import (
    DEFAULT_GRID,
    OdeGridSpec,
    Trajectory,
    integrate_adaptive,
    ode_solve,
)
from yukawa.potentials import (
    WINDOW_QUADRATURE,
    density_function,
    kernel_function,
    windowed_v,
)

logger = logging.getLogger(__name__)

_DIRECT_ENUMERATION_LIMIT = 5


@dataclass(frozen=True, eq=False)
class SubsetTable:
    """f_I for every nonempty subset I of {0, ..., n-1}, indexed by bitmask."""

    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != 1 << self.n:
            raise ValueError(f"expected {1 << self.n} entries for n={self.n}, got {values.size}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @staticmethod
    def mask(subset: Iterable[int]) -> int:
        bits = 0
        for index in subset:
            bits |= 1 << index
        return bits

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def __getitem__(self, subset: int | Iterable[int]) -> float:
        bits = subset if isinstance(subset, int) else self.mask(subset)
        if not 0 < bits <= self.full_mask:
            raise KeyError(f"no subset with mask {bits} for n={self.n}")
        return float(self.values[bits])

    def top(self) -> float:
        return float(self.values[self.full_mask])

    def members(self, bits: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if bits >> i & 1)


@dataclass(frozen=True)
class FlowContext:
    beta: float
    window: ScaleWindow
    kind: KernelKind
    config: ChargedConfiguration

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.window.finite:
            raise ValueError("the flow runs on a finite window")
        if self.config.n > MAX_URSELL_PARTICLES:
            raise SizeLimit(
                f"flows are limited to {MAX_URSELL_PARTICLES} particles, got {self.config.n}"
            )


def mayer_factor(beta: float, charge_product: float, potential: float) -> float:
    return math.expm1(-beta * charge_product * potential)


@lru_cache(maxsize=None)
def _subset_structure(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # pair membership of every mask, and every split I = J + K with J holding the lowest bit of I
    pairs = list(itertools.combinations(range(n), 2))
    size = 1 << n
    membership = np.zeros((size, len(pairs)))
    for bits in range(size):
        for column, (i, j) in enumerate(pairs):
            if bits >> i & 1 and bits >> j & 1:
                membership[bits, column] = 1.0
    whole, part, rest = [], [], []
    for bits in range(1, size):
        low = bits & -bits
        others = bits ^ low
        sub = others
        while sub:
            sub = (sub - 1) & others
            left = low | sub
            if left != bits:
                whole.append(bits)
                part.append(left)
                rest.append(bits ^ left)
    multi = np.array([bin(bits).count("1") > 1 for bits in range(size)])
    return (
        membership,
        np.array(whole, dtype=int),
        np.array(part, dtype=int),
        np.array(rest, dtype=int),
        multi,
    )


def _pair_data(config: ChargedConfiguration) -> tuple[np.ndarray, np.ndarray]:
    upper_i, upper_j = np.triu_indices(config.n, k=1)
    distances = config.distances()[upper_i, upper_j]
    products = config.charge_products()[upper_i, upper_j]
    return distances, products


def _flow_rhs(ctx: FlowContext):
    membership, whole, part, rest, multi = _subset_structure(ctx.config.n)
    distances, products = _pair_data(ctx.config)
    kernel = kernel_function(ctx.kind)
    density = density_function(ctx.kind)
    weights = ctx.beta * products

    def rhs(t: float, f: np.ndarray) -> np.ndarray:
        rates = weights * float(density(np.array(t))) * kernel(distances / t)
        strength = membership @ rates
        derivative = np.where(multi, -strength * f, 0.0)
        coupling = (strength[whole] - strength[part] - strength[rest]) * f[part] * f[rest]
        np.add.at(derivative, whole, -coupling)
        return derivative

    return rhs


def _initial_state(n: int) -> np.ndarray:
    state = np.zeros(1 << n)
    for i in range(n):
        state[1 << i] = 1.0
    return state


def ursell_flow_trajectory(ctx: FlowContext, grid: OdeGridSpec = DEFAULT_GRID) -> Trajectory:
    """Integrate the subset system from f_I(t0) = [|I| = 1] and keep every grid sample."""
    breakpoints: tuple[float, ...] = ()
    if ctx.kind is KernelKind.EUCLID_HAT:
        distances, _ = _pair_data(ctx.config)
        breakpoints = tuple(float(r) for r in distances if r > 0)
    if ctx.window.empty:
        state = _initial_state(ctx.config.n)
        return Trajectory(t=np.array([ctx.window.t0]), y=state[None, :])
    trajectory = ode_solve(
        _flow_rhs(ctx),
        _initial_state(ctx.config.n),
        ctx.window.t0,
        ctx.window.t1,
        grid,
        breakpoints=breakpoints,
    )
    logger.debug(
        "ursell flow n=%d on [%g, %g] with %d nodes",
        ctx.config.n, ctx.window.t0, ctx.window.t1, trajectory.t.size,
    )
    return trajectory


def ursell_flow(ctx: FlowContext, grid: OdeGridSpec = DEFAULT_GRID) -> SubsetTable:
    return SubsetTable(ctx.config.n, ursell_flow_trajectory(ctx, grid).final)


def psi2_closed(
    beta: float,
    t0: float,
    t: float,
    r: float,
    kind: KernelKind = KernelKind.EUCLID_HAT,
) -> float:
    """Two opposite charges: beta int_{t0}^{t} g h(r/s) exp(beta int_s^t g h) ds.

    The inner integral is the windowed potential over [s, t].
    """
    if not 0 < t0 <= t:
        raise DomainError(f"psi2_closed needs 0 < t0 <= t, got t0={t0}, t={t}")
    if not r >= 0:
        raise DomainError(f"psi2_closed needs r >= 0, got {r}")
    lower = max(t0, r) if kind is KernelKind.EUCLID_HAT else t0
    if lower >= t:
        return 0.0
    kernel = kernel_function(kind)
    density = density_function(kind)

    def integrand(log_s: np.ndarray) -> np.ndarray:
        scales = np.exp(log_s)
        inner = np.array([windowed_v(kind, ScaleWindow(float(s), t), r) for s in scales])
        rates = scales * density(scales) * kernel(r / scales)
        return beta * rates * np.exp(beta * inner)

    return integrate_adaptive(
        integrand, math.log(lower), math.log(t), WINDOW_QUADRATURE, vectorized=True
    )


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    components = n
    for i, j in edges:
        root_i, root_j = find(i), find(j)
        if root_i != root_j:
            parent[root_i] = root_j
            components -= 1
    return components == 1


@lru_cache(maxsize=None)
def connected_graphs(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Edge sets of all connected labeled graphs on n vertices, by direct enumeration."""
    if n > _DIRECT_ENUMERATION_LIMIT:
        raise SizeLimit(f"direct enumeration is limited to {_DIRECT_ENUMERATION_LIMIT} vertices")
    pairs = list(itertools.combinations(range(n), 2))
    graphs = []
    for bits in range(1 << len(pairs)):
        edges = tuple(pairs[k] for k in range(len(pairs)) if bits >> k & 1)
        if _connected(n, edges):
            graphs.append(edges)
    return tuple(graphs)


def count_connected_graphs(n: int) -> int:
    """Number of connected labeled graphs on n vertices."""
    if n < 1:
        raise DomainError("n must be >= 1")
    counts = [0, 1]
    for size in range(2, n + 1):
        total = 2 ** math.comb(size, 2)
        for k in range(1, size):
            total -= math.comb(size - 1, k - 1) * counts[k] * 2 ** math.comb(size - k, 2)
        counts.append(total)
    return counts[n]


def _connected_sum_recursive(n: int, factors: dict[tuple[int, int], float]) -> float:
    # psi_I = Z_I - sum_{J holds min I, J != I} psi_J Z_{I \ J}, Z_I = prod (1 + F_ij) over I
    size = 1 << n
    weight = np.ones(size)
    for bits in range(1, size):
        members = [i for i in range(n) if bits >> i & 1]
        for i, j in itertools.combinations(members, 2):
            weight[bits] *= 1.0 + factors[(i, j)]
    psi = np.zeros(size)
    for bits in range(1, size):
        low = bits & -bits
        others = bits ^ low
        value = weight[bits]
        sub = others
        while sub:
            sub = (sub - 1) & others
            left = low | sub
            if left != bits:
                value -= psi[left] * weight[bits ^ left]
        psi[bits] = value
    return float(psi[size - 1])


def ursell_graph_sum(
    config: ChargedConfiguration,
    beta: float,
    window: ScaleWindow,
    kind: KernelKind = KernelKind.EUCLID_HAT,
) -> float:
    """Sum over connected graphs of the product of Mayer factors exp(-beta s_i s_j v_ij) - 1."""
    n = config.n
    if n > MAX_URSELL_PARTICLES:
        raise SizeLimit(f"graph sums are limited to {MAX_URSELL_PARTICLES} particles, got {n}")
    if n == 1:
        return 1.0
    distances = config.distances()
    products = config.charge_products()
    factors = {
        (i, j): mayer_factor(beta, products[i, j], windowed_v(kind, window, float(distances[i, j])))
        for i, j in itertools.combinations(range(n), 2)
    }
    if n > _DIRECT_ENUMERATION_LIMIT:
        return _connected_sum_recursive(n, factors)
    return math.fsum(
        math.prod(factors[edge] for edge in edges) for edges in connected_graphs(n)
    )

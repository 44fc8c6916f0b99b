"""Data models shared across modules, with strict parsing for CLI configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from yukawa.constants import DEFAULT_TRUNCATION_ORDER, OUTPUT_FORMATS, SUBCOMMANDS


class KernelKind(str, Enum):
    """Per-scale kernel of a scale decomposition of the Yukawa potential."""

    EUCLID_HAT = "euclid-hat"
    STANDARD_BESSEL = "standard-bessel"


@dataclass(frozen=True)
class ScaleWindow:
    """Scale interval [t0, t1]; ``t1`` may be ``math.inf``.

    ``t0 == t1`` is accepted and describes an empty window.
    """

    t0: float
    t1: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise ValueError(f"t0 must be finite and > 0, got {self.t0}")
        if math.isnan(self.t1) or self.t1 < self.t0:
            raise ValueError(f"t1 must be >= t0, got t0={self.t0}, t1={self.t1}")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.t1)

    @property
    def empty(self) -> bool:
        return self.t0 == self.t1


@dataclass(frozen=True, eq=False)
class ChargedConfiguration:
    """Particles in the plane carrying charges +1 or -1."""

    positions: np.ndarray
    charges: tuple[int, ...]

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float).reshape(-1, 2)
        if positions.shape[0] != len(self.charges):
            raise ValueError("positions and charges must have the same length")
        if positions.shape[0] < 1:
            raise ValueError("a configuration needs at least one particle")
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        if any(charge not in (-1, 1) for charge in self.charges):
            raise ValueError("charges must be +1 or -1")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "charges", tuple(int(c) for c in self.charges))

    @classmethod
    def from_particles(
        cls, particles: Sequence[tuple[Sequence[float], int]]
    ) -> "ChargedConfiguration":
        return cls(
            positions=np.array([p for p, _ in particles], dtype=float),
            charges=tuple(c for _, c in particles),
        )

    @classmethod
    def collapsed(cls, charges: Sequence[int]) -> "ChargedConfiguration":
        return cls(positions=np.zeros((len(charges), 2)), charges=tuple(charges))

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "ChargedConfiguration":
        keys = set(payload.keys())
        if keys != {"positions", "charges"}:
            raise ValueError(f"Invalid keys {sorted(keys)}; expected ['charges', 'positions']")
        return cls(positions=np.array(payload["positions"], dtype=float),
                   charges=tuple(payload["charges"]))

    def to_dict(self) -> dict[str, Any]:
        return {"positions": self.positions.tolist(), "charges": list(self.charges)}

    @property
    def n(self) -> int:
        return len(self.charges)

    @property
    def net_charge(self) -> int:
        return sum(self.charges)

    def distances(self) -> np.ndarray:
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.sum(delta * delta, axis=-1))

    def charge_products(self) -> np.ndarray:
        sigma = np.array(self.charges, dtype=float)
        return np.outer(sigma, sigma)

    def translated(self, offset: Sequence[float]) -> "ChargedConfiguration":
        return ChargedConfiguration(self.positions + np.asarray(offset, dtype=float), self.charges)

    def rotated(self, angle: float) -> "ChargedConfiguration":
        c, s = math.cos(angle), math.sin(angle)
        rotation = np.array([[c, -s], [s, c]])
        return ChargedConfiguration(self.positions @ rotation.T, self.charges)

    def scaled(self, factor: float) -> "ChargedConfiguration":
        return ChargedConfiguration(self.positions * factor, self.charges)

    def permuted(self, order: Sequence[int]) -> "ChargedConfiguration":
        index = list(order)
        return ChargedConfiguration(self.positions[index], tuple(self.charges[i] for i in index))

    def flipped(self) -> "ChargedConfiguration":
        return ChargedConfiguration(self.positions, tuple(-c for c in self.charges))


@dataclass(frozen=True)
class ScanReport:
    """Outcome of a grid or Monte-Carlo scan."""

    name: str
    samples: int
    worst_margin: float
    violations: int = 0
    worst_configuration: dict[str, Any] | None = None
    fitted_exponent: float | None = None
    rows: tuple[dict[str, Any], ...] = ()
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["rows"] = list(self.rows)
        return payload


_NUMERIC_TUPLE_FIELDS = ("beta", "t0", "deltas")


@dataclass(frozen=True)
class RunConfig:
    """Validated flags of one CLI invocation."""

    subcommand: str
    output_path: str = "-"
    format: str | None = None
    seed: int = 0
    tol: float = 1e-8
    log_path: str | None = None
    beta: tuple[float, ...] = ()
    k: int = 1
    r: tuple[int, ...] = (1,)
    n_max: int = 8
    samples: int = 100000
    box: float = 1.0
    kind: str = KernelKind.EUCLID_HAT.value
    t0: tuple[float, ...] = ()
    t1: float = math.inf
    n_terms: int = DEFAULT_TRUNCATION_ORDER
    variant: str = "plain"
    steps_per_decade: int = 200
    x_min: float = 0.01
    x_max: float = 20.0
    points: int = 100
    c: float = 1.07
    grid_max: float = 6.0
    grid_step: float = 0.01
    s: float = 1.0
    configs: int = 50
    deltas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"Unknown subcommand '{self.subcommand}'")
        if self.format is not None and self.format not in OUTPUT_FORMATS:
            raise ValueError(f"--format must be one of {list(OUTPUT_FORMATS)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("--seed must be a 64-bit unsigned integer")
        if not self.tol > 0:
            raise ValueError("--tol must be > 0")
        if self.kind not in {kind.value for kind in KernelKind}:
            raise ValueError(f"--kind must be one of {[kind.value for kind in KernelKind]}")
        if self.variant not in ("plain", "lagrange", "improved"):
            raise ValueError("--variant must be plain, lagrange or improved")
        if any(not b > 0 for b in self.beta):
            raise ValueError("--beta values must be > 0")
        if self.k < 1:
            raise ValueError("--k must be >= 1")
        if any(r < 1 for r in self.r):
            raise ValueError("--r values must be >= 1")
        if self.n_max < 2:
            raise ValueError("--n-max must be >= 2")
        if self.samples < 1 or self.configs < 1 or self.points < 2:
            raise ValueError("--samples, --configs must be >= 1 and --points >= 2")
        if not self.box > 0:
            raise ValueError("--box must be > 0")
        if any(not t > 0 for t in self.t0):
            raise ValueError("--t0 values must be > 0")
        if not self.t1 > 0:
            raise ValueError("--t1 must be > 0")
        if any(not t < self.t1 for t in self.t0):
            raise ValueError("--t0 values must be < --t1")
        if self.n_terms < 2:
            raise ValueError("--n-terms must be >= 2")
        if self.steps_per_decade < 2:
            raise ValueError("--steps-per-decade must be >= 2")
        if not 0 < self.x_min < self.x_max:
            raise ValueError("--x-min and --x-max must satisfy 0 < x-min < x-max")
        if not self.c > 0:
            raise ValueError("--c must be > 0")
        if not 0 < self.grid_step < self.grid_max:
            raise ValueError("--grid-step and --grid-max must satisfy 0 < step < max")
        if not 0 < self.s <= 1:
            raise ValueError("--s must lie in (0, 1]")
        if any(not 0 < d < 1 for d in self.deltas):
            raise ValueError("--deltas values must lie in (0, 1)")

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        normalized = {str(key).replace("-", "_"): value for key, value in payload.items()}
        extra = sorted(set(normalized) - known)
        if extra:
            raise ValueError(f"Invalid keys. extra={extra}")
        if "subcommand" not in normalized:
            raise ValueError("Invalid keys. missing=['subcommand']")
        for key in _NUMERIC_TUPLE_FIELDS:
            if key in normalized:
                normalized[key] = _expect_real_tuple(normalized, key)
        if "r" in normalized:
            normalized["r"] = tuple(int(v) for v in _expect_real_tuple(normalized, "r"))
        return cls(**normalized)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @property
    def kernel_kind(self) -> KernelKind:
        return KernelKind(self.kind)

    def resolved_format(self, default: str) -> str:
        return self.format or default


def _expect_real_tuple(payload: dict[str, Any], key: str) -> tuple[float, ...]:
    value = payload[key]
    if isinstance(value, (int, float)):
        return (float(value),)
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"'{key}' must be a number or a list of numbers")
    if any(not isinstance(item, (int, float)) for item in value):
        raise ValueError(f"'{key}' must contain only numbers")
    return tuple(float(item) for item in value)

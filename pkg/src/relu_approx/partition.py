"""Shifted dyadic partitions of ``a + [0, 2)^d`` and boundary-shell diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MeasureError
from .measures import Z95, Measure

# Irrational nudge keeping cube faces off rational test points.
PERTURBATION = math.sqrt(2.0) * 2.0**-40


def shell_exponent(d: int, p: float, gamma: float) -> float:
    return d + 1 + p * gamma


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Cubes ``[a + w / 2**N, a + (w + 1) / 2**N)`` for ``w`` in ``{0..2**(N+1)-1}^d``."""

    offset: np.ndarray
    level: int
    shell_exponent: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.offset, dtype=np.float64))
        if a.ndim != 1:
            raise ValueError("offset must be a vector")
        if self.level < 1:
            raise ValueError("level must be >= 1")
        object.__setattr__(self, "offset", a)

    @property
    def dim(self) -> int:
        return self.offset.size

    @property
    def side(self) -> float:
        return 2.0**-self.level

    @property
    def per_axis(self) -> int:
        return 2 ** (self.level + 1)

    @property
    def index_count(self) -> int:
        return self.per_axis**self.dim

    @property
    def shell_width(self) -> float:
        return 2.0 ** (-self.shell_exponent * self.level)

    def lower(self, omega) -> np.ndarray:
        return self.offset + np.asarray(omega) / 2**self.level

    def upper(self, omega) -> np.ndarray:
        return self.offset + (np.asarray(omega) + 1) / 2**self.level

    def to_dict(self) -> dict:
        return {"offset": [float(v) for v in self.offset], "level": self.level, "k": self.shell_exponent}

    @classmethod
    def from_dict(cls, data: dict) -> "DyadicPartition":
        return cls(np.asarray(data["offset"]), int(data["level"]), float(data["k"]))


def draw_offset(d: int, rng_seed) -> np.ndarray:
    """Offset in ``(-3/2, -1/2]^d``, nudged by ``-sqrt(2) 2**-40`` per coordinate."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    u = rng.random(d)
    return -0.5 - u * (1.0 - 2.0**-30) - PERTURBATION


def locate(partition: DyadicPartition, x) -> np.ndarray:
    """Multi-index of the cube containing each point; ``(d,)`` or ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    a = partition.offset
    if pts.shape[1] != partition.dim:
        raise DomainError(f"points must have dimension {partition.dim}")
    if np.any(pts < a) or np.any(pts >= a + 2.0):
        raise DomainError("point outside [a, a + 2)^d")
    omega = np.floor((pts - a) * 2**partition.level).astype(np.int64)
    omega = np.clip(omega, 0, partition.per_axis - 1)
    # Agree with the endpoint formulas even when the floor rounds across a face.
    omega -= pts < partition.lower(omega)
    omega += pts >= partition.upper(omega)
    return omega[0] if single else omega


def _active_axis(partition: DyadicPartition, i: int):
    j = np.arange(partition.per_axis)
    lo = partition.offset[i] + j / 2**partition.level
    hi = partition.offset[i] + (j + 1) / 2**partition.level
    keep = (lo <= 0.5) & (hi > -0.5)
    if np.any(lo[keep] == 0.5) or np.any(hi[keep] == -0.5):
        raise DomainError("a cube face coincides with the boundary of Q; redraw the offset")
    lo_c = np.maximum(lo[keep], -0.5)
    hi_c = np.minimum(hi[keep], 0.5)
    return j[keep], 0.5 * (lo_c + hi_c)


def active_cubes(partition: DyadicPartition) -> tuple[np.ndarray, np.ndarray]:
    """Multi-indices of cubes meeting Q, with one anchor in ``Q° ∩ cube`` each.

    Returns ``(omegas, anchors)``, both of shape ``(m, d)``. Anchors are the
    centers of the cubes clipped to Q.
    """
    per_axis = [_active_axis(partition, i) for i in range(partition.dim)]
    idx = np.meshgrid(*[p[0] for p in per_axis], indexing="ij")
    mid = np.meshgrid(*[p[1] for p in per_axis], indexing="ij")
    omegas = np.stack([g.ravel() for g in idx], axis=1)
    anchors = np.stack([g.ravel() for g in mid], axis=1)
    return omegas, anchors


@dataclass(frozen=True)
class ShellMass:
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    samples: int

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "ci": [self.ci_low, self.ci_high], "hits": self.hits, "samples": self.samples}


def in_shell(partition: DyadicPartition, x: np.ndarray) -> np.ndarray:
    """True where a point lies within the shell width of its own cube's faces."""
    omega = locate(partition, x)
    w = partition.shell_width
    lo = partition.lower(omega)
    hi = partition.upper(omega)
    return np.any((x < lo + w) | (x > hi - w), axis=1)


def _shell_from_hits(hits: int, n: int, mass: float) -> ShellMass:
    q = hits / n
    half = Z95 * math.sqrt(q * (1 - q) / n)
    return ShellMass(mass * q, mass * max(0.0, q - half), mass * min(1.0, q + half), int(hits), n)


def shell_mass(partition: DyadicPartition, mu: Measure, samples: int, rng: np.random.Generator) -> ShellMass:
    """Monte Carlo mass of the union of boundary shells, with a 95% interval."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if mu.total_mass <= 0:
        raise MeasureError("measure has zero mass")
    x = mu.sample(samples, rng)
    return _shell_from_hits(int(np.count_nonzero(in_shell(partition, x))), samples, mu.total_mass)


@dataclass(frozen=True)
class DecayDiagnostic:
    offset: np.ndarray
    levels: tuple[int, ...]
    shells: tuple[ShellMass, ...]
    slope: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.threshold

    def to_dict(self) -> dict:
        return {
            "offset": [float(v) for v in self.offset],
            "levels": list(self.levels),
            "shell_mass": [s.to_dict() for s in self.shells],
            "slope": self.slope,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def decay_slope(levels, estimates) -> float:
    """Least-squares slope of ``log2(mass)`` against level over nonzero estimates.

    Levels with no shell hit carry no information at Monte Carlo resolution and
    are skipped; with fewer than two resolved levels the mass is undetectable
    from the first resolved level on and the slope is reported as ``-inf``.
    """
    lv = np.asarray(levels, dtype=np.float64)
    est = np.asarray(estimates, dtype=np.float64)
    keep = est > 0
    if np.count_nonzero(keep) < 2:
        return -math.inf
    return float(np.polyfit(lv[keep], np.log2(est[keep]), 1)[0])


def shell_decay(offset, mu: Measure, p: float, gamma: float, rng: np.random.Generator,
                levels=(2, 3, 4, 5, 6), samples: int = 100_000, slack: float = 0.7) -> DecayDiagnostic:
    """Shell mass across levels for one offset; one sample set serves all levels."""
    offset = np.asarray(offset, dtype=np.float64)
    d = offset.size
    k = shell_exponent(d, p, gamma)
    x = mu.sample(samples, rng)
    shells = []
    for level in levels:
        part = DyadicPartition(offset, level, k)
        shells.append(_shell_from_hits(int(np.count_nonzero(in_shell(part, x))), samples, mu.total_mass))
    slope = decay_slope(levels, [s.estimate for s in shells])
    return DecayDiagnostic(offset, tuple(levels), tuple(shells), slope, -p * gamma * slack)

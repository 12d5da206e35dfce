"""Finite Borel measures on ``Q = [-1/2, 1/2]^d`` given by samplers.

Measures may be singular (segments, Cantor dust) or discrete, so all
integrals are Monte Carlo estimates over ``mu / mu(Q)``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import EvaluationError, MeasureError

Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class Measure:
    name: str
    dim: int
    total_mass: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray] | None = None
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if not (math.isfinite(self.total_mass) and self.total_mass > 0):
            raise MeasureError(f"total mass must be finite and positive, got {self.total_mass}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` points from ``mu / mu(Q)``; points outside Q are redrawn."""
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            x = np.asarray(self.sampler(rng, n - out.shape[0]), dtype=np.float64).reshape(-1, self.dim)
            out = np.vstack([out, x[np.all(np.abs(x) <= 0.5, axis=1)]])
        return out[:n]


def uniform(d: int) -> Measure:
    return Measure("uniform", d, 1.0, lambda rng, n: rng.uniform(-0.5, 0.5, (n, d)), lambda x: np.ones(len(x)))


def truncated_gaussian(d: int, center=0.0, sigma: float = 0.25) -> Measure:
    c = np.broadcast_to(np.asarray(center, dtype=np.float64), (d,)).copy()
    if sigma <= 0:
        raise MeasureError("sigma must be positive")

    def draw(rng, n):
        x = rng.normal(c, sigma, (max(n, 16) * 2, d))
        return x[np.all(np.abs(x) <= 0.5, axis=1)][:n]

    return Measure(f"truncated-gaussian({_fmt(c)},{sigma})", d, 1.0, draw)


def product_beta(d: int, a: float, b: float) -> Measure:
    if a <= 0 or b <= 0:
        raise MeasureError("beta parameters must be positive")
    return Measure(f"product-beta({a},{b})", d, 1.0, lambda rng, n: rng.beta(a, b, (n, d)) - 0.5)


def segment(d: int, anchor, direction) -> Measure:
    """Uniform measure on the chord of the line ``anchor + t direction`` inside Q."""
    p = np.broadcast_to(np.asarray(anchor, dtype=np.float64), (d,)).copy()
    v = np.broadcast_to(np.asarray(direction, dtype=np.float64), (d,)).copy()
    if np.any(np.abs(p) > 0.5):
        raise MeasureError("segment anchor must lie in Q")
    if not np.any(v):
        raise MeasureError("segment direction must be nonzero")
    lo, hi = -np.inf, np.inf
    for pi, vi in zip(p, v):
        if vi != 0:
            t1, t2 = (-0.5 - pi) / vi, (0.5 - pi) / vi
            lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))

    def draw(rng, n):
        t = rng.uniform(lo, hi, n)
        return p[None, :] + t[:, None] * v[None, :]

    return Measure(f"segment({_fmt(p)},{_fmt(v)})", d, 1.0, draw)


def cantor(d: int, depth: int) -> Measure:
    """Uniform measure on the depth-``depth`` middle-thirds Cantor set, per coordinate."""
    if depth < 0:
        raise MeasureError("cantor depth must be >= 0")
    scales = 2.0 * 3.0 ** -np.arange(1, depth + 1)

    def draw(rng, n):
        bits = rng.integers(0, 2, (n, d, depth))
        left = -0.5 + bits @ scales if depth else np.full((n, d), -0.5)
        return left + rng.uniform(0.0, 3.0**-depth, (n, d))

    return Measure(f"cantor({depth})", d, 1.0, draw)


def discrete(atoms, weights, name: str = "discrete") -> Measure:
    atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if atoms.shape[0] != weights.size or weights.size == 0:
        raise MeasureError("need one positive weight per atom")
    if np.any(weights <= 0):
        raise MeasureError("atom weights must be positive")
    if np.any(np.abs(atoms) > 0.5):
        bad = atoms[np.any(np.abs(atoms) > 0.5, axis=1)][0]
        raise MeasureError(f"atom {bad.tolist()} lies outside Q")
    total = float(weights.sum())
    probs = weights / total

    def draw(rng, n):
        return atoms[rng.choice(len(atoms), size=n, p=probs)]

    return Measure(name, atoms.shape[1], total, draw, atoms=atoms, weights=weights)


def read_atoms(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``x_1,...,x_d,weight`` rows; ``#`` starts a comment."""
    with open(path, newline="") as fh:
        lines = [ln for ln in (line.split("#", 1)[0].strip() for line in fh) if ln]
    rows = list(csv.reader(lines))
    if not rows:
        raise MeasureError(f"{path}: no rows")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "weight" or any(not h.startswith("x_") for h in header[:-1]):
        raise MeasureError(f"{path}: header must be x_1,...,x_d,weight")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise MeasureError(f"{path}: every row needs {len(header)} values")
    return data[:, :-1], data[:, -1]


def write_atoms(path, atoms, weights) -> None:
    atoms = np.atleast_2d(atoms)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i + 1}" for i in range(atoms.shape[1])] + ["weight"])
        for a, wt in zip(atoms, weights):
            w.writerow([repr(float(v)) for v in a] + [repr(float(wt))])


_SPEC = re.compile(r"^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$")


def _vec(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(":")])


def _fmt(v) -> str:
    return ":".join(repr(float(x)) for x in np.ravel(v))


def builtin_measure(spec: str, d: int) -> Measure:
    """Parse a measure spec string.

    Accepted forms (vectors are ``:``-separated, scalars broadcast)::

        uniform
        truncated-gaussian(center, sigma)
        product-beta(a, b)
        segment(anchor, direction)
        cantor(depth)
        discrete(path/to/atoms.csv)
    """
    match = _SPEC.match(spec)
    if not match:
        raise MeasureError(f"malformed measure spec {spec!r}")
    name, argtext = match.group(1), match.group(2)
    args = [a.strip() for a in argtext.split(",")] if argtext else []
    try:
        if name == "uniform" and not args:
            return uniform(d)
        if name == "truncated-gaussian" and len(args) <= 2:
            center = _vec(args[0]) if args else 0.0
            sigma = float(args[1]) if len(args) > 1 else 0.25
            return truncated_gaussian(d, center, sigma)
        if name == "product-beta" and len(args) == 2:
            return product_beta(d, float(args[0]), float(args[1]))
        if name == "segment" and len(args) == 2:
            return segment(d, _vec(args[0]), _vec(args[1]))
        if name == "cantor" and len(args) == 1:
            return cantor(d, int(args[0]))
        if name == "discrete" and len(args) == 1:
            atoms, weights = read_atoms(args[0])
            if atoms.shape[1] != d:
                raise MeasureError(f"atoms have dimension {atoms.shape[1]}, expected {d}")
            return discrete(atoms, weights, name=f"discrete({args[0]})")
    except (ValueError, OSError) as exc:
        if isinstance(exc, MeasureError):
            raise
        raise MeasureError(f"bad measure spec {spec!r}: {exc}") from exc
    raise MeasureError(f"unknown or malformed measure spec {spec!r}")


# --------------------------------------------------------------------- distances


@dataclass(frozen=True)
class LpEstimate:
    value: float
    ci_low: float
    ci_high: float
    samples: int

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low

    def to_dict(self) -> dict:
        return {"value": self.value, "ci": [self.ci_low, self.ci_high], "samples": self.samples}


def _evaluate_unique(fn, x: np.ndarray, label: str) -> np.ndarray:
    uniq, inverse = np.unique(x, axis=0, return_inverse=True)
    vals = np.asarray(fn(uniq), dtype=np.float64).reshape(len(uniq), -1)[:, 0]
    bad = ~np.isfinite(vals)
    if np.any(bad):
        point = uniq[np.argmax(bad)]
        raise EvaluationError(f"{label} is not finite at {point.tolist()}", point=point)
    return vals[inverse.ravel()]


def lp_distance(f, g, mu: Measure, p: float, samples: int, rng: np.random.Generator) -> LpEstimate:
    """Monte Carlo ``||f - g||_{L^p(mu)}`` with a delta-method 95% interval."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    if not 1 <= p < math.inf:
        raise ValueError("p must lie in [1, inf)")
    x = mu.sample(samples, rng)
    diff = np.abs(_evaluate_unique(f, x, "f") - _evaluate_unique(g, x, "g")) ** p
    mean = float(diff.mean())
    value = (mu.total_mass * mean) ** (1.0 / p)
    if mean == 0.0:
        return LpEstimate(0.0, 0.0, 0.0, samples)
    se = float(diff.std(ddof=1)) / math.sqrt(samples)
    half = Z95 * value / (p * mean) * se
    return LpEstimate(value, max(0.0, value - half), value + half, samples)


def scan_points(d: int, grid_points_per_axis: int) -> np.ndarray:
    """Tensor grid on Q for ``d <= 3``, Latin hypercube of equal size beyond."""
    if grid_points_per_axis < 2:
        raise ValueError("need at least 2 grid points per axis")
    if d <= 3:
        axis = np.linspace(-0.5, 0.5, grid_points_per_axis)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    n = grid_points_per_axis**3
    return qmc.LatinHypercube(d=d, seed=0).random(n) - 0.5


def sup_distance(f, g, d: int, grid_points_per_axis: int) -> float:
    """Largest ``|f - g|`` over a finite scan of Q: a lower bound on the sup-norm."""
    x = scan_points(d, grid_points_per_axis)
    fv = np.asarray(f(x), dtype=np.float64).reshape(len(x), -1)[:, 0]
    gv = np.asarray(g(x), dtype=np.float64).reshape(len(x), -1)[:, 0]
    return float(np.max(np.abs(fv - gv)))

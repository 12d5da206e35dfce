"""Target functions, local Taylor coefficients and Hölder remainder checks.

Coefficients come from a derivative oracle when the function has one and from
tensor-product finite-difference stencils otherwise. Stencils have a common
step and are shifted, never shrunk, to stay inside Q near its boundary.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import hermite
from scipy.interpolate import RegularGridInterpolator

from .errors import BoundError, DomainError, EvaluationError

Evaluator = Callable[[np.ndarray], np.ndarray]
Oracle = Callable[[tuple, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """``f`` on Q with declared smoothness ``beta`` and ``||f||_{C^beta} <= holder_bound``."""

    name: str
    dim: int
    beta: float
    holder_bound: float
    evaluator: Evaluator
    derivative_oracle: Oracle | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.holder_bound > 0:
            raise ValueError("holder bound must be positive")

    @property
    def degree(self) -> int:
        """``n`` in ``beta = n + sigma`` with ``sigma in (0, 1]``."""
        return max(0, math.ceil(self.beta) - 1)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.asarray(self.evaluator(x), dtype=np.float64).reshape(len(x))

    def derivative(self, alpha, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.asarray(self.derivative_oracle(tuple(alpha), x), dtype=np.float64).reshape(len(x))

    def check_bound(self, rng: np.random.Generator, samples: int = 1000) -> float:
        """Spot-check ``|f| <= B`` on random points; returns the largest ``|f|`` seen."""
        x = rng.uniform(-0.5, 0.5, (samples, self.dim))
        vals = self(x)
        if not np.all(np.isfinite(vals)):
            point = x[np.argmax(~np.isfinite(vals))]
            raise EvaluationError(f"{self.name} is not finite at {point.tolist()}", point=point)
        top = float(np.max(np.abs(vals)))
        if top > self.holder_bound:
            raise BoundError(f"|{self.name}| reaches {top:.6g} > declared bound {self.holder_bound}")
        return top


# ------------------------------------------------------------------- registry


def constant(d: int, value: float, beta: float, bound: float) -> TargetFunction:
    def oracle(alpha, x):
        return np.full(len(x), value if not any(alpha) else 0.0)

    return TargetFunction(f"constant({value})", d, beta, bound, lambda x: np.full(len(x), value), oracle)


def polynomial(d: int, coefficients, beta: float, bound: float) -> TargetFunction:
    """``f(x) = sum_k c_k (x_1 + ... + x_d)**k``."""
    c = np.asarray(coefficients, dtype=np.float64)

    def oracle(alpha, x):
        s = x.sum(axis=1)
        order = sum(alpha)
        out = np.zeros(len(x))
        for k in range(order, c.size):
            out += c[k] * math.perm(k, order) * s ** (k - order)
        return out

    return TargetFunction(
        f"polynomial({','.join(repr(float(v)) for v in c)})", d, beta, bound,
        lambda x: np.polynomial.polynomial.polyval(x.sum(axis=1), c), oracle,
    )


def trig_product(d: int, k: float, beta: float, bound: float) -> TargetFunction:
    """``f(x) = sin(k pi x_1) prod_{i > 1} cos(k pi x_i)``."""
    w = k * math.pi

    def oracle(alpha, x):
        out = w ** alpha[0] * np.sin(w * x[:, 0] + alpha[0] * math.pi / 2)
        for i in range(1, d):
            out = out * w ** alpha[i] * np.cos(w * x[:, i] + alpha[i] * math.pi / 2)
        return out

    return TargetFunction(f"trig-product({k})", d, beta, bound, lambda x: oracle((0,) * d, x), oracle)


def gaussian(d: int, center, sigma: float, beta: float, bound: float) -> TargetFunction:
    """``exp(-|x - c|**2 / (2 sigma**2))``; derivatives through Hermite polynomials."""
    c = np.broadcast_to(np.asarray(center, dtype=np.float64), (d,)).copy()
    scale = 1.0 / (sigma * math.sqrt(2.0))

    def oracle(alpha, x):
        t = (x - c) * scale
        out = np.exp(-np.sum(t * t, axis=1))
        for i, a in enumerate(alpha):
            if a:
                out = out * (-scale) ** a * hermite.hermval(t[:, i], [0] * a + [1])
        return out

    return TargetFunction(f"gaussian({_fmt(c)},{sigma})", d, beta, bound, lambda x: oracle((0,) * d, x), oracle)


def cusp(d: int, center, exponent: float, beta: float, bound: float) -> TargetFunction:
    """``|x - c|**exponent`` with the Euclidean norm."""
    c = np.broadcast_to(np.asarray(center, dtype=np.float64), (d,)).copy()

    def evaluate(x):
        return np.linalg.norm(x - c, axis=1) ** exponent

    return TargetFunction(f"cusp({_fmt(c)},{exponent})", d, beta, bound, evaluate)


def load_grid(path) -> np.ndarray:
    """Values on a uniform tensor grid over Q including its faces (``.npy`` or ``.csv``)."""
    path = str(path)
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=1)


def grid(d: int, values, beta: float, bound: float, label: str = "grid") -> TargetFunction:
    """Multilinear interpolant of tabulated values; Lipschitz at best, so ``beta <= 1``."""
    if beta > 1:
        raise ValueError("tabulated grid functions support beta <= 1 only")
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != d or min(v.shape) < 2:
        raise ValueError(f"grid values must be a {d}-dimensional array with >= 2 points per axis")
    axes = [np.linspace(-0.5, 0.5, n) for n in v.shape]
    interp = RegularGridInterpolator(axes, v, method="linear")
    return TargetFunction(f"grid({label})", d, beta, bound, lambda x: interp(np.clip(x, -0.5, 0.5)))


_SPEC = re.compile(r"^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$")


def _vec(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(":")])


def _fmt(v) -> str:
    return ":".join(repr(float(x)) for x in np.ravel(v))


def parse_function(spec: str, d: int, beta: float, bound: float) -> TargetFunction:
    """Build a registry function from a spec string.

    Forms (vectors ``:``-separated, scalars broadcast)::

        zero | constant(c) | polynomial(c0,c1,...) | trig-product(k)
        gaussian(center,sigma) | cusp(center[,exponent]) | grid(path)
    """
    match = _SPEC.match(spec)
    if not match:
        raise ValueError(f"malformed function spec {spec!r}")
    name, argtext = match.group(1), match.group(2)
    args = [a.strip() for a in argtext.split(",")] if argtext else []
    if name == "zero" and not args:
        return constant(d, 0.0, beta, bound)
    if name == "constant" and len(args) == 1:
        return constant(d, float(args[0]), beta, bound)
    if name == "polynomial" and args:
        return polynomial(d, [float(a) for a in args], beta, bound)
    if name in ("trig-product", "sin-product") and len(args) <= 1:
        return trig_product(d, float(args[0]) if args else 1.0, beta, bound)
    if name == "gaussian" and len(args) <= 2:
        center = _vec(args[0]) if args else 0.0
        return gaussian(d, center, float(args[1]) if len(args) > 1 else 0.25, beta, bound)
    if name == "cusp" and len(args) <= 2:
        center = _vec(args[0]) if args else 0.0
        return cusp(d, center, float(args[1]) if len(args) > 1 else beta, beta, bound)
    if name == "grid" and len(args) == 1:
        return grid(d, load_grid(args[0]), beta, bound, label=args[0])
    raise ValueError(f"unknown or malformed function spec {spec!r}")


# ----------------------------------------------------------------- coefficients


def exponents_for(d: int, degree: int) -> list[tuple[int, ...]]:
    """Multi-indices with ``|a| <= degree``, graded order."""
    out = []
    for k in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), k):
            out.append(tuple(combo.count(i) for i in range(d)))
    return out


def fd_step(beta: float, eps_target: float) -> float:
    n = max(0, math.ceil(beta) - 1)
    return min(eps_target ** (1.0 / beta), 0.25) / (2 * n + 2)


def stencil_weights(offsets, order: int) -> np.ndarray:
    """Weights ``w`` with ``sum_j w_j f(x + t_j h) / h**order ~ f^(order)(x)``."""
    t = np.asarray(offsets, dtype=np.float64)
    vander = np.vander(t, increasing=True).T
    rhs = np.zeros(t.size)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


def _axis_stencils(x: np.ndarray, order: int, h: float, accuracy: int):
    """Per-center offsets ``(m, P)`` and weights ``(m, P)`` for one axis."""
    r = math.ceil((order + accuracy - 1) / 2)
    base = np.arange(-r, r + 1)
    lo = np.ceil((-0.5 - x) / h + r)
    hi = np.floor((0.5 - x) / h - r)
    shift = np.clip(0, lo, hi).astype(np.int64)
    offsets = base[None, :] + shift[:, None]
    weights = np.empty(offsets.shape)
    for s in np.unique(shift):
        weights[shift == s] = stencil_weights(base + s, order)
    return offsets, weights


def _fd_derivative(f: TargetFunction, centers: np.ndarray, alpha, h: float, accuracy: int) -> np.ndarray:
    m, d = centers.shape
    axes = [i for i in range(d) if alpha[i]]
    if not axes:
        return f(centers)
    stencils = [_axis_stencils(centers[:, i], alpha[i], h, accuracy) for i in axes]
    sizes = [s[0].shape[1] for s in stencils]
    total = np.zeros(m)
    for combo in itertools.product(*(range(n) for n in sizes)):
        pts = centers.copy()
        w = np.ones(m)
        for (offsets, weights), i, j in zip(stencils, axes, combo):
            pts[:, i] = centers[:, i] + offsets[:, j] * h
            w = w * weights[:, j]
        total += w * f(pts)
    return total / h ** sum(alpha)


def _check_centers(centers: np.ndarray, d: int) -> np.ndarray:
    c = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if c.shape[1] != d:
        raise DomainError(f"centers must have dimension {d}")
    if np.any(np.abs(c) >= 0.5):
        bad = c[np.any(np.abs(c) >= 0.5, axis=1)][0]
        raise DomainError(f"center {bad.tolist()} is not interior to Q")
    return c


def taylor_coefficient_matrix(f: TargetFunction, centers, exponents=None, eps_target: float = 2.0**-10,
                              accuracy_order: int = 6) -> np.ndarray:
    """``c[l, j] = d^a f(x_l) / a!`` for ``a = exponents[j]``; shape ``(m, len(exponents))``."""
    c = _check_centers(centers, f.dim)
    exps = exponents_for(f.dim, f.degree) if exponents is None else [tuple(a) for a in exponents]
    h = fd_step(f.beta, eps_target)
    out = np.empty((c.shape[0], len(exps)))
    for j, a in enumerate(exps):
        if f.derivative_oracle is not None:
            deriv = f.derivative(a, c)
        else:
            deriv = _fd_derivative(f, c, a, h, accuracy_order)
        out[:, j] = deriv / math.prod(math.factorial(k) for k in a)
    if not np.all(np.isfinite(out)):
        row = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise EvaluationError(f"{f.name} not evaluable near {c[row].tolist()}", point=c[row])
    return out


def taylor_coefficients(f: TargetFunction, center, eps_target: float = 2.0**-10,
                        accuracy_order: int = 6) -> dict[tuple[int, ...], float]:
    """Taylor coefficients of degree ``<= n`` at one interior center."""
    exps = exponents_for(f.dim, f.degree)
    row = taylor_coefficient_matrix(f, np.atleast_1d(center)[None, :], exps, eps_target, accuracy_order)[0]
    return {a: float(v) for a, v in zip(exps, row)}


def evaluate_taylor(coefficients: dict, center, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    diff = x - np.asarray(center, dtype=np.float64)
    out = np.zeros(len(x))
    for a, c in coefficients.items():
        out += c * np.prod(diff ** np.array(a), axis=1)
    return out


def taylor_remainder_check(f: TargetFunction, center, coefficients: dict, probes: int,
                           rng: np.random.Generator | None = None) -> float:
    """Largest ``|f(x) - p(x)| / |x - center|**beta`` over the vertices of Q and random probes."""
    if probes < 100:
        raise ValueError("need at least 100 probes")
    rng = rng if rng is not None else np.random.default_rng(0)
    center = np.asarray(center, dtype=np.float64)
    corners = np.array(list(itertools.product((-0.5, 0.5), repeat=f.dim)))
    x = np.vstack([corners, rng.uniform(-0.5, 0.5, (probes, f.dim))])
    dist = np.linalg.norm(x - center, axis=1)
    keep = dist > 0
    resid = np.abs(f(x[keep]) - evaluate_taylor(coefficients, center, x[keep]))
    return float(np.max(resid / dist[keep] ** f.beta))

"""Cube localization gadgets.

``T(x, y) = sum_{l=0,1} (-1)**l B relu(relu((-1)**l y / B) - d + sum_i t_i(x_i))``
returns ``y`` on the shrunk cube ``[a + eps, b - eps]``, ``0`` off ``[a, b)`` and
stays within ``[-B, B]`` everywhere.

The trapezoids are realized as ``t_i = 1 - relu(1 - relu(u)) - relu(1 - relu(w))``
with ``u = (x - a_i) / eps`` and ``w = (b_i - x) / eps``. This is the same
function as the four-ramp formula but clamps huge ramp arguments to exact
0/1 values, so the gadget stays exact in double precision even for shell
widths like ``2**-45``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, MarginError
from .network import Layer, Network


@dataclass(frozen=True, eq=False)
class Cube:
    """Half-open box ``[lower, upper)``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("lower and upper must be vectors of equal length")
        if np.any(lo >= hi):
            raise ValueError("need lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def check_margin(self, eps: float):
        if not 0 < eps < np.min(self.upper - self.lower) / 2:
            raise MarginError(f"margin {eps} must lie in (0, {np.min(self.upper - self.lower) / 2})")

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower) & (x < self.upper), axis=1)

    def contains_shrunk(self, x, eps: float) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower + eps) & (x <= self.upper - eps), axis=1)


def trapezoid(bounds: tuple[float, float], eps: float) -> Network:
    """Two-layer network for the four-ramp trapezoid on ``[a, b]``."""
    a, b = float(bounds[0]), float(bounds[1])
    if not 0 < eps < (b - a) / 2:
        raise MarginError(f"margin {eps} must lie in (0, {(b - a) / 2})")
    first = Layer.from_dense(np.full((4, 1), 1.0 / eps), np.array([-a, -a - eps, -b + eps, -b]) / eps)
    second = Layer.from_dense([[1.0, -1.0, -1.0, 1.0]], [0.0])
    return Network(1, (first, second))


def trapezoid_formula(x, a: float, b: float, eps: float) -> np.ndarray:
    r = lambda t: np.maximum(t, 0.0)
    x = np.asarray(x, dtype=np.float64)
    return r((x - a) / eps) - r((x - a - eps) / eps) - r((x - b + eps) / eps) + r((x - b) / eps)


def localization_formula(x, y, lower, upper, eps: float, bound: float) -> np.ndarray:
    """Direct evaluation of ``T`` from the four-ramp trapezoids."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    d = x.shape[1]
    t = sum(trapezoid_formula(x[:, i], lower[i], upper[i], eps) for i in range(d))
    r = lambda s: np.maximum(s, 0.0)
    return bound * r(r(y / bound) - d + t) - bound * r(r(-y / bound) - d + t)


def localization_bank(lowers, uppers, eps: float, bound: float) -> Network:
    """``m`` localization gadgets sharing the input ``x``.

    Input ``(x_1..x_d, y_1..y_m)``, output ``(T_1(x, y_1), ..., T_m(x, y_m))``.
    Four layers, ``12 d + 8`` weights per cube at most.
    """
    lo = np.atleast_2d(np.asarray(lowers, dtype=np.float64))
    hi = np.atleast_2d(np.asarray(uppers, dtype=np.float64))
    if lo.shape != hi.shape:
        raise DimensionError("lowers and uppers must have equal shapes")
    m, d = lo.shape
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if not 0 < eps < np.min(hi - lo) / 2:
        raise MarginError(f"margin {eps} must lie in (0, {np.min(hi - lo) / 2})")
    inv = 1.0 / eps
    n_in = d + m
    cube = np.arange(m)
    axis = np.arange(d)

    # Layer 1, per cube: [u_1..u_d, w_1..w_d, y+, y-] -> 2d + 2 units.
    w1 = 2 * d + 2
    base = (cube * w1)[:, None]
    r_u = (base + axis).ravel()
    r_w = (base + d + axis).ravel()
    r_p = cube * w1 + 2 * d
    r_n = r_p + 1
    col_x = np.tile(axis, m)
    rows = np.concatenate([r_u, r_w, r_p, r_n])
    cols = np.concatenate([col_x, col_x, d + cube, d + cube])
    vals = np.concatenate([np.full(m * d, inv), np.full(m * d, -inv), np.full(m, 1.0 / bound), np.full(m, -1.0 / bound)])
    bias = np.zeros(m * w1)
    bias[r_u] = -(lo * inv).ravel()
    bias[r_w] = (hi * inv).ravel()
    l1 = Layer.from_triplets(rows, cols, vals, bias, n_in)

    # Layer 2: relu(1 - relu(u)), relu(1 - relu(w)) and pass-through of y+-.
    rows = np.concatenate([r_u, r_w, r_p, r_n])
    vals = np.concatenate([np.full(2 * m * d, -1.0), np.ones(2 * m)])
    bias = np.zeros(m * w1)
    bias[r_u] = 1.0
    bias[r_w] = 1.0
    l2 = Layer.from_triplets(rows, rows, vals, bias, m * w1)

    # Layer 3: z_+- = relu(y+- - sum_i (r_i + s_i)); the -d and +d cancel.
    shells = np.concatenate([r_u.reshape(m, d), r_w.reshape(m, d)], axis=1)
    z_p = 2 * cube
    z_n = z_p + 1
    rows = np.concatenate([z_p, z_n, np.repeat(z_p, 2 * d), np.repeat(z_n, 2 * d)])
    cols = np.concatenate([r_p, r_n, shells.ravel(), shells.ravel()])
    vals = np.concatenate([np.ones(2 * m), np.full(4 * m * d, -1.0)])
    l3 = Layer.from_triplets(rows, cols, vals, np.zeros(2 * m), m * w1)

    # Layer 4: T = B z_+ - B z_-.
    rows = np.concatenate([cube, cube])
    cols = np.concatenate([z_p, z_n])
    vals = np.concatenate([np.full(m, bound), np.full(m, -bound)])
    l4 = Layer.from_triplets(rows, cols, vals, np.zeros(m), 2 * m)
    return Network(n_in, (l1, l2, l3, l4))


def localization_net(cube: Cube, eps: float, bound: float) -> Network:
    """Four-layer gadget with input ``(x, y)`` of dimension ``d + 1``."""
    cube.check_margin(eps)
    return localization_bank(cube.lower[None, :], cube.upper[None, :], eps, bound)


def weight_bound(cube: Cube, eps: float, bound: float) -> float:
    """``d + B + (1 + |a|_inf + |b|_inf) / eps``."""
    return cube.dim + bound + (1 + np.max(np.abs(cube.lower)) + np.max(np.abs(cube.upper))) / eps


def weight_count_bound(d: int) -> int:
    return 12 * d + 10

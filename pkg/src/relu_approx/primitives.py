"""Sawtooth, squaring, multiplication and polynomial-family networks.

Everything is built from the hat function ``g(t) = 2 relu(t) - 4 relu(t - 1/2)
+ 2 relu(t - 1)`` and its iterates. ``t - sum_j g_j(t) / 4**j`` is the
piecewise-linear interpolant of ``t**2`` on the grid ``2**-m Z``, which gives
squaring; polarization turns squaring into multiplication.

A :class:`DepthBudget` chooses between the two regimes. In ``log`` mode depth
grows like ``log(1/delta)`` with constant width. In ``fixed`` mode the depth is
exactly the budget for every accuracy; consecutive sawtooth stages are
flattened into one wider hidden layer when they do not fit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BudgetError, DimensionError
from .network import Layer, Network, affine, compose, pad_depth, parallelize, sum_outputs

# Multiplication gates only ever see factors in [-1, 1].
_FACTOR_RANGE = 1.0


@dataclass(frozen=True)
class DepthBudget:
    mode: str = "fixed"
    max_depth: int | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "log"):
            raise ValueError(f"unknown depth mode {self.mode!r}")
        if self.mode == "fixed":
            if self.max_depth is None:
                raise ValueError("fixed mode needs max_depth")
            if self.max_depth < 4:
                raise BudgetError("fixed mode needs max_depth >= 4")

    @property
    def fixed(self) -> bool:
        return self.mode == "fixed"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "max_depth": self.max_depth}


def log2_ceil_beta(beta: float) -> int:
    """``ceil(log2(beta))`` clipped at 0; below 1 the polynomials are constants."""
    return max(0, math.ceil(math.log2(beta) - 1e-12))


def polynomial_depth_cap(beta: float, d: int) -> float:
    return 1 + (1 + log2_ceil_beta(beta)) * (11 + beta / d)


def default_budget(beta: float, d: int, mode: str = "fixed") -> DepthBudget:
    if mode == "log":
        return DepthBudget("log")
    return DepthBudget("fixed", max(4, math.floor(polynomial_depth_cap(beta, d))))


# --------------------------------------------------------------------- sawtooth


def hat(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t < 0.5, 2 * t, 2 * (1 - t)) * ((t >= 0) & (t <= 1))


def _block_sizes(m: int, stages: int) -> list[int]:
    """Split ``m`` compositions into at most ``stages`` equal-ish blocks."""
    if stages < 1:
        raise BudgetError("depth budget leaves no room for a sawtooth stage")
    size = math.ceil(m / stages)
    sizes = [size] * (m // size)
    if m % size:
        sizes.append(m % size)
    return sizes


def _pl_output_weights(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights ``c`` with ``f(t) = f(0) + sum_i c_i relu(t - i h)`` on [0, 1].

    ``values`` are samples of a continuous piecewise-linear ``f`` at the grid
    ``i h``, ``h = 1 / (len(values) - 1)``.
    """
    h = 1.0 / (values.size - 1)
    slopes = np.diff(values) / h
    return np.diff(slopes, prepend=0.0), float(values[0])


def _teeth_values(s: int) -> np.ndarray:
    return (np.arange(2**s + 1) % 2).astype(np.float64)


def _square_partial_values(s: int) -> np.ndarray:
    """Samples of ``sum_{i<=s} g_i(t) / 4**i`` on the grid ``2**-s Z``."""
    t = np.arange(2**s + 1) / 2**s
    return t - t**2


def sawtooth(order: int, depth_budget: DepthBudget) -> Network:
    """Network equal to the ``order``-fold composition of the hat on [0, 1]."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if depth_budget.fixed:
        sizes = _block_sizes(order, depth_budget.max_depth - 1)
    else:
        sizes = [1] * order
    net = None
    for s in sizes:
        block = _flat_sawtooth_block(s)
        net = block if net is None else compose(block, net)
    return net


def _flat_sawtooth_block(s: int) -> Network:
    if s == 1:
        first = Layer.from_dense(np.ones((3, 1)), [0.0, -0.5, -1.0])
        last = Layer.from_dense([[2.0, -4.0, 2.0]], [0.0])
        return Network(1, (first, last))
    n = 2**s
    first = Layer.from_dense(np.ones((n, 1)), -np.arange(n) / n)
    c, c0 = _pl_output_weights(_teeth_values(s))
    last = Layer.from_dense(c[None, :n], [c0])
    return Network(1, (first, last))


# --------------------------------------------------------------------- squaring


def square_terms(delta: float) -> int:
    """Number of sawtooth terms ``m = ceil(log4(1/delta))``."""
    return max(1, math.ceil(math.log(1.0 / delta, 4) - 1e-12))


def square_net(accuracy: float, depth_budget: DepthBudget) -> Network:
    """Network with ``|R(t) - t**2| <= accuracy`` for ``t`` in [0, 1].

    Uses ``m = ceil(log4(1/accuracy))`` sawtooth terms; the realization is
    the interpolant of ``t**2`` on ``2**-m Z``, so the error is ``4**-(m+1)``.
    """
    if not 0.0 < accuracy < 0.5:
        raise ValueError("accuracy must lie in (0, 1/2)")
    m = square_terms(accuracy)
    if depth_budget.fixed:
        return _square_with_depth(m, depth_budget.max_depth)
    return _square_from_blocks([1] * m)


def _square_with_depth(m: int, depth: int) -> Network:
    return pad_depth(_square_from_blocks(_block_sizes(m, depth - 1)), depth)


def _square_from_blocks(sizes: list[int]) -> Network:
    """Chain of blocks; block ``j`` carries the running interpolant ``acc``.

    Hidden layer ``j`` holds ``relu(tau_j - i / 2**s_j)`` for the block input
    ``tau_j`` (``tau_1 = t``) and, from the second layer on, the accumulator
    ``acc_{j-1} = f_{s_1 + ... + s_{j-1}}(t) >= t**2 >= 0``.
    """
    layers = []
    offset = 0
    prev = None  # (n_hidden, tooth weights, tooth bias, partial weights, partial bias, acc column)
    for j, s in enumerate(sizes):
        n = 2**s
        steps = -np.arange(n) / n
        if prev is None:
            layers.append(Layer.from_dense(np.ones((n, 1)), steps))
        else:
            width, tw, tb, pw, pb, acc_col = prev
            rows, cols, vals = [], [], []
            # tau_{j} = teeth(previous block hidden units), feeding n ramps
            for i in range(n):
                for k, w in enumerate(tw):
                    if w != 0.0:
                        rows.append(i), cols.append(k), vals.append(w)
            bias = steps + tb
            # acc_j = acc_{j-1} - partial / 4**offset_prev
            acc_row = n
            scale = 4.0 ** -prev_offset
            for k, w in enumerate(pw):
                if w != 0.0:
                    rows.append(acc_row), cols.append(k), vals.append(-scale * w)
            rows.append(acc_row), cols.append(acc_col), vals.append(1.0)
            bias = np.append(bias, -scale * pb)
            layers.append(Layer.from_triplets(rows, cols, vals, bias, width))
        tw, tb = _pl_output_weights(_teeth_values(s))
        pw, pb = _pl_output_weights(_square_partial_values(s))
        tw, pw = tw[:n], pw[:n]
        acc_col = 0 if prev is None else n
        width = n if prev is None else n + 1
        prev = (width, tw, tb, pw, pb, acc_col)
        prev_offset = offset
        offset += s
    width, tw, tb, pw, pb, acc_col = prev
    scale = 4.0 ** -prev_offset
    row = np.zeros(width)
    row[: len(pw)] = -scale * pw
    row[acc_col] += 1.0
    layers.append(Layer.from_dense(row[None, :], [-scale * pb]))
    return Network(1, tuple(layers))


# --------------------------------------------------------------------- multiplication


def _multiply_square_accuracy(range_bound: float, accuracy: float) -> float:
    # Three squares of |z| / (2M), each scaled by (2M)^2 / 2.
    return accuracy / (6.0 * range_bound**2)


def multiply_net(range_bound: float, accuracy: float, depth_budget: DepthBudget) -> Network:
    """Network with ``|R(u, v) - u v| <= accuracy`` on ``[-M, M]**2``.

    Uses ``u v = ((u + v)**2 - u**2 - v**2) / 2`` with each square evaluated on
    ``|z| / (2M)`` in [0, 1].
    """
    if range_bound < 1:
        raise ValueError("range_bound must be >= 1")
    if not 0.0 < accuracy < 0.5:
        raise ValueError("accuracy must lie in (0, 1/2)")
    delta_sq = _multiply_square_accuracy(range_bound, accuracy)
    if depth_budget.fixed:
        sq = _square_with_depth(square_terms(delta_sq), depth_budget.max_depth - 1)
    else:
        sq = square_net(delta_sq, depth_budget)
    forms = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    r = 2.0 * range_bound
    split = Layer.from_dense(np.vstack([forms, -forms]), np.zeros(6))
    norm = Layer.from_dense(np.hstack([np.eye(3), np.eye(3)]) / r, np.zeros(3))
    front = Network(2, (split, norm))
    squares = parallelize([sq, sq, sq], shared_input=False)
    net = compose(squares, front)
    return sum_outputs(net, 0.5 * r * r * np.array([1.0, -1.0, -1.0]))


def multiply_depth(accuracy: float, depth_budget: DepthBudget) -> int:
    if depth_budget.fixed:
        return depth_budget.max_depth
    return square_terms(_multiply_square_accuracy(_FACTOR_RANGE, accuracy)) + 2


# --------------------------------------------------------------------- polynomial families


@dataclass(frozen=True, eq=False)
class PolynomialFamily:
    """Shifted polynomials ``p_l(x) = sum_a c[l, a] (x - x_l)**a``.

    ``exponents`` lists the multi-indices ``a`` (all with ``|a| < beta``) and
    ``coefficients[l, j]`` is the coefficient of ``exponents[j]`` for output ``l``.
    """

    centers: np.ndarray
    exponents: tuple[tuple[int, ...], ...]
    coefficients: np.ndarray
    beta: float
    bound: float

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        coeffs = np.atleast_2d(np.asarray(self.coefficients, dtype=np.float64))
        exps = tuple(tuple(int(e) for e in a) for a in self.exponents)
        m, d = centers.shape
        if coeffs.shape != (m, len(exps)):
            raise DimensionError(f"coefficients must have shape ({m}, {len(exps)})")
        if any(len(a) != d or min(a) < 0 for a in exps):
            raise DimensionError("exponents must be nonnegative multi-indices of length d")
        if any(sum(a) >= self.beta for a in exps):
            raise ValueError("every multi-index must satisfy |a| < beta")
        if np.any(np.abs(centers) > 0.5):
            raise ValueError("centers must lie in [-1/2, 1/2]^d")
        if self.bound <= 0:
            raise ValueError("bound must be positive")
        if coeffs.size and np.max(np.abs(coeffs)) > self.bound:
            raise ValueError(f"coefficient of magnitude {np.max(np.abs(coeffs)):.6g} outside [-B, B], B = {self.bound}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "exponents", exps)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    def evaluate(self, x) -> np.ndarray:
        """Direct evaluation, shape ``(n, m)`` for ``x`` of shape ``(n, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        diff = x[:, None, :] - self.centers[None, :, :]
        out = np.zeros((x.shape[0], self.size))
        for j, a in enumerate(self.exponents):
            out += self.coefficients[None, :, j] * np.prod(diff ** np.array(a), axis=2)
        return out


def multi_indices(d: int, max_degree: int) -> list[tuple[int, ...]]:
    """All multi-indices with ``|a| <= max_degree``, graded then lexicographic."""
    out = []
    for k in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), k):
            a = [0] * d
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return out


def expand_about_origin(family: PolynomialFamily) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Rewrite each shifted polynomial in the monomial basis ``x**g``.

    Returns the monomials and a ``(m, n_monomials)`` coefficient matrix.
    """
    d = family.dim
    degree = max((sum(a) for a in family.exponents), default=0)
    basis = multi_indices(d, degree)
    index = {g: j for j, g in enumerate(basis)}
    out = np.zeros((family.size, len(basis)))
    neg = -family.centers
    for j, a in enumerate(family.exponents):
        c = family.coefficients[:, j]
        for g in itertools.product(*(range(ai + 1) for ai in a)):
            factor = np.ones(family.size)
            for i in range(d):
                factor = factor * math.comb(a[i], g[i]) * neg[:, i] ** (a[i] - g[i])
            out[:, index[tuple(g)]] += c * factor
    return basis, out


def shifted_identity(dim: int, depth: int, shift: float) -> Network:
    """Depth-``depth`` identity computed as ``relu(x + shift) - shift``.

    Exact for inputs with ``x >= -shift``; one weight per channel per layer.
    """
    eye = sp.identity(dim, format="csr")
    if depth == 1:
        return Network(dim, (Layer.from_sparse(eye, np.zeros(dim)),))
    layers = [Layer.from_sparse(eye, np.full(dim, shift))]
    layers += [Layer.from_sparse(eye, np.zeros(dim)) for _ in range(depth - 2)]
    layers.append(Layer.from_sparse(eye, np.full(dim, -shift)))
    return Network(dim, tuple(layers))


def _selector(dim: int, picks: list[int]) -> Network:
    mat = np.zeros((len(picks), dim))
    mat[np.arange(len(picks)), picks] = 1.0
    return affine(mat, np.zeros(len(picks)))


def _level_error(node_accuracy: float, levels: int) -> float:
    """Worst-case monomial error after ``levels`` rounds of products.

    Factors satisfy ``|u|, |v| <= 1/2``, so
    ``|m(u', v') - u v| <= node + (e_u + e_v) / 2 + e_u e_v``.
    """
    e = 0.0
    for _ in range(levels):
        e = node_accuracy + e + e * e
    return e


def monomial_net(d: int, degree: int, accuracy: float, depth_budget: DepthBudget):
    """Network mapping ``x`` to ``(x, x**g for 2 <= |g| <= degree)``.

    Returns ``(network, nonlinear monomials, guaranteed error)``. Monomials are
    produced level by level, level ``l`` covering degrees up to ``2**l``, each
    as a product of two monomials from the previous level. Values that are only
    carried forward pass through ``relu(v + 1) - 1``.
    """
    levels = max(1, math.ceil(math.log2(degree)))
    node = accuracy / levels
    while _level_error(node, levels) > accuracy:
        node /= 2
    if depth_budget.fixed:
        per_level = (depth_budget.max_depth - 1) // levels + 1
        if per_level < 4:
            raise BudgetError(
                f"depth budget {depth_budget.max_depth} too small for {levels} multiplication levels"
            )
        mult_budget = DepthBudget("fixed", per_level)
    else:
        mult_budget = depth_budget
    gate = multiply_net(_FACTOR_RANGE, node, mult_budget)

    available = [tuple(int(i == j) for i in range(d)) for j in range(d)]
    net = None
    for level in range(1, levels + 1):
        hi = min(degree, 2**level)
        lo = 2 ** (level - 1)
        new = [g for g in multi_indices(d, hi) if sum(g) > lo]
        pos = {g: j for j, g in enumerate(available)}
        blocks = [shifted_identity(len(available), gate.depth, 1.0)]
        for g in new:
            factors = [i for i in range(d) for _ in range(g[i])]
            half = math.ceil(len(factors) / 2)
            g1 = tuple(factors[:half].count(i) for i in range(d))
            g2 = tuple(factors[half:].count(i) for i in range(d))
            blocks.append(compose(gate, _selector(len(available), [pos[g1], pos[g2]])))
        stage = parallelize(blocks, shared_input=True)
        net = stage if net is None else compose(stage, net)
        available = available + new
    nonlinear = [g for g in available if sum(g) >= 2]
    return net, nonlinear, _level_error(node, levels)


def polynomial_family_net(family: PolynomialFamily, eps: float, depth_budget: DepthBudget) -> Network:
    """Network whose output ``l`` is within ``eps`` of ``p_l`` uniformly on Q.

    The family is re-expanded about the origin so that all outputs share one
    set of monomial gadgets; the per-output coefficients live in the last
    affine layer. Families of degree <= 1 are represented exactly by a single
    affine layer.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    d = family.dim
    basis, coeffs = expand_about_origin(family)
    degree = max(sum(g) for g in basis)
    const = coeffs[:, 0]
    linear = coeffs[:, 1 : d + 1] if degree >= 1 else np.zeros((family.size, d))
    if degree <= 1:
        return affine(linear, const)
    col = {g: j for j, g in enumerate(basis)}
    higher = np.array([j for j, g in enumerate(basis) if sum(g) >= 2])
    weight_sum = float(np.max(np.sum(np.abs(coeffs[:, higher]), axis=1)))
    mono_accuracy = min(0.25, eps / (2.0 * (1.0 + weight_sum)))
    mono, nonlinear, _ = monomial_net(d, degree, mono_accuracy, depth_budget)
    head = np.hstack([linear, coeffs[:, [col[g] for g in nonlinear]]])
    return compose(affine(head, const), mono)


def polynomial_family_depth(beta: float, d: int, eps: float, depth_budget: DepthBudget) -> int:
    """Depth :func:`polynomial_family_net` produces, without building it."""
    degree = max(0, math.ceil(beta) - 1)
    if degree <= 1:
        return 1
    levels = max(1, math.ceil(math.log2(degree)))
    if depth_budget.fixed:
        per_level = (depth_budget.max_depth - 1) // levels + 1
        return levels * per_level - levels + 1
    raise NotImplementedError("log-mode depth depends on the family's coefficients")

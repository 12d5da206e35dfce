"""Layered ReLU networks stored as sparse affine maps.

A network is a tuple ``((A_1, b_1), ..., (A_L, b_L))``. Every hidden layer is
followed by the ReLU ``max(0, t)``; the last layer is purely affine. Matrices
are kept as sorted ``(row, col, value)`` triplets with no stored zeros, so the
nonzero-weight count is exact by construction.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, QuantizationRangeError

# Upper bound on floats held per evaluation chunk (width x batch).
_CHUNK_FLOATS = 1 << 25


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine map ``x -> A x + b`` with ``A`` of shape ``(n_out, n_in)``."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    bias: np.ndarray
    n_in: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if rows.ndim != 1 or rows.shape != cols.shape or rows.shape != values.shape:
            raise DimensionError("triplet arrays must be 1-D and of equal length")
        if bias.ndim != 1:
            raise DimensionError("bias must be a 1-D vector")
        if self.n_in < 1 or bias.size < 1:
            raise DimensionError("layers need at least one input and one output")
        if rows.size:
            if rows.min() < 0 or rows.max() >= bias.size:
                raise DimensionError(f"row index outside [0, {bias.size})")
            if cols.min() < 0 or cols.max() >= self.n_in:
                raise DimensionError(f"column index outside [0, {self.n_in})")
            if np.any(values == 0.0):
                raise ValueError("zero weights must not be stored")
            if not np.all(np.isfinite(values)):
                raise ValueError("non-finite weight")
            keys = rows * self.n_in + cols
            if np.any(np.diff(keys) <= 0):
                raise ValueError("triplets must be sorted by (row, col) without duplicates")
        if not np.all(np.isfinite(bias)):
            raise ValueError("non-finite bias")
        index_dtype = np.int32 if max(self.n_in, bias.size) < 2**31 - 1 else np.int64
        for name, arr in (("rows", rows.astype(index_dtype)), ("cols", cols.astype(index_dtype)),
                          ("values", values), ("bias", bias)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_triplets(cls, rows, cols, values, bias, n_in: int) -> "Layer":
        """Canonicalize arbitrary triplets: duplicates are summed, zeros dropped."""
        bias = np.asarray(bias, dtype=np.float64)
        mat = sp.coo_matrix(
            (np.asarray(values, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
            shape=(bias.size, n_in),
        )
        return cls.from_sparse(mat, bias)

    @classmethod
    def from_sparse(cls, matrix, bias) -> "Layer":
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        coo = csr.tocoo()
        return cls(coo.row, coo.col, coo.data, np.asarray(bias, dtype=np.float64), csr.shape[1])

    @classmethod
    def from_dense(cls, matrix, bias) -> "Layer":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        return cls.from_sparse(sp.csr_matrix(matrix), bias)

    @property
    def n_out(self) -> int:
        return self.bias.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_out, self.n_in)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def weight_count(self) -> int:
        return self.nnz + int(np.count_nonzero(self.bias))

    def max_abs_weight(self) -> float:
        m = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        return max(m, float(np.max(np.abs(self.bias))))


@dataclass(frozen=True, eq=False)
class Network:
    input_dim: int
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if self.input_dim < 1:
            raise DimensionError("input_dim must be positive")
        if not layers:
            raise DimensionError("a network needs at least one layer")
        width = self.input_dim
        for i, layer in enumerate(layers, start=1):
            if layer.n_in != width:
                raise DimensionError(f"layer {i} expects {layer.n_in} inputs but receives {width}")
            width = layer.n_out
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.n_out for layer in self.layers]

    def __call__(self, x):
        return realize(self, x)


@dataclass(frozen=True)
class ComplexityReport:
    depth: int
    neurons: int
    weights: int
    max_abs_weight: float
    quantized_for: tuple[int, float] | None = None

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "neurons": self.neurons,
            "weights": self.weights,
            "max_abs_weight": self.max_abs_weight,
            "quantized_for": list(self.quantized_for) if self.quantized_for else None,
        }


# --------------------------------------------------------------------- realization


_threads: int | None = None


def set_threads(n: int | None) -> None:
    """Default worker count for :func:`realize`; ``RELU_APPROX_THREADS`` takes precedence."""
    global _threads
    _threads = None if n is None else max(1, int(n))


def _thread_count() -> int:
    env = os.environ.get("RELU_APPROX_THREADS")
    if env:
        return max(1, int(env))
    return _threads or 1


def _forward_columns(net: Network, cols: np.ndarray) -> np.ndarray:
    h = cols
    last = net.depth - 1
    for i, layer in enumerate(net.layers):
        h = layer.matrix @ h
        h += layer.bias[:, None]
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h


def realize(net: Network, x) -> np.ndarray:
    """Evaluate the ReLU realization at one point ``(d,)`` or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise DimensionError(f"expected inputs of dimension {net.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(batch)):
        raise ValueError("inputs must be finite")
    n = batch.shape[0]
    chunk = max(1, _CHUNK_FLOATS // max(net.widths))
    starts = range(0, n, chunk)
    work = lambda s: _forward_columns(net, np.ascontiguousarray(batch[s:s + chunk].T)).T
    threads = _thread_count()
    if threads > 1 and n > chunk:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    out = np.concatenate(parts, axis=0) if parts else np.zeros((0, net.output_dim))
    return out[0] if single else out


def complexity(net: Network, quantized_for: tuple[int, float] | None = None) -> ComplexityReport:
    return ComplexityReport(
        depth=net.depth,
        neurons=int(sum(net.widths)),
        weights=int(sum(layer.weight_count() for layer in net.layers)),
        max_abs_weight=max(layer.max_abs_weight() for layer in net.layers),
        quantized_for=quantized_for,
    )


# --------------------------------------------------------------------- algebra


def affine(matrix, bias) -> Network:
    """One-layer network computing an affine map."""
    layer = Layer.from_dense(matrix, bias)
    return Network(layer.n_in, (layer,))


def identity(dim: int) -> Network:
    return affine(np.eye(dim), np.zeros(dim))


def _merge(outer: Layer, inner: Layer) -> Layer:
    mat = outer.matrix @ inner.matrix
    return Layer.from_sparse(mat, outer.matrix @ inner.bias + outer.bias)


def _split_signs(layer: Layer) -> Layer:
    """Stack ``[A; -A]``, ``[b; -b]`` so a ReLU yields positive and negative parts."""
    return Layer.from_sparse(sp.vstack([layer.matrix, -layer.matrix]), np.concatenate([layer.bias, -layer.bias]))


def compose(outer: Network, inner: Network, merge: bool = True) -> Network:
    """Network realizing ``outer(inner(x))``.

    With ``merge`` the last affine map of ``inner`` is multiplied into the
    first map of ``outer`` (depth ``L_in + L_out - 1``). Otherwise the junction
    goes through ``t = relu(t) - relu(-t)`` (depth ``L_in + L_out``), which
    avoids fill-in of the product.
    """
    if inner.output_dim != outer.input_dim:
        raise DimensionError(f"inner output {inner.output_dim} != outer input {outer.input_dim}")
    if merge:
        joint = _merge(outer.layers[0], inner.layers[-1])
        return Network(inner.input_dim, inner.layers[:-1] + (joint,) + outer.layers[1:])
    first = outer.layers[0]
    doubled_in = Layer.from_sparse(sp.hstack([first.matrix, -first.matrix]), first.bias)
    return Network(inner.input_dim, inner.layers[:-1] + (_split_signs(inner.layers[-1]), doubled_in) + outer.layers[1:])


def pad_depth(net: Network, depth: int) -> Network:
    """Extend ``net`` to ``depth`` layers with ReLU identity channels.

    The last affine map is split into positive and negative parts, carried
    through ``depth - L`` layers (one weight per channel per layer, since both
    parts are nonnegative) and recombined, so the realization is unchanged.
    """
    if depth < net.depth:
        raise DimensionError("cannot pad to a smaller depth")
    extra = depth - net.depth
    if extra == 0:
        return net
    k = net.output_dim
    layers = list(net.layers[:-1]) + [_split_signs(net.layers[-1])]
    eye = sp.identity(2 * k, format="csr")
    for _ in range(extra - 1):
        layers.append(Layer.from_sparse(eye, np.zeros(2 * k)))
    layers.append(Layer.from_sparse(sp.hstack([sp.identity(k), -sp.identity(k)]), np.zeros(k)))
    return Network(net.input_dim, tuple(layers))


def parallelize(nets: Sequence[Network], shared_input: bool = True) -> Network:
    """Stack networks block-diagonally; outputs are concatenated in order.

    With ``shared_input`` all blocks read the same input vector, otherwise the
    input is the concatenation of the blocks' inputs.
    """
    nets = list(nets)
    if not nets:
        raise ValueError("parallelize needs at least one network")
    if shared_input and len({n.input_dim for n in nets}) != 1:
        raise DimensionError("shared input requires equal input dimensions")
    depth = max(n.depth for n in nets)
    nets = [pad_depth(n, depth) for n in nets]
    input_dim = nets[0].input_dim if shared_input else sum(n.input_dim for n in nets)
    layers = []
    for li in range(depth):
        blocks = [n.layers[li] for n in nets]
        if li == 0 and shared_input:
            mat = sp.vstack([b.matrix for b in blocks])
        else:
            mat = sp.block_diag([b.matrix for b in blocks])
        layers.append(Layer.from_sparse(mat, np.concatenate([b.bias for b in blocks])))
    return Network(input_dim, tuple(layers))


def sum_outputs(net: Network, coefficients) -> Network:
    """Replace the outputs ``y`` by the scalar ``c . y`` inside the last layer."""
    c = np.asarray(coefficients, dtype=np.float64).ravel()
    if c.size != net.output_dim:
        raise DimensionError(f"{c.size} coefficients for {net.output_dim} outputs")
    last = net.layers[-1]
    row = sp.csr_matrix(c[None, :])
    merged = Layer.from_sparse(row @ last.matrix, [float(c @ last.bias)])
    return Network(net.input_dim, net.layers[:-1] + (merged,))


# --------------------------------------------------------------------- quantization


def grid_exponent(s: int, eps: float) -> int:
    """``s * ceil(log2(1/eps))``; the grid is ``2**-grid_exponent * Z``."""
    lg = math.log2(1.0 / eps)
    r = round(lg)
    ceil = r if abs(lg - r) < 1e-12 else math.ceil(lg)
    return s * ceil


def _check_quant_args(s: int, eps: float):
    if int(s) != s or s < 1:
        raise ValueError("s must be a positive integer")
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")


def quantize(net: Network, s: int, eps: float) -> Network:
    """Round every weight to the nearest point of the (s, eps) grid."""
    _check_quant_args(s, eps)
    bound = eps ** (-s)
    scale = 2.0 ** grid_exponent(s, eps)
    top = math.floor(bound * scale)
    layers = []
    for i, layer in enumerate(net.layers, start=1):
        if layer.max_abs_weight() > bound:
            raise QuantizationRangeError(
                f"layer {i}: weight of magnitude {layer.max_abs_weight():.6g} exceeds eps^-s = {bound:.6g}"
            )
        vals = np.clip(np.round(layer.values * scale), -top, top) / scale
        bias = np.clip(np.round(layer.bias * scale), -top, top) / scale
        layers.append(Layer.from_triplets(layer.rows, layer.cols, vals, bias, layer.n_in))
    return Network(net.input_dim, tuple(layers))


def is_quantized(net: Network, s: int, eps: float) -> bool:
    _check_quant_args(s, eps)
    bound = eps ** (-s)
    scale = 2.0 ** grid_exponent(s, eps)
    for layer in net.layers:
        for arr in (layer.values, layer.bias):
            if arr.size == 0:
                continue
            if np.max(np.abs(arr)) > bound:
                return False
            scaled = arr * scale
            if np.max(np.abs(scaled - np.round(scaled))) > 1e-9:
                return False
    return True


def min_range_exponent(net: Network, eps: float) -> int:
    """Smallest integer s with every weight inside ``[-eps^-s, eps^-s]``."""
    w = complexity(net).max_abs_weight
    if w <= 1.0:
        return 1
    return max(1, math.ceil(math.log(w) / math.log(1.0 / eps) - 1e-12))


# --------------------------------------------------------------------- JSON


def to_dict(net: Network) -> dict:
    return {
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.n_out,
                "cols": layer.n_in,
                "weights": [[int(r), int(c), float(v)] for r, c, v in zip(layer.rows, layer.cols, layer.values)],
                "bias": [float(b) for b in layer.bias],
            }
            for layer in net.layers
        ],
    }


def from_dict(data: dict) -> Network:
    layers = []
    for i, entry in enumerate(data["layers"], start=1):
        w = entry.get("weights", [])
        arr = np.asarray(w, dtype=np.float64).reshape(-1, 3)
        bias = np.asarray(entry["bias"], dtype=np.float64)
        if bias.size != entry["rows"]:
            raise DimensionError(f"layer {i}: bias length {bias.size} != rows {entry['rows']}")
        if np.any(arr[:, :2] != np.round(arr[:, :2])):
            raise ValueError(f"layer {i}: non-integer index")
        layers.append(Layer(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2], bias, int(entry["cols"])))
    return Network(int(data["input_dim"]), tuple(layers))


def dumps(net: Network) -> str:
    return json.dumps(to_dict(net))


def loads(text: str) -> Network:
    return from_dict(json.loads(text))


def save(net: Network, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(net))


def load(path) -> Network:
    with open(path) as fh:
        return loads(fh.read())

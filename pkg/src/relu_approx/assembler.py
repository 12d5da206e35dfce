"""End-to-end construction of ``G = sum_l Lambda_l(x, [Phi(x)]_l)``.

Pipeline: pick the dyadic level, draw an offset that passes the shell-mass
diagnostic, fit Taylor polynomials at one anchor per active cube, realize
them jointly as ``Phi``, gate each output with its cube's localization
gadget, sum, and optionally quantize.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import network as nw
from .errors import BudgetError, DomainError, OffsetRejectionError, QuantizationRangeError
from .localization import localization_bank
from .measures import LpEstimate, Measure, lp_distance, scan_points, uniform
from .partition import DyadicPartition, active_cubes, draw_offset, in_shell, shell_decay, shell_exponent
from .primitives import DepthBudget, PolynomialFamily, default_budget, polynomial_family_net, shifted_identity
from .seeding import stream
from .taylor import TargetFunction, exponents_for, taylor_coefficient_matrix

MAX_REDRAWS = 20
MAX_QUANT_S = 16
DIAGNOSTIC_LEVELS = (2, 3, 4, 5, 6)
# Evaluating the network costs about one multiply-add per weight and point;
# default sample counts keep scans and Monte Carlo runs near these totals.
SCAN_WORK = 2e9
LP_WORK = 1e10
MIN_LP_SAMPLES = 1000
MAX_LP_SAMPLES = 20_000


def choose_level(eps: float, beta: float) -> int:
    """``N = ceil(log2(eps**(-1/beta)))``, so that ``eps**(-1/beta) <= 2**N <= 2 eps**(-1/beta)``."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if not beta > 0:
        raise ValueError("beta must be positive")
    x = -math.log2(eps) / beta
    r = round(x)
    n = r if abs(x - r) < 1e-12 else math.ceil(x)
    n = max(n, 1)
    scale = eps ** (-1.0 / beta)
    assert scale * (1 - 1e-12) <= 2.0**n <= 2.0 * scale * (1 + 1e-12), (eps, beta, n)
    return n


def depth_cap(beta: float, d: int) -> float:
    """Depth cap for fixed-mode builds: ``7 + (1 + ceil(log2 beta))(11 + beta / d)``."""
    lg = max(0, math.ceil(math.log2(beta) - 1e-12))
    return 7 + (1 + lg) * (11 + beta / d)


@dataclass
class BuildRequest:
    f: TargetFunction
    eps: float
    p: float = 2.0
    mu: Measure | None = None
    depth_budget: DepthBudget | None = None
    quantize_s: int | None = None
    quantize: bool = True
    seed: int = 0
    lp_samples: int | None = None
    shell_samples: int = 100_000
    scan_points: int | None = None

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        if not 1.0 <= self.p < math.inf:
            raise ValueError("p must lie in [1, inf)")
        if self.mu is None:
            self.mu = uniform(self.f.dim)
        if self.mu.dim != self.f.dim:
            raise ValueError(f"measure has dimension {self.mu.dim}, function has {self.f.dim}")
        if self.depth_budget is None:
            self.depth_budget = default_budget(self.f.beta, self.f.dim)


@dataclass
class BuildReport:
    network: nw.Network
    complexity: nw.ComplexityReport
    eps: float
    p: float
    beta: float
    dim: int
    level: int
    shell_exponent: float
    cubes: int
    offset: np.ndarray
    offset_attempts: list
    B_prime: float
    C2: float
    lp_error: LpEstimate
    sup_lower_bound: float
    depth_accounting: dict
    quantization: dict | None = None
    lp_error_unquantized: LpEstimate | None = None
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def weight_constant(self) -> float:
        """``W * eps**(d / beta)``: the empirical constant in ``W <= C eps**(-d/beta)``."""
        return self.complexity.weights * self.eps ** (self.dim / self.beta)

    @property
    def error_constant(self) -> float:
        return self.lp_error.value / self.eps

    @property
    def partition(self) -> DyadicPartition:
        return DyadicPartition(self.offset, self.level, self.shell_exponent)

    def to_dict(self) -> dict:
        return {
            **self.meta,
            "eps": self.eps,
            "p": self.p,
            "beta": self.beta,
            "d": self.dim,
            "level": self.level,
            "shell_exponent": self.shell_exponent,
            "cubes": self.cubes,
            "partition": self.partition.to_dict(),
            "offset_attempts": self.offset_attempts,
            "B_prime": self.B_prime,
            "C2": self.C2,
            "complexity": self.complexity.to_dict(),
            "depth_cap": depth_cap(self.beta, self.dim),
            "depth_accounting": self.depth_accounting,
            "weight_constant": self.weight_constant,
            "measured_lp_error": self.lp_error.to_dict(),
            "error_constant": self.error_constant,
            "lp_error_unquantized": self.lp_error_unquantized.to_dict() if self.lp_error_unquantized else None,
            "measured_sup_lower_bound": self.sup_lower_bound,
            "quantization": self.quantization,
            "timings": self.timings,
        }

    def save(self, out_dir) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        net_path = os.path.join(out_dir, "network.json")
        rep_path = os.path.join(out_dir, "report.json")
        nw.save(self.network, net_path)
        with open(rep_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        return net_path, rep_path


def check_offset(a, mu: Measure, p: float, beta: float, rng: np.random.Generator, level: int = 1,
                 samples: int = 100_000) -> dict:
    """Diagnostic record for one offset; ``record["passed"]`` says whether to keep it.

    Besides the shell-decay fit, an offset fails if a level-``level`` cube face
    lies exactly on the boundary of Q, or if a level-``level`` shell contains an
    atom of a discrete measure.
    """
    d = len(a)
    record = shell_decay(a, mu, p, beta, rng, DIAGNOSTIC_LEVELS, samples).to_dict()
    part = DyadicPartition(a, level, shell_exponent(d, p, beta))
    try:
        active_cubes(part)
    except DomainError as exc:
        record["passed"] = False
        record["reason"] = str(exc)
    if mu.atoms is not None:
        # Atomic shell mass at the build level is exact, so check it directly.
        hit = in_shell(part, mu.atoms)
        record["atom_shell_mass"] = float(mu.weights[hit].sum())
        if np.any(hit):
            record["passed"] = False
            record["reason"] = f"{int(hit.sum())} atom(s) inside level-{level} shells"
    return record


def select_offset(d: int, mu: Measure, p: float, beta: float, seed: int, level: int = 1,
                  samples: int = 100_000):
    """Draw offsets until one passes :func:`check_offset`.

    Returns ``(offset, diagnostics of every attempt)``.
    """
    attempts = []
    for attempt in range(MAX_REDRAWS + 1):
        a = draw_offset(d, stream(seed, "offset", attempt))
        record = check_offset(a, mu, p, beta, stream(seed, "shell", attempt), level, samples)
        attempts.append(record)
        if record["passed"]:
            return a, attempts
    raise OffsetRejectionError(f"no offset passed the shell-decay check in {MAX_REDRAWS} redraws", attempts)


def assemble(f: TargetFunction, eps: float, p: float, offset, budget: DepthBudget):
    """Unquantized network for a fixed offset, plus construction data."""
    d, beta = f.dim, f.beta
    n_level = choose_level(eps, beta)
    k = shell_exponent(d, p, beta)
    part = DyadicPartition(offset, n_level, k)
    omegas, anchors = active_cubes(part)
    exps = exponents_for(d, f.degree)
    coeffs = taylor_coefficient_matrix(f, anchors, exps, eps_target=eps)
    top = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    family = PolynomialFamily(anchors, exps, coeffs, beta, max(top, f.holder_bound))
    phi = polynomial_family_net(family, eps / 4, budget)
    # |x - x_l|_inf <= 1 on Q, so |p_l| <= sum_a |c_la| there.
    b_prime = max(1.0, eps / 4 + float(np.max(np.sum(np.abs(coeffs), axis=1))))
    carry = shifted_identity(d, phi.depth, 0.5)
    bank = localization_bank(part.lower(omegas), part.upper(omegas), part.shell_width, b_prime)
    joint = nw.compose(bank, nw.parallelize([carry, phi], shared_input=True))
    g = nw.sum_outputs(joint, np.ones(len(omegas)))
    accounting = {"polynomial_family": phi.depth, "localization": bank.depth, "merged_junction": -1, "total": g.depth}
    return g, part, omegas, anchors, coeffs, b_prime, top / f.holder_bound, accounting


def scan_size(d: int, weights: int, requested: int | None = None) -> int:
    """Points per axis for sup-grid scans, capped so a scan costs about :data:`SCAN_WORK`."""
    if requested:
        return requested
    total = max(64, min(4096, int(SCAN_WORK / max(weights, 1))))
    per_axis = int(round(total ** (1.0 / min(d, 3))))
    return max(3, per_axis if d <= 3 else int(round(total ** (1 / 3))))


def lp_sample_count(weights: int, requested: int | None = None) -> int:
    if requested:
        return requested
    return int(min(MAX_LP_SAMPLES, max(MIN_LP_SAMPLES, LP_WORK / max(weights, 1))))


def grid_deviation(a: nw.Network, b: nw.Network, d: int, per_axis: int) -> float:
    x = scan_points(d, per_axis)
    return float(np.max(np.abs(nw.realize(a, x) - nw.realize(b, x))))


def adaptive_quantize(net: nw.Network, eps: float, d: int, per_axis: int, s: int | None = None):
    """Quantize at ``s`` or at the smallest ``s`` whose sup-grid deviation is ``<= eps``."""
    s2 = nw.min_range_exponent(net, eps)
    candidates = [s] if s is not None else range(s2, MAX_QUANT_S + 1)
    if s is None and s2 > MAX_QUANT_S:
        raise QuantizationRangeError(f"weights need s >= {s2} > {MAX_QUANT_S}")
    tried = []
    for cand in candidates:
        q = nw.quantize(net, cand, eps)
        dev = grid_deviation(net, q, d, per_axis)
        tried.append({"s": cand, "deviation": dev})
        if s is not None or dev <= eps:
            info = {"s": cand, "eps": eps, "deviation": dev, "s2": s2, "grid_exponent": nw.grid_exponent(cand, eps),
                    "scan_points_per_axis": per_axis, "tried": tried}
            return q, info
    raise QuantizationRangeError(f"no s <= {MAX_QUANT_S} keeps the sup-grid deviation within {eps}")


def build(req: BuildRequest) -> BuildReport:
    f, eps, p, mu = req.f, req.eps, req.p, req.mu
    d, beta = f.dim, f.beta
    timings = {}
    t0 = time.perf_counter()
    offset, attempts = select_offset(d, mu, p, beta, req.seed, choose_level(eps, beta), req.shell_samples)
    timings["offset"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    g, part, omegas, _, _, b_prime, c2, accounting = assemble(f, eps, p, offset, req.depth_budget)
    timings["assemble"] = time.perf_counter() - t0
    cap = depth_cap(beta, d)
    if req.depth_budget.fixed and g.depth > cap:
        raise BudgetError(f"depth {g.depth} exceeds the cap {cap:.4g}")

    t0 = time.perf_counter()
    weights = nw.complexity(g).weights
    per_axis = scan_size(d, weights, req.scan_points)
    samples = lp_sample_count(weights, req.lp_samples)
    lp_pre = lp_distance(f, lambda x: nw.realize(g, x), mu, p, samples, stream(req.seed, "lp"))
    timings["measure"] = time.perf_counter() - t0

    result, quant, lp_post = g, None, None
    if req.quantize:
        t0 = time.perf_counter()
        result, quant = adaptive_quantize(g, eps, d, per_axis, req.quantize_s)
        timings["quantize"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        lp_post = lp_distance(f, lambda x: nw.realize(result, x), mu, p, samples, stream(req.seed, "lp"))
        timings["measure"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    x = scan_points(d, per_axis)
    sup_lb = float(np.max(np.abs(f(x) - nw.realize(result, x)[:, 0])))
    timings["sup_scan"] = time.perf_counter() - t0

    cx = nw.complexity(result, (quant["s"], eps) if quant else None)
    return BuildReport(
        network=result,
        complexity=cx,
        eps=eps,
        p=p,
        beta=beta,
        dim=d,
        level=part.level,
        shell_exponent=part.shell_exponent,
        cubes=len(omegas),
        offset=np.asarray(offset),
        offset_attempts=attempts,
        B_prime=b_prime,
        C2=c2,
        lp_error=lp_post if lp_post is not None else lp_pre,
        lp_error_unquantized=lp_pre if lp_post is not None else None,
        sup_lower_bound=sup_lb,
        depth_accounting=accounting,
        quantization=quant,
        timings=timings,
        meta={
            "function": f.name,
            "measure": mu.name,
            "holder_bound": f.holder_bound,
            "seed": req.seed,
            "depth_budget": req.depth_budget.to_dict(),
            "scan_points_per_axis": per_axis,
            "lp_samples": samples,
        },
    )


def measure(net: nw.Network, f: TargetFunction, mu: Measure, p: float, seed: int,
            samples: int | None = None) -> LpEstimate:
    """``||f - R(net)||_{L^p(mu)}`` on the same sub-stream :func:`build` uses."""
    n = lp_sample_count(nw.complexity(net).weights, samples)
    return lp_distance(f, lambda x: nw.realize(net, x), mu, p, n, stream(seed, "lp"))

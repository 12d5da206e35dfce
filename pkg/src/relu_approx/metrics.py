"""Rate studies: weight counts and errors across an eps sweep, with log-log fits."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .assembler import BuildRequest, build, depth_cap
from .measures import Measure
from .primitives import DepthBudget, default_budget
from .seeding import stream
from .taylor import TargetFunction

CSV_COLUMNS = ["eps", "N_level", "m_cubes", "depth", "neurons", "weights", "lp_error", "lp_ci", "sup_lb", "quant_s"]


@dataclass(frozen=True)
class RateRow:
    eps: float
    level: int
    cubes: int
    depth: int
    neurons: int
    weights: int
    lp_error: float
    lp_ci: tuple[float, float]
    sup_lb: float
    quant_s: int | None

    @property
    def error_ratio(self) -> float:
        return self.lp_error / self.eps

    def csv_values(self) -> list:
        return [
            repr(self.eps), self.level, self.cubes, self.depth, self.neurons, self.weights,
            repr(self.lp_error), f"{self.lp_ci[0]!r}:{self.lp_ci[1]!r}", repr(self.sup_lb),
            "" if self.quant_s is None else self.quant_s,
        ]


@dataclass
class RateStudy:
    rows: list[RateRow]
    slope: float
    intercept: float
    target_slope: float
    depth_mode: str
    beta: float
    dim: int
    reports: list = field(default_factory=list, repr=False)

    @property
    def error_ratio_spread(self) -> float:
        ratios = [r.error_ratio for r in self.rows]
        lo = min(ratios)
        return math.inf if lo == 0 else max(ratios) / lo

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def loglog_slope(eps, values) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log2(values)`` against ``log2(1/eps)``."""
    x = -np.log2(np.asarray(eps, dtype=np.float64))
    y = np.log2(np.asarray(values, dtype=np.float64))
    if x.size < 2:
        raise ValueError("need at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _row(report) -> RateRow:
    cx = report.complexity
    q = report.quantization
    return RateRow(
        eps=report.eps,
        level=report.level,
        cubes=report.cubes,
        depth=cx.depth,
        neurons=cx.neurons,
        weights=cx.weights,
        lp_error=report.lp_error.value,
        lp_ci=(report.lp_error.ci_low, report.lp_error.ci_high),
        sup_lb=report.sup_lower_bound,
        quant_s=q["s"] if q else None,
    )


def rate_study(f: TargetFunction, mu: Measure, p: float, eps_list, depth_budget: DepthBudget | None = None,
               seed: int = 0, out_dir=None, quantize: bool = False, lp_samples: int | None = None,
               keep_reports: bool = False) -> RateStudy:
    """Build at every eps and fit ``log2 W`` against ``log2(1/eps)``.

    With ``out_dir`` the table goes to ``rate.csv`` and the chart to
    ``rate.svg``. A failing build still writes the rows finished so far.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4:
        raise ValueError("need at least 4 eps values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps values must be strictly decreasing")
    budget = depth_budget or default_budget(f.beta, f.dim)
    rows, reports = [], []
    try:
        for i, eps in enumerate(eps_list):
            row_seed = int(stream(seed, "sweep", i).integers(2**31))
            req = BuildRequest(f, eps, p, mu, budget, quantize=quantize, seed=row_seed, lp_samples=lp_samples)
            report = build(req)
            rows.append(_row(report))
            if keep_reports:
                reports.append(report)
    except Exception:
        if out_dir is not None and rows:
            _write_csv(out_dir, rows)
        raise
    slope, intercept = loglog_slope([r.eps for r in rows], [r.weights for r in rows])
    study = RateStudy(rows, slope, intercept, f.dim / f.beta, budget.mode, f.beta, f.dim, reports)
    if out_dir is not None:
        _write_csv(out_dir, rows)
        with open(os.path.join(out_dir, "rate.svg"), "w") as fh:
            fh.write(loglog_svg(study))
    return study


def _write_csv(out_dir, rows):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "rate.csv"), "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def loglog_svg(study: RateStudy, width: int = 560, height: int = 400) -> str:
    """Self-contained SVG: ``log2 W`` against ``log2(1/eps)`` with the fitted line."""
    x = -np.log2([r.eps for r in study.rows])
    y = np.log2([r.weights for r in study.rows])
    pad = 60
    x0, x1 = x.min() - 0.5, x.max() + 0.5
    y0, y1 = min(y.min(), study.intercept + study.slope * x0) - 0.5, max(y.max(), study.intercept + study.slope * x1) + 0.5
    sx = lambda v: pad + (v - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda v: height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for t in range(math.ceil(x0), math.floor(x1) + 1):
        parts.append(f'<text x="{sx(t):.1f}" y="{height - pad + 18}" font-size="11" text-anchor="middle">{t}</text>')
    for t in range(math.ceil(y0), math.floor(y1) + 1):
        parts.append(f'<text x="{pad - 8}" y="{sy(t) + 4:.1f}" font-size="11" text-anchor="end">{t}</text>')
    parts.append(
        f'<line x1="{sx(x0):.1f}" y1="{sy(study.intercept + study.slope * x0):.1f}" '
        f'x2="{sx(x1):.1f}" y2="{sy(study.intercept + study.slope * x1):.1f}" stroke="#c0392b" stroke-dasharray="5,3"/>'
    )
    for xi, yi in zip(x, y):
        parts.append(f'<circle cx="{sx(xi):.1f}" cy="{sy(yi):.1f}" r="4" fill="#2c3e50"/>')
    parts.append(f'<text x="{width / 2}" y="{height - 15}" font-size="12" text-anchor="middle">log2(1/eps)</text>')
    parts.append(
        f'<text x="16" y="{height / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {height / 2})">log2(weights)</text>'
    )
    parts.append(
        f'<text x="{width / 2}" y="30" font-size="13" text-anchor="middle">slope {study.slope:.3f} '
        f'(target {study.target_slope:.3g})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class DepthRecord:
    mode: str
    cap: float
    depths: tuple[int, ...]
    constant: bool
    within_cap: bool
    log_constant: float | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "cap": self.cap,
            "depths": list(self.depths),
            "constant": self.constant,
            "within_cap": self.within_cap,
            "log_constant": self.log_constant,
        }


def depth_report(study: RateStudy) -> DepthRecord:
    """Check depth against the cap; fixed mode also needs it constant in eps.

    In log mode the record holds ``c = max L / (1 + log2(1/eps))`` instead.
    """
    if len(study.rows) < 2:
        raise ValueError("need at least two rows")
    cap = depth_cap(study.beta, study.dim)
    depths = tuple(r.depth for r in study.rows)
    if study.depth_mode == "log":
        c = max(r.depth / (1 + math.log2(1 / r.eps)) for r in study.rows)
        return DepthRecord("log", cap, depths, len(set(depths)) == 1, max(depths) <= cap, c)
    record = DepthRecord("fixed", cap, depths, len(set(depths)) == 1, max(depths) <= cap)
    if not (record.constant and record.within_cap):
        bad = [(r.eps, r.depth) for r in study.rows if r.depth != depths[0] or r.depth > cap]
        raise AssertionError(f"depth check failed (cap {cap:.4g}); rows (eps, depth): {bad}")
    return record

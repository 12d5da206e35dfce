"""Constructive ReLU approximation of Hölder functions in L^p(mu)."""

from .assembler import BuildReport, BuildRequest, build, choose_level, depth_cap
from .errors import (
    BoundError,
    BudgetError,
    DimensionError,
    DomainError,
    EvaluationError,
    MarginError,
    MeasureError,
    OffsetRejectionError,
    QuantizationRangeError,
    ReluApproxError,
)
from .localization import Cube, localization_bank, localization_net
from .measures import Measure, builtin_measure, lp_distance, sup_distance
from .metrics import depth_report, rate_study
from .network import (
    ComplexityReport,
    Layer,
    Network,
    complexity,
    compose,
    is_quantized,
    parallelize,
    quantize,
    realize,
    sum_outputs,
)
from .partition import DyadicPartition, active_cubes, draw_offset, locate, shell_mass
from .primitives import DepthBudget, PolynomialFamily, multiply_net, polynomial_family_net, sawtooth, square_net
from .taylor import TargetFunction, parse_function, taylor_coefficients, taylor_remainder_check

__version__ = "0.1.0"

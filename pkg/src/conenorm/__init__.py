"""Exact operator norms on cones of k-monotone functions, with a brute-force cross-check."""

from .cone import ConeSpec, SamplerConfig, Variant, extremal, membership_check, sample
from .grid import GridConfig
from .hardy import HardyBounds, HardyProblem, PreconditionError, StieltjesConfig, hardy_bounds, j_pqr
from .measure import (CumulativeRule, DensityRule, ExpDensity, GammaDensity, Interval, Measure, ParameterError,
                      PowerDensity, TabulatedDensity, lebesgue, null_measure)
from .normcalc import (DegenerateError, NormProblem, NormReport, associate_norm, dilation_norm, gamma_embedding,
                       lambda_embedding, restriction_norm)
from .operators import Dilation, Hardy, Identity, Kernel
from .oracle import OracleConfig, OracleReport, brute_norm, compare
from .rearrange import LevelSetFunction, StepFunction, rearrangement
from .shapes import ONE, ConstShape, ExprShape, PowerShape

__version__ = "0.1.0"

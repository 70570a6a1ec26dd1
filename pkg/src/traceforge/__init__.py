"""Numerical laboratory for the Sobolev trace operator on Lipschitz graph domains."""

from .errors import (ChartUnresolved, CollarTooThin, ConfigError, CoverageGap,
                     IsolatedNode, NotTraceZero, TraceForgeError, ZeroNorm)
from .geometry import (AffineGraph, ConeGraph, GraphChart, LipschitzDomain,
                       LipschitzGraph, PartitionOfUnity, PiecewiseLinearGraph,
                       SawtoothGraph, SeparableGraph, ZeroGraph, area_factor,
                       build_partition_of_unity, estimate_lipschitz,
                       eval_gamma, flatten, grad_gamma_fd, jacobian_F_check,
                       unflatten, verify_finite_subcover)
from .grids import (DomainGrid, GridFunction, VectorGridFunction, gradient_fd,
                    interpolate, lp_norm, sample, w1p_norm)
from .quadrature import (QuadratureResult, SurfacePatch, box_quadrature,
                         flat_change_of_variables_check, slice_integral,
                         surface_integral)
from .trace import (TraceConstantReport, TraceSample, build_trace_plan,
                    estimate_trace_constant, trace, trace_lp_norm,
                    vertical_ftc_check)
from .cutoff import (ConvergenceTable, CutoffProfile, apply_cutoff,
                     apriori_estimate_check, convergence_study, default_profile,
                     eq3_bound_check, fiber_ftc_check, jensen_check, mollify)

__version__ = "0.1.0"

"""Local polynomial estimation of distribution and density functions.

The empirical CDF is smoothed by kernel-weighted local polynomials; the
fitted coefficients give the CDF, the density and its derivatives at any
point, including boundary points. Bandwidths come from rule-of-thumb or
direct plug-in selectors, and inference uses robust bias correction.
"""

__version__ = "0.1.0"

from .bwselect import (
    BandwidthResult,
    BwMethod,
    imse_dpi,
    irot_bandwidth,
    mse_dpi,
    regularize_bandwidth,
    rot_bandwidth,
    select_bandwidth,
)
from .ecdf import Sample, ecdf_at, effective_n, ingest, quantile_grid
from .inference import InferenceTable, rbc_pointwise, scale_results, uniform_band
from .kernel import KernelConstants, KernelKind, kernel_constants, kernel_eval
from .lpfit import (
    LocalSystem,
    PointFit,
    SingularFitError,
    Target,
    bias_constants,
    design_system,
    fit_point,
    fit_points,
    influence_covariance,
    influence_matrix,
    rbc_estimate,
)

__all__ = [
    "BandwidthResult", "BwMethod", "InferenceTable", "KernelConstants", "KernelKind",
    "LocalSystem", "PointFit", "Sample", "SingularFitError", "Target",
    "bias_constants", "design_system", "ecdf_at", "effective_n", "fit_point", "fit_points",
    "imse_dpi", "influence_covariance", "influence_matrix", "ingest", "irot_bandwidth",
    "kernel_constants", "kernel_eval", "mse_dpi", "quantile_grid", "rbc_estimate",
    "rbc_pointwise", "regularize_bandwidth", "rot_bandwidth", "scale_results",
    "select_bandwidth", "uniform_band",
]

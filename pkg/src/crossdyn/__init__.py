"""crossdyn: temporal dynamics inferred from cross-sectional data.

Reconstructs a free-energy landscape from a one-time-point sample, fits
the noise amplitude of the matching overdamped Langevin equation, then
simulates, quantifies tipping-point transitions and intervention effort,
and validates directional predictions against follow-up observations.
"""

from ._kernels import NUMBA_AVAILABLE, USING_NUMBA
from .errors import (
    BoundaryOptimumWarning,
    CrossdynError,
    DegenerateData,
    DegenerateScale,
    EmptyCohort,
    EmptyRow,
    NegativeRadicand,
    NoAttractorFound,
    NoConvergence,
    ParseError,
    SchemaError,
)
from .kde import CrossSection, DensityModel, log_pdf, log_pdf_derivative, pdf, silverman_bandwidth
from .landscape import EnergyLandscape, LandscapeFeatures, energy, find_features, force
from .markov import (
    DiscreteChain,
    FitDiagnostics,
    Grid,
    LangevinModel,
    build_grid,
    continuous_density,
    fit_sigma,
    hellinger,
    solve_chain,
    stationary_distribution,
    transition_matrix,
)
from .intervene import (
    TiltedLandscape,
    occupancy_fraction,
    relative_effort,
    relative_effort_model,
    tilted_landscape,
)
from .pipeline import FitOutput, fit_model
from .sde import ForceTable, Trajectory, TransitionStats, count_transitions, simulate
from .surrogate import LandauSpec, landau_cdf, sample_landau, synth_longitudinal
from .validate import (
    Cluster,
    HistogramBin,
    LongitudinalPair,
    StandardizationRecord,
    ValidationReport,
    accuracy,
    bootstrap_accuracy,
    cluster_by_category,
    displacement_histogram,
    displacement_probabilities,
    filter_range,
    ideal_case_accuracy,
    random_choice_null,
    scaled_accuracy,
    select_delta_t,
    standardize,
    validate_cohort,
)

__version__ = "0.1.0"

"""Norm-constrained GAN function classes and empirical generalization-rate checks."""

__version__ = "0.1.0"

from .bounds import BoundReport, compute_bound_report, vc_scaling  # noqa: E402
from .distance import (  # noqa: E402
    InfResult,
    ObjectiveData,
    SearchOptions,
    SupResult,
    distance,
    inf_over_theta,
    make_data,
    objective_at,
    rademacher_estimate,
    sup_over_w,
)
from .distributions import DistributionSpec, Measure, SampleSet, draw_samples  # noqa: E402
from .experiments import (  # noqa: E402
    ExperimentConfig,
    GapRecord,
    RateFit,
    dyadic_blocking_summary,
    fit_rate,
    run_error_experiment,
    verify_decomposition,
)
from .nets import Activation, MeasuringFunction, NetworkSpec, WeightAssignment  # noqa: E402

__all__ = [
    "Activation", "BoundReport", "DistributionSpec", "ExperimentConfig", "GapRecord", "InfResult",
    "Measure", "MeasuringFunction", "NetworkSpec", "ObjectiveData", "RateFit", "SampleSet",
    "SearchOptions", "SupResult", "WeightAssignment", "compute_bound_report", "distance",
    "draw_samples", "dyadic_blocking_summary", "fit_rate", "inf_over_theta", "make_data",
    "objective_at", "rademacher_estimate", "run_error_experiment", "sup_over_w", "vc_scaling",
    "verify_decomposition",
]

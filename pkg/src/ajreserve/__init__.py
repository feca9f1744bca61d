"""Individual claims reserving on the claim-size clock.

Claim development is modeled as a forward jump process whose time axis is
the cumulative paid amount; the occupation probability of the absorbing
Closed state is the claim-size CDF. Conditioning on covariates happens
through local kernel weights, reserves come from exact tail integrals of
the fitted step CDFs, and a built-in simulator plus CRPS scoring close the
model-selection loop.
"""

from ._backend import BACKEND
from .errors import (AjReserveError, BeyondSupportError, NoLocalDataError, NumericError,
                     ParseError, ValidationError)
from .estimator import (CountingAggregate, CumulativeHazard, OccupationCurve, StepCdf,
                        aalen_johansen, aggregate_counts, conditional_hazard,
                        fit_conditional_cdf, fit_occupation_curve, hazard_from_aggregate,
                        occupation_cdf)
from .kernels import (KernelSpec, bandwidth_for_sample, default_bandwidth, density_estimate,
                      kernel_weight, nw_weights)
from .paths import ClaimPath, JumpEvent, Portfolio, actual_ultimate, paid_to_date, \
    paths_from_records
from .records import ClaimRecord, StateSpace, ingest_records, write_records
from .reserving import (ChainLadderResult, IbnrModel, RbnsPrediction, ReserveReport,
                        assemble_report, chain_ladder, compound_ibnr, mack_process_variance,
                        predict_ibnr, predict_rbns, rbns_conditional_moment, tail_integral)
from .scoring import ScoreSummary, crps, error_incidence, relativize, select_model
from .simulator import (IntensityModel, ScenarioConfig, TrueSeverity, default_intensity_model,
                        generate_scenario, intensities_from_hazard, portfolio_to_records,
                        simulate_path, true_severity, truncate_path)
from .triangles import Triangle, build_count_triangle, build_paid_triangle

__version__ = "0.1.0"

__all__ = [
    "AjReserveError", "BACKEND", "BeyondSupportError", "ChainLadderResult", "ClaimPath",
    "ClaimRecord", "CountingAggregate", "CumulativeHazard", "IbnrModel", "IntensityModel",
    "JumpEvent", "KernelSpec", "NoLocalDataError", "NumericError", "OccupationCurve",
    "ParseError", "Portfolio", "RbnsPrediction", "ReserveReport", "ScenarioConfig",
    "ScoreSummary", "StateSpace", "StepCdf", "Triangle", "TrueSeverity", "ValidationError",
    "aalen_johansen", "actual_ultimate", "aggregate_counts", "assemble_report",
    "bandwidth_for_sample", "build_count_triangle", "build_paid_triangle", "chain_ladder",
    "compound_ibnr", "conditional_hazard", "crps", "default_bandwidth",
    "default_intensity_model", "density_estimate", "error_incidence", "fit_conditional_cdf",
    "fit_occupation_curve", "generate_scenario", "hazard_from_aggregate", "ingest_records",
    "intensities_from_hazard", "kernel_weight", "mack_process_variance", "nw_weights",
    "occupation_cdf", "paid_to_date", "paths_from_records", "portfolio_to_records",
    "predict_ibnr", "predict_rbns", "rbns_conditional_moment", "relativize", "select_model",
    "simulate_path", "tail_integral", "true_severity", "truncate_path", "write_records",
]

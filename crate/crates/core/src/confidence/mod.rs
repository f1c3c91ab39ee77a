//! Confidence intervals for quantiles and confidence bands for densities
//! of the output of a technical system, built from surrogate outputs and
//! the maximal observed surrogate error.

mod band;
mod eps_gamma;
mod quantile_ci;

pub use band::{
    candidate_endpoints, density_band, density_band_with_beta, sup_interval_mismatch,
    BandComponent, BandSettings, DensityBand, Direction,
};
pub use eps_gamma::{eps_gamma_objective, eps_lower_bound, minimize_eps_gamma, EpsGamma};
pub use quantile_ci::{
    ci_feasibility, ci_levels, default_delta_delta_fractions, level_shift, max_abs_error,
    minimal_feasible_delta, minimal_feasible_n, quantile_ci, quantile_ci_with_beta, CiLevels,
    CiSettings, DeltaDelta, FeasibilityReport, QuantileCi,
};

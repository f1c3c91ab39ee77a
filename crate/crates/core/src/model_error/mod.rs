//! Quantifying the error of a computer model against experiments: the area
//! validation metric, a Gaussian-process discrepancy model, and bootstrap
//! quantiles of a fitted residual model.

mod avm;
mod bootstrap;
mod gp;

pub use avm::{avm, avm_exact, empirical_cdf, AvmResult, EmpiricalCdf};
pub use bootstrap::{bootstrap_error_quantile, BootstrapErrorReport, BootstrapSettings};
pub use gp::{
    beta_closed_form_with, correlation, factor_theta, gp_beta_closed_form, gp_beta_empirical,
    gp_covariance, gp_error_quantile, gp_fit_map, gp_log_posterior, gp_loglikelihood,
    gp_loglikelihood_gradient, log_prior, log_reciprocal_prior, profile_hyper, theta_matrix,
    BetaMode, DiscrepancyData, GpDiscrepancyParams, GpErrorQuantile, GpFit, GpHyperParams,
    LogPosterior, MapOptions, ThetaFactor,
};

/// Exact sample median (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

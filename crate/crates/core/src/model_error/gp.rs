//! Gaussian-process discrepancy model Y = m(x) + δ(x) + ε with a constant
//! mean β, squared-exponential covariance σ²·exp(−Σ ωⱼ(z₁ʲ − z₂ʲ)²) and
//! noise variance λ.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetKind, InputSample, PairedDataset};
use crate::density::order_rank;
use crate::error::{Result, UqError};
use crate::optimize::NelderMead;
use crate::randgen::MvnParams;
use crate::rng;

use super::median;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Experimental pairs with the computer-model output m(Xᵢ) at each input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyData {
    pub experimental: PairedDataset,
    pub model_outputs: Vec<f64>,
}

impl DiscrepancyData {
    pub fn new(experimental: PairedDataset, model_outputs: Vec<f64>) -> Result<Self> {
        if experimental.kind != DatasetKind::Experimental {
            return Err(UqError::InvalidData("discrepancy data must be experimental".into()));
        }
        if model_outputs.len() != experimental.len() {
            return Err(UqError::DimensionMismatch {
                expected: experimental.len(),
                got: model_outputs.len(),
            });
        }
        if model_outputs.iter().any(|v| !v.is_finite()) {
            return Err(UqError::InvalidData("non-finite model output".into()));
        }
        Ok(Self {
            experimental,
            model_outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.model_outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.experimental.dim()
    }

    pub fn inputs(&self) -> &InputSample {
        &self.experimental.inputs
    }

    /// Yᵢ − m(Xᵢ).
    pub fn differences(&self) -> Vec<f64> {
        self.experimental
            .outputs
            .iter()
            .zip(&self.model_outputs)
            .map(|(y, m)| y - m)
            .collect()
    }
}

/// Model parameters (λ, β, σ², ω₁…ω_d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDiscrepancyParams {
    pub lambda: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub omega: Vec<f64>,
}

impl GpDiscrepancyParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.omega.len() != dim {
            return Err(UqError::DimensionMismatch {
                expected: dim,
                got: self.omega.len(),
            });
        }
        let all = [self.lambda, self.sigma2].into_iter().chain(self.omega.iter().copied());
        for v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(UqError::Domain(format!(
                    "variance and inverse length-scale parameters must be finite and ≥ 0, got {v}"
                )));
            }
        }
        if !self.beta.is_finite() {
            return Err(UqError::Domain("β must be finite".into()));
        }
        Ok(())
    }
}

/// Prior parameters: normal priors on λ and β, truncated reciprocal priors
/// c/t on [ε, e^{1/c}·ε] for σ² and each ωⱼ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperParams {
    pub mu_lambda: f64,
    pub var_lambda: f64,
    pub mu_beta: f64,
    pub var_beta: f64,
    pub c_sigma2: f64,
    pub c_omega: Vec<f64>,
    pub trunc_floor: f64,
}

impl GpHyperParams {
    /// Weakly informative defaults scaled to the data.
    ///
    /// With s² the mean square of Yᵢ − m(Xᵢ): ε = 1e-6·s², σ² may reach
    /// 1e3·s², ωⱼ may reach 1e4 / var(Xʲ), and the normal priors have
    /// standard deviations of 10·s² (λ) and 10·s (β).
    pub fn default_for(data: &DiscrepancyData) -> Self {
        let diffs = data.differences();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let ms = diffs.iter().map(|d| d * d).sum::<f64>() / n;
        let scale2 = if ms > 0.0 { ms } else { 1.0 };
        let eps = 1e-6 * scale2;
        let c_for = |upper: f64| {
            let ratio = (upper / eps).max(std::f64::consts::E.powi(20));
            1.0 / ratio.ln()
        };
        let c_omega = (0..data.dim())
            .map(|j| {
                let col = data.inputs().column(j);
                let m = col.iter().sum::<f64>() / n;
                let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
                let v = if v > 0.0 { v } else { 1.0 };
                c_for(1e4 / v)
            })
            .collect();
        Self {
            mu_lambda: 0.0,
            var_lambda: (10.0 * scale2).powi(2),
            mu_beta: mean,
            var_beta: 100.0 * scale2,
            c_sigma2: c_for(1e3 * scale2),
            c_omega,
            trunc_floor: eps,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.c_omega.len() != dim {
            return Err(UqError::DimensionMismatch {
                expected: dim,
                got: self.c_omega.len(),
            });
        }
        let positives = [self.var_lambda, self.var_beta, self.c_sigma2, self.trunc_floor]
            .into_iter()
            .chain(self.c_omega.iter().copied());
        if positives.into_iter().any(|v| !(v > 0.0) || !v.is_finite()) {
            return Err(UqError::Domain(
                "prior variances, reciprocal constants and the truncation floor must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Upper end e^{1/c}·ε of a truncated reciprocal prior.
    pub fn support_upper(&self, c: f64) -> f64 {
        (1.0 / c).exp() * self.trunc_floor
    }
}

/// Truncated reciprocal density c/t on [ε, e^{1/c}·ε]; None outside.
pub fn log_reciprocal_prior(t: f64, c: f64, floor: f64) -> Option<f64> {
    let upper = (1.0 / c).exp() * floor;
    if t >= floor && t <= upper {
        Some((c / t).ln())
    } else {
        None
    }
}

fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln() + LN_2PI)
}

/// R(z₁, z₂) = exp(−Σ ωⱼ(z₁ʲ − z₂ʲ)²).
pub fn correlation(z1: &[f64], z2: &[f64], omega: &[f64]) -> f64 {
    let s: f64 = z1
        .iter()
        .zip(z2)
        .zip(omega)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum();
    (-s).exp()
}

/// c(z₁, z₂) = σ²·R(z₁, z₂).
pub fn gp_covariance(z1: &[f64], z2: &[f64], params: &GpDiscrepancyParams) -> Result<f64> {
    if z1.len() != z2.len() || z1.len() != params.omega.len() {
        return Err(UqError::DimensionMismatch {
            expected: params.omega.len(),
            got: if z1.len() != params.omega.len() { z1.len() } else { z2.len() },
        });
    }
    Ok(params.sigma2 * correlation(z1, z2, &params.omega))
}

/// Θ = (σ²R(Xₖ, Xₗ) + λ·1{k = l}).
pub fn theta_matrix(inputs: &InputSample, sigma2: f64, lambda: f64, omega: &[f64]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut theta = DMatrix::zeros(n, n);
    for k in 0..n {
        theta[(k, k)] = sigma2 + lambda;
        for l in 0..k {
            let v = sigma2 * correlation(inputs.row(k), inputs.row(l), omega);
            theta[(k, l)] = v;
            theta[(l, k)] = v;
        }
    }
    theta
}

/// Cholesky factor of Θ and the diagonal jitter that was needed.
pub struct ThetaFactor {
    pub cholesky: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl ThetaFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.cholesky.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(b)
    }
}

/// Factor Θ, adding jitter 1e-10·tr(Θ)/n on failure and escalating ×10 up
/// to 1e-6·tr(Θ)/n.
pub fn factor_theta(theta: &DMatrix<f64>) -> Result<ThetaFactor> {
    if let Some(cholesky) = theta.clone().cholesky() {
        return Ok(ThetaFactor {
            cholesky,
            jitter: 0.0,
        });
    }
    let n = theta.nrows();
    let base = theta.trace() / n as f64;
    let mut rel = 1e-10;
    let mut last = 0.0;
    while rel <= 1e-6 * (1.0 + 1e-9) && base > 0.0 {
        let jitter = rel * base;
        last = jitter;
        let mut m = theta.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(cholesky) = m.cholesky() {
            return Ok(ThetaFactor { cholesky, jitter });
        }
        rel *= 10.0;
    }
    Err(UqError::Conditioning { jitter: last })
}

fn residual_vector(data: &DiscrepancyData, beta: f64) -> DVector<f64> {
    DVector::from_iterator(data.len(), data.differences().into_iter().map(|d| d - beta))
}

fn factor_for(params: &GpDiscrepancyParams, data: &DiscrepancyData) -> Result<ThetaFactor> {
    params.validate(data.dim())?;
    factor_theta(&theta_matrix(
        data.inputs(),
        params.sigma2,
        params.lambda,
        &params.omega,
    ))
}

fn loglik_with(factor: &ThetaFactor, r: &DVector<f64>) -> f64 {
    let alpha = factor.solve(r);
    -0.5 * (r.dot(&alpha) + factor.log_det() + r.len() as f64 * LN_2PI)
}

/// log f(y | λ, β, σ², ω): the multivariate-normal log density of
/// y − m − β·1 under covariance Θ.
pub fn gp_loglikelihood(params: &GpDiscrepancyParams, data: &DiscrepancyData) -> Result<f64> {
    let factor = factor_for(params, data)?;
    Ok(loglik_with(&factor, &residual_vector(data, params.beta)))
}

/// Analytic gradient of [`gp_loglikelihood`] with respect to
/// (λ, β, σ², ω₁…ω_d), in that order.
pub fn gp_loglikelihood_gradient(
    params: &GpDiscrepancyParams,
    data: &DiscrepancyData,
) -> Result<Vec<f64>> {
    let factor = factor_for(params, data)?;
    let n = data.len();
    let r = residual_vector(data, params.beta);
    let alpha = factor.solve(&r);
    let theta_inv = factor.cholesky.inverse();
    // W = ααᵀ − Θ⁻¹; ∂ℓ/∂θ = ½·tr(W·∂Θ/∂θ)
    let w = &alpha * alpha.transpose() - &theta_inv;
    let x = data.inputs();
    let mut grad = vec![0.0; 3 + params.omega.len()];
    grad[0] = 0.5 * w.trace();
    grad[1] = alpha.sum();
    let mut d_sigma = 0.0;
    let mut d_omega = vec![0.0; params.omega.len()];
    for k in 0..n {
        for l in 0..n {
            let rkl = correlation(x.row(k), x.row(l), &params.omega);
            d_sigma += w[(k, l)] * rkl;
            for (j, g) in d_omega.iter_mut().enumerate() {
                let diff = x.row(k)[j] - x.row(l)[j];
                *g -= w[(k, l)] * params.sigma2 * rkl * diff * diff;
            }
        }
    }
    grad[2] = 0.5 * d_sigma;
    for (j, g) in d_omega.into_iter().enumerate() {
        grad[3 + j] = 0.5 * g;
    }
    Ok(grad)
}

/// Unnormalised log posterior, or a flag when the parameters leave the
/// prior support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPosterior {
    /// −∞ when `in_support` is false.
    pub value: f64,
    pub in_support: bool,
    pub jitter: f64,
}

impl LogPosterior {
    fn outside() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            in_support: false,
            jitter: 0.0,
        }
    }
}

/// Sum of the log prior densities, or None outside the support.
pub fn log_prior(params: &GpDiscrepancyParams, hyper: &GpHyperParams) -> Option<f64> {
    if params.lambda < 0.0 {
        return None;
    }
    let mut lp = log_normal_density(params.lambda, hyper.mu_lambda, hyper.var_lambda)
        + log_normal_density(params.beta, hyper.mu_beta, hyper.var_beta);
    lp += log_reciprocal_prior(params.sigma2, hyper.c_sigma2, hyper.trunc_floor)?;
    for (w, c) in params.omega.iter().zip(&hyper.c_omega) {
        lp += log_reciprocal_prior(*w, *c, hyper.trunc_floor)?;
    }
    Some(lp)
}

/// log likelihood + log priors. The normalising marginal of the data is
/// omitted; it does not depend on the model parameters.
pub fn gp_log_posterior(
    params: &GpDiscrepancyParams,
    hyper: &GpHyperParams,
    data: &DiscrepancyData,
) -> Result<LogPosterior> {
    params.validate(data.dim())?;
    hyper.validate(data.dim())?;
    let Some(lp) = log_prior(params, hyper) else {
        return Ok(LogPosterior::outside());
    };
    let factor = factor_for(params, data)?;
    let ll = loglik_with(&factor, &residual_vector(data, params.beta));
    Ok(LogPosterior {
        value: ll + lp,
        in_support: true,
        jitter: factor.jitter,
    })
}

/// β̂ = 1ᵀΘ⁻¹(y − m) / 1ᵀΘ⁻¹1 for an explicit Θ.
pub fn beta_closed_form_with(theta: &DMatrix<f64>, differences: &[f64]) -> Result<f64> {
    if theta.nrows() != differences.len() || theta.ncols() != differences.len() {
        return Err(UqError::DimensionMismatch {
            expected: differences.len(),
            got: theta.nrows(),
        });
    }
    let factor = factor_theta(theta)?;
    Ok(beta_from_factor(&factor, differences))
}

fn beta_from_factor(factor: &ThetaFactor, differences: &[f64]) -> f64 {
    let ones = DVector::from_element(differences.len(), 1.0);
    let t_inv_one = factor.solve(&ones);
    let d = DVector::from_column_slice(differences);
    t_inv_one.dot(&d) / t_inv_one.sum()
}

/// Maximiser of the likelihood over β with (λ, σ², ω) fixed; `params.beta`
/// is ignored.
pub fn gp_beta_closed_form(params: &GpDiscrepancyParams, data: &DiscrepancyData) -> Result<f64> {
    let factor = factor_for(params, data)?;
    Ok(beta_from_factor(&factor, &data.differences()))
}

/// β̂ = (1/n)·Σ(Yᵢ − m(Xᵢ)).
pub fn gp_beta_empirical(data: &DiscrepancyData) -> f64 {
    let d = data.differences();
    d.iter().sum::<f64>() / d.len() as f64
}

/// How β is handled during the MAP fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    /// Profile β out with the closed-form maximiser at every step.
    #[default]
    ClosedForm,
    /// Fix β at the mean difference.
    Empirical,
    /// Optimise β jointly with the other parameters.
    Free,
}

/// Optimiser budget for the MAP fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    pub restarts: usize,
    pub max_evals: usize,
    /// Also maximise over the prior means and reciprocal constants.
    #[serde(default)]
    pub joint_hyper: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_evals: 3000,
            joint_hyper: false,
        }
    }
}

/// Result of a MAP fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFit {
    pub params: GpDiscrepancyParams,
    /// Unnormalised log posterior at `params` (with `hyper`).
    pub objective: f64,
    pub hyper: GpHyperParams,
    pub jitter: f64,
    pub beta_mode: BetaMode,
    pub successful_starts: usize,
}

/// Hyperparameters that maximise the prior terms for given parameters:
/// normal means at the parameter values, reciprocal constants at the largest
/// c whose support still contains the value. Variances stay fixed, since
/// shrinking them makes the objective unbounded.
pub fn profile_hyper(params: &GpDiscrepancyParams, hyper: &GpHyperParams) -> GpHyperParams {
    let c_for = |t: f64| {
        let ratio = t / hyper.trunc_floor;
        if ratio > 1.0 {
            1.0 / ratio.ln()
        } else {
            f64::MAX.sqrt()
        }
    };
    GpHyperParams {
        mu_lambda: params.lambda,
        mu_beta: params.beta,
        c_sigma2: c_for(params.sigma2),
        c_omega: params.omega.iter().map(|&w| c_for(w)).collect(),
        ..hyper.clone()
    }
}

struct Layout {
    dim: usize,
    free_beta: bool,
}

impl Layout {
    fn unpack(&self, u: &[f64], beta: f64) -> GpDiscrepancyParams {
        GpDiscrepancyParams {
            lambda: u[0].exp(),
            sigma2: u[1].exp(),
            omega: u[2..2 + self.dim].iter().map(|v| v.exp()).collect(),
            beta: if self.free_beta { u[2 + self.dim] } else { beta },
        }
    }
}

/// Multi-start maximisation of the log posterior.
///
/// λ, σ² and the ωⱼ are optimised on the log scale; β follows `beta_mode`.
/// Start k draws its initial point from stream k of `seed`; if `init` is
/// given it replaces the first start. The best local optimum is returned.
pub fn gp_fit_map(
    data: &DiscrepancyData,
    hyper: &GpHyperParams,
    beta_mode: BetaMode,
    options: &MapOptions,
    init: Option<&GpDiscrepancyParams>,
    seed: u64,
) -> Result<GpFit> {
    let n = data.len();
    if n < 2 {
        return Err(UqError::InsufficientData {
            what: "experimental points for the discrepancy fit",
            needed: 2,
            got: n,
        });
    }
    let dim = data.dim();
    hyper.validate(dim)?;
    if options.restarts == 0 {
        return Err(UqError::Domain("need at least one optimizer start".into()));
    }
    let layout = Layout {
        dim,
        free_beta: beta_mode == BetaMode::Free,
    };
    let differences = data.differences();
    let beta_emp = gp_beta_empirical(data);
    let eps = hyper.trunc_floor;
    let lambda_hi = (10.0 * differences.iter().map(|d| d * d).sum::<f64>() / n as f64).max(10.0 * eps);

    // Objective on the optimisation vector, with β resolved per mode.
    let evaluate = |u: &[f64]| -> Option<(GpDiscrepancyParams, f64, f64)> {
        let mut p = layout.unpack(u, beta_emp);
        let factor =
            factor_theta(&theta_matrix(data.inputs(), p.sigma2, p.lambda, &p.omega)).ok()?;
        if beta_mode == BetaMode::ClosedForm {
            p.beta = beta_from_factor(&factor, &differences);
        }
        let h = if options.joint_hyper {
            profile_hyper(&p, hyper)
        } else {
            hyper.clone()
        };
        let lp = log_prior(&p, &h)?;
        let ll = loglik_with(&factor, &residual_vector(data, p.beta));
        let v = ll + lp;
        v.is_finite().then_some((p, v, factor.jitter))
    };

    let starts: Vec<Vec<f64>> = (0..options.restarts)
        .map(|k| {
            if k == 0 {
                if let Some(p) = init {
                    let mut u = vec![p.lambda.max(eps).ln(), p.sigma2.max(eps).ln()];
                    u.extend(p.omega.iter().map(|w| w.max(eps).ln()));
                    if layout.free_beta {
                        u.push(p.beta);
                    }
                    return u;
                }
            }
            let mut r = rng::stream(seed, k as u64);
            let mut u = vec![
                r.random_range(eps.ln()..lambda_hi.ln()),
                r.random_range(eps.ln()..hyper.support_upper(hyper.c_sigma2).ln()),
            ];
            for c in &hyper.c_omega {
                u.push(r.random_range(eps.ln()..hyper.support_upper(*c).ln()));
            }
            if layout.free_beta {
                let sd = hyper.var_beta.sqrt().min(differences.iter().map(|d| d.abs()).fold(0.0, f64::max) + eps.sqrt());
                u.push(beta_emp + sd * r.sample::<f64, _>(StandardNormal) * 0.1);
            }
            u
        })
        .collect();

    let nm = NelderMead {
        max_evals: options.max_evals,
        initial_step: 0.5,
        ..Default::default()
    };
    let results: Vec<Option<(GpDiscrepancyParams, f64, f64)>> = starts
        .par_iter()
        .map(|u0| {
            evaluate(u0)?;
            let (u, _) = nm.minimize(|u| evaluate(u).map_or(f64::INFINITY, |(_, v, _)| -v), u0);
            evaluate(&u)
        })
        .collect();

    let successful_starts = results.iter().filter(|r| r.is_some()).count();
    let (params, _, jitter) = results
        .into_iter()
        .flatten()
        .fold(None::<(GpDiscrepancyParams, f64, f64)>, |best, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .ok_or(UqError::FitFailed {
            starts: options.restarts,
        })?;
    let hyper_out = if options.joint_hyper {
        profile_hyper(&params, hyper)
    } else {
        hyper.clone()
    };
    let objective = gp_log_posterior(&params, &hyper_out, data)?.value;
    Ok(GpFit {
        params,
        objective,
        hyper: hyper_out,
        jitter,
        beta_mode,
        successful_starts,
    })
}

/// Median and replicate values of the simulated α-quantile of |errors|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpErrorQuantile {
    pub median: f64,
    pub quantiles: Vec<f64>,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Simulate the error vector (δ(Xᵢ) + εᵢ)ᵢ ~ N(β·1, σ²R + λI) `reps` times
/// and return the α-quantile of its absolute values per replicate, plus the
/// median over replicates. Replicate r uses stream r of `seed`.
pub fn gp_error_quantile(
    params: &GpDiscrepancyParams,
    inputs: &InputSample,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<GpErrorQuantile> {
    params.validate(inputs.dim())?;
    if reps == 0 {
        return Err(UqError::Domain("reps must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(UqError::Domain(format!("level {alpha} outside (0, 1)")));
    }
    let n = inputs.len();
    let cov = theta_matrix(inputs, params.sigma2, params.lambda, &params.omega);
    let mvn = MvnParams::new(DVector::from_element(n, params.beta), cov)?;
    let t = mvn.eigen()?.transform();
    let k = order_rank(n, alpha);
    let quantiles: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            let z = DVector::from_fn(n, |_, _| g.sample::<f64, _>(StandardNormal));
            let e = &t * z;
            let mut abs: Vec<f64> = e.iter().map(|v| (v + params.beta).abs()).collect();
            let (_, q, _) = abs.select_nth_unstable_by(k - 1, f64::total_cmp);
            *q
        })
        .collect();
    Ok(GpErrorQuantile {
        median: median(&quantiles),
        quantiles,
        alpha,
        reps,
        seed,
    })
}

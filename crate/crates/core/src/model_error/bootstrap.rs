use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{InputSample, PairedDataset};
use crate::density::order_rank;
use crate::error::{Result, UqError};
use crate::rng;
use crate::surrogate::{
    compute_residuals, fit_residual_model, fit_residual_model_weighted, FunctionFamily, Surrogate,
};

use super::median;

/// Settings of the bootstrap error quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    /// Number of bootstrap replicates B.
    pub reps: usize,
    /// Points of each replicate used to fit the residual model.
    pub n_learn: usize,
    pub alpha: f64,
    pub residual_family: FunctionFamily,
    /// Weight w of the experimental term; w < 1 needs additional inputs.
    #[serde(default = "one")]
    pub weight: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Replicate quantiles of |m̂ε| and their median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapErrorReport {
    pub quantiles: Vec<f64>,
    pub median: f64,
    pub settings: BootstrapSettings,
}

/// For each replicate b: draw n indices with replacement, fit the residual
/// model on the first `n_learn` drawn pairs (Xᵢ, εᵢ), and take the
/// ⌈(n − n_learn)·α⌉-th smallest |m̂ε(Xᵢ)| over the remaining drawn points.
/// Replicate b uses stream b of `settings.seed`.
pub fn bootstrap_error_quantile<S: Surrogate + ?Sized>(
    experimental: &PairedDataset,
    base: &S,
    extra_inputs: Option<&InputSample>,
    settings: &BootstrapSettings,
) -> Result<BootstrapErrorReport> {
    let n = experimental.len();
    if settings.reps == 0 {
        return Err(UqError::Domain("bootstrap needs at least one replicate".into()));
    }
    if settings.n_learn == 0 || settings.n_learn >= n {
        return Err(UqError::Domain(format!(
            "learning size {} must lie in [1, {}]",
            settings.n_learn,
            n.saturating_sub(1)
        )));
    }
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(UqError::Domain(format!("level {} outside (0, 1)", settings.alpha)));
    }
    let extra = if settings.weight < 1.0 {
        Some(extra_inputs.ok_or_else(|| {
            UqError::InvalidData("a weight below 1 needs additional inputs".into())
        })?)
    } else {
        None
    };
    let residuals = compute_residuals(base, experimental)?;
    let k = order_rank(n - settings.n_learn, settings.alpha);

    let quantiles = (0..settings.reps)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(settings.seed, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let (learn, test) = idx.split_at(settings.n_learn);
            let learn_data = experimental.select(learn);
            let learn_res: Vec<f64> = learn.iter().map(|&i| residuals[i]).collect();
            let model = match extra {
                Some(x) => fit_residual_model_weighted(
                    &settings.residual_family,
                    &learn_data,
                    &learn_res,
                    x,
                    settings.weight,
                )?,
                None => fit_residual_model(&settings.residual_family, &learn_data, &learn_res)?,
            };
            let mut abs: Vec<f64> = test
                .iter()
                .map(|&i| model.evaluate(experimental.inputs.row(i)).abs())
                .collect();
            let (_, q, _) = abs.select_nth_unstable_by(k - 1, f64::total_cmp);
            Ok(*q)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(BootstrapErrorReport {
        median: median(&quantiles),
        quantiles,
        settings: settings.clone(),
    })
}

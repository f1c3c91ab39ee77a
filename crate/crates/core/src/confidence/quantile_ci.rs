use serde::{Deserialize, Serialize};

use crate::data::PairedDataset;
use crate::density::quantile_sorted;
use crate::error::{Result, UqError};
use crate::surrogate::{compute_residuals, Surrogate};

use super::eps_gamma::{minimize_eps_gamma, EpsGamma};

/// Δδ as fractions of δ tried by the sweep.
pub fn default_delta_delta_fractions() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// s = √(−ln(Δδ/2)/(2N)); zero for N = ∞.
pub fn level_shift(big_n: f64, delta_delta: f64) -> f64 {
    if big_n.is_infinite() {
        0.0
    } else {
        (-(delta_delta / 2.0).ln() / (2.0 * big_n)).sqrt()
    }
}

/// Quantile levels α ∓ (s + ε + γ) for one choice of Δδ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiLevels {
    pub delta_delta: f64,
    pub eps: f64,
    pub gamma: f64,
    pub shift: f64,
    /// N₁(n)/N − ε − γ.
    pub lower: f64,
    /// N₂(n)/N + ε + γ.
    pub upper: f64,
}

impl CiLevels {
    pub fn feasible(&self) -> bool {
        self.lower > 0.0 && self.upper < 1.0
    }
}

fn check_levels(alpha: f64, delta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(UqError::Domain(format!("level {alpha} outside (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(UqError::Domain(format!("δ = {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Levels for a fixed Δδ ∈ (0, δ); N = ∞ gives the large-sample limit.
pub fn ci_levels(n: usize, big_n: f64, alpha: f64, delta: f64, delta_delta: f64) -> Result<CiLevels> {
    check_levels(alpha, delta)?;
    if !(delta_delta > 0.0 && delta_delta < delta) {
        return Err(UqError::Domain(format!("Δδ = {delta_delta} outside (0, {delta})")));
    }
    let EpsGamma { eps, gamma, .. } = minimize_eps_gamma(n, big_n, delta - delta_delta)?;
    let shift = level_shift(big_n, delta_delta);
    Ok(CiLevels {
        delta_delta,
        eps,
        gamma,
        shift,
        lower: alpha - shift - eps - gamma,
        upper: alpha + shift + eps + gamma,
    })
}

/// Outcome of screening Δδ = f·δ over a list of fractions f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Feasible levels with the narrowest level range, or the narrowest
    /// overall when none is feasible.
    pub best: CiLevels,
    pub candidates: Vec<CiLevels>,
}

/// Whether some Δδ on the grid yields quantile levels inside (0, 1).
pub fn ci_feasibility(
    n: usize,
    alpha: f64,
    delta: f64,
    big_n: f64,
    fractions: &[f64],
) -> Result<FeasibilityReport> {
    check_levels(alpha, delta)?;
    if fractions.is_empty() {
        return Err(UqError::Domain("empty Δδ grid".into()));
    }
    let candidates = fractions
        .iter()
        .map(|f| ci_levels(n, big_n, alpha, delta, f * delta))
        .collect::<Result<Vec<_>>>()?;
    let spread = |c: &CiLevels| c.upper - c.lower;
    let feasible = candidates.iter().any(CiLevels::feasible);
    let best = *candidates
        .iter()
        .filter(|c| !feasible || c.feasible())
        .fold(None::<&CiLevels>, |b, c| match b {
            Some(b) if spread(b) <= spread(c) => Some(b),
            _ => Some(c),
        })
        .expect("nonempty");
    Ok(FeasibilityReport {
        feasible,
        best,
        candidates,
    })
}

/// Smallest n ≤ `max_n` for which the Δδ grid has a feasible choice.
pub fn minimal_feasible_n(
    alpha: f64,
    delta: f64,
    big_n: f64,
    fractions: &[f64],
    max_n: usize,
) -> Result<Option<usize>> {
    for n in 1..=max_n {
        if ci_feasibility(n, alpha, delta, big_n, fractions)?.feasible {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Smallest δ (to within `tol`) for which the Δδ grid has a feasible
/// choice, found by bisection; None if even δ → 1 is infeasible.
pub fn minimal_feasible_delta(
    n: usize,
    alpha: f64,
    big_n: f64,
    fractions: &[f64],
    tol: f64,
) -> Result<Option<f64>> {
    let ok = |d: f64| ci_feasibility(n, alpha, d, big_n, fractions).map(|r| r.feasible);
    let mut hi = 1.0 - 1e-12;
    if !ok(hi)? {
        return Ok(None);
    }
    let mut lo = 1e-12;
    if ok(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// How Δδ is chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum DeltaDelta {
    /// Δδ = δ/2.
    #[default]
    Half,
    Fixed(f64),
    /// Try each fraction of δ and keep the narrowest interval.
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiSettings {
    pub alpha: f64,
    pub delta: f64,
    #[serde(default)]
    pub delta_delta: DeltaDelta,
}

/// Confidence interval for the α-quantile of Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCi {
    pub lo: f64,
    pub hi: f64,
    pub settings: CiSettings,
    pub n: usize,
    pub big_n: usize,
    /// maxᵢ |Yᵢ − m̂(Xᵢ)|.
    pub beta_hat: f64,
    pub levels: CiLevels,
    /// Order-statistic estimates at the two levels, before the ±β̂ shift.
    pub q_lower: f64,
    pub q_upper: f64,
}

/// β̂ = maxᵢ |Yᵢ − m̂(Xᵢ)|.
pub fn max_abs_error<S: Surrogate + ?Sized>(experimental: &PairedDataset, surrogate: &S) -> Result<f64> {
    Ok(compute_residuals(surrogate, experimental)?
        .into_iter()
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// [q̂(lower level) − β̂, q̂(upper level) + β̂] from N surrogate outputs.
pub fn quantile_ci<S: Surrogate + ?Sized>(
    experimental: &PairedDataset,
    surrogate: &S,
    outputs: &[f64],
    settings: &CiSettings,
) -> Result<QuantileCi> {
    let beta_hat = max_abs_error(experimental, surrogate)?;
    quantile_ci_with_beta(experimental.len(), beta_hat, outputs, settings)
}

/// As [`quantile_ci`] with β̂ given.
pub fn quantile_ci_with_beta(
    n: usize,
    beta_hat: f64,
    outputs: &[f64],
    settings: &CiSettings,
) -> Result<QuantileCi> {
    let CiSettings { alpha, delta, .. } = *settings;
    check_levels(alpha, delta)?;
    if outputs.is_empty() {
        return Err(UqError::InsufficientData {
            what: "surrogate outputs",
            needed: 1,
            got: 0,
        });
    }
    if !(beta_hat >= 0.0) {
        return Err(UqError::Domain(format!("β̂ = {beta_hat} must be ≥ 0")));
    }
    let big_n = outputs.len() as f64;
    let fractions = match &settings.delta_delta {
        DeltaDelta::Half => vec![0.5],
        DeltaDelta::Fixed(dd) => vec![dd / delta],
        DeltaDelta::Sweep(f) => f.clone(),
    };
    let report = ci_feasibility(n, alpha, delta, big_n, &fractions)?;
    if !report.feasible {
        let all = default_delta_delta_fractions();
        let minimal_delta = minimal_feasible_delta(n, alpha, big_n, &all, 1e-6)?;
        return Err(UqError::Infeasible {
            reason: format!(
                "quantile levels leave (0, 1): best range [{:.6}, {:.6}]",
                report.best.lower, report.best.upper
            ),
            minimal_delta,
        });
    }
    let mut sorted = outputs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<QuantileCi> = None;
    for levels in report.candidates.iter().filter(|c| c.feasible()) {
        let q_lower = quantile_sorted(&sorted, levels.lower)?;
        let q_upper = quantile_sorted(&sorted, levels.upper)?;
        let ci = QuantileCi {
            lo: q_lower - beta_hat,
            hi: q_upper + beta_hat,
            settings: settings.clone(),
            n,
            big_n: outputs.len(),
            beta_hat,
            levels: *levels,
            q_lower,
            q_upper,
        };
        if best.as_ref().is_none_or(|b| ci.hi - ci.lo < b.hi - b.lo) {
            best = Some(ci);
        }
    }
    Ok(best.expect("at least one feasible candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_n_is_infeasible_large_n_feasible() {
        let f = default_delta_delta_fractions();
        assert!(!ci_feasibility(10, 0.95, 0.05, f64::INFINITY, &f).unwrap().feasible);
        assert!(ci_feasibility(100, 0.5, 0.5, f64::INFINITY, &f).unwrap().feasible);
    }

    #[test]
    fn zero_error_gives_inner_order_statistics() {
        let outputs: Vec<f64> = (1..=100_000).map(|i| i as f64).collect();
        let s = CiSettings {
            alpha: 0.9,
            delta: 0.1,
            delta_delta: DeltaDelta::Half,
        };
        let ci = quantile_ci_with_beta(200, 0.0, &outputs, &s).unwrap();
        assert_eq!(ci.lo, ci.q_lower);
        assert_eq!(ci.hi, ci.q_upper);
        assert!(ci.lo < 90_000.0 && ci.hi > 90_000.0);
    }

    #[test]
    fn infeasible_error_carries_minimal_delta() {
        let outputs: Vec<f64> = (0..200_000).map(|i| i as f64).collect();
        let s = CiSettings {
            alpha: 0.95,
            delta: 0.05,
            delta_delta: DeltaDelta::Half,
        };
        match quantile_ci_with_beta(10, 0.0, &outputs, &s) {
            Err(UqError::Infeasible { minimal_delta: Some(d), .. }) => assert!(d > 0.6 && d < 0.9, "{d}"),
            other => panic!("{other:?}"),
        }
    }
}

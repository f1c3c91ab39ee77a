use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};
use crate::optimize::golden_section;

/// Minimiser of ε + γ(ε) subject to (1 − ε)ⁿ < t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsGamma {
    pub eps: f64,
    pub gamma: f64,
    /// ε + γ.
    pub objective: f64,
}

fn check(n: usize, big_n: f64, t: f64) -> Result<()> {
    if n == 0 {
        return Err(UqError::Domain("n must be at least 1".into()));
    }
    if !(big_n > 0.0) {
        return Err(UqError::Domain(format!("sample size {big_n} must be positive")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(UqError::Infeasible {
            reason: format!("confidence budget {t} outside (0, 1)"),
            minimal_delta: None,
        });
    }
    Ok(())
}

/// Smallest admissible ε, 1 − t^{1/n}; admissible values are strictly larger.
pub fn eps_lower_bound(n: usize, t: f64) -> f64 {
    -(t.ln() / n as f64).exp_m1()
}

fn gamma(n: usize, big_n: f64, t: f64, eps: f64) -> f64 {
    let slack = t - (n as f64 * (-eps).ln_1p()).exp();
    if !(slack > 0.0) {
        return f64::INFINITY;
    }
    if big_n.is_infinite() {
        return 0.0;
    }
    (-slack.ln() / (2.0 * big_n)).max(0.0).sqrt()
}

/// ε + √(−ln(t − (1 − ε)ⁿ)/(2N)), with N = ∞ allowed.
///
/// Errors unless ε ∈ (0, 1) and (1 − ε)ⁿ < t.
pub fn eps_gamma_objective(n: usize, big_n: f64, t: f64, eps: f64) -> Result<f64> {
    check(n, big_n, t)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(UqError::Domain(format!("ε = {eps} outside (0, 1)")));
    }
    let g = gamma(n, big_n, t, eps);
    if g.is_infinite() {
        return Err(UqError::Infeasible {
            reason: format!("(1 − ε)^n ≥ {t} at ε = {eps}"),
            minimal_delta: None,
        });
    }
    Ok(eps + g)
}

/// Minimise ε + γ over ε ∈ (1 − t^{1/n}, 1).
///
/// A log-spaced scan of the distance to the lower bound brackets the
/// optimum, which golden-section search then refines. For N = ∞ the
/// infimum sits at the lower bound and the smallest admissible ε above it
/// is returned.
pub fn minimize_eps_gamma(n: usize, big_n: f64, t: f64) -> Result<EpsGamma> {
    check(n, big_n, t)?;
    let lo = eps_lower_bound(n, t);
    let width = 1.0 - lo;
    if big_n.is_infinite() {
        let mut eps = lo;
        while gamma(n, big_n, t, eps).is_infinite() {
            eps = f64::max(eps * (1.0 + 4.0 * f64::EPSILON), eps + f64::MIN_POSITIVE);
        }
        return Ok(EpsGamma {
            eps,
            gamma: 0.0,
            objective: eps,
        });
    }
    let f = |u: f64| {
        let eps = lo + width * u;
        if eps <= 0.0 || eps >= 1.0 {
            return f64::INFINITY;
        }
        eps + gamma(n, big_n, t, eps)
    };
    const STEPS: usize = 2000;
    let us: Vec<f64> = (0..=STEPS)
        .map(|k| 10f64.powf(-17.0 + 17.0 * k as f64 / STEPS as f64) * (1.0 - 1e-12))
        .collect();
    let (k_best, _) = us
        .iter()
        .map(|&u| f(u))
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b });
    let a = if k_best == 0 { 0.0 } else { us[k_best - 1] };
    let b = us[(k_best + 1).min(STEPS)];
    let (mut u, mut v) = golden_section(f, a, b, 1e-15 * b.max(1e-300));
    if f(us[k_best]) < v {
        u = us[k_best];
        v = f(u);
    }
    if !v.is_finite() {
        return Err(UqError::Infeasible {
            reason: format!("no ε with (1 − ε)^{n} < {t} gives a finite objective"),
            minimal_delta: None,
        });
    }
    let eps = lo + width * u;
    Ok(EpsGamma {
        eps,
        gamma: v - eps,
        objective: v,
    })
}

use serde::{Deserialize, Serialize};

use crate::error::{Result, UqError};

/// Right-continuous empirical distribution function F̂(t) = #{vᵢ ≤ t}/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    if values.is_empty() {
        return Err(UqError::InsufficientData {
            what: "values for an empirical CDF",
            needed: 1,
            got: 0,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(UqError::InvalidData("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalCdf { sorted })
}

/// Area validation metric ∫|F̂_Y − F̂_m| dt by two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvmResult {
    /// Midpoint Riemann sum on `steps` equal cells of [grid_lo, grid_hi].
    pub riemann: f64,
    /// Exact integral of the piecewise-constant integrand.
    pub exact: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub steps: usize,
}

/// Exact ∫|F̂_a − F̂_b|, summing over the merged breakpoints.
pub fn avm_exact(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xa, xb) = (a.sorted_values(), b.sorted_values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut area = 0.0;
    let mut prev: Option<f64> = None;
    while i < xa.len() || j < xb.len() {
        let t = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            let gap = (i as f64 / na - j as f64 / nb).abs();
            area += gap * (t - p);
        }
        while i < xa.len() && xa[i] == t {
            i += 1;
        }
        while j < xb.len() && xb[j] == t {
            j += 1;
        }
        prev = Some(t);
    }
    area
}

/// AVM between experimental and simulated outputs.
///
/// The Riemann grid spans the pooled range extended by 1 % on each side.
pub fn avm(exp_outputs: &[f64], sim_outputs: &[f64], grid_steps: usize) -> Result<AvmResult> {
    if grid_steps < 2 {
        return Err(UqError::Domain(format!("grid_steps {grid_steps} must be ≥ 2")));
    }
    let fa = empirical_cdf(exp_outputs)?;
    let fb = empirical_cdf(sim_outputs)?;
    let lo = fa.sorted_values()[0].min(fb.sorted_values()[0]);
    let hi = fa.sorted_values()[fa.len() - 1].max(fb.sorted_values()[fb.len() - 1]);
    let range = hi - lo;
    let margin = if range > 0.0 {
        0.01 * range
    } else {
        0.01 * lo.abs().max(1.0)
    };
    let (grid_lo, grid_hi) = (lo - margin, hi + margin);
    let dt = (grid_hi - grid_lo) / grid_steps as f64;
    let riemann = (0..grid_steps)
        .map(|k| {
            let t = grid_lo + (k as f64 + 0.5) * dt;
            (fa.eval(t) - fb.eval(t)).abs()
        })
        .sum::<f64>()
        * dt;
    Ok(AvmResult {
        riemann,
        exact: avm_exact(&fa, &fb),
        grid_lo,
        grid_hi,
        steps: grid_steps,
    })
}

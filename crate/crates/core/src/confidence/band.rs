use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PairedDataset;
use crate::density::{select_bandwidth, Grid, KdeModel, Kernel};
use crate::error::{Result, UqError};
use crate::surrogate::Surrogate;

use super::eps_gamma::{minimize_eps_gamma, EpsGamma};
use super::quantile_ci::max_abs_error;

/// Which side of the band a supremum term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// μ̂(J^β) − ∫_J f̂.
    Upper,
    /// ∫_J f̂ − μ̂(J_β).
    Lower,
}

/// Empirical measure of the sorted outputs.
struct Empirical<'a> {
    sorted: &'a [f64],
}

impl Empirical<'_> {
    /// μ̂((−∞, x]).
    fn le(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// μ̂((−∞, x)).
    fn lt(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v < x) as f64 / self.sorted.len() as f64
    }
}

/// Sorted, deduplicated interval endpoints: outputs, outputs ± β, the
/// evaluation points, and one sentinel beyond each end so that every
/// evaluation point has an admissible interval.
pub fn candidate_endpoints(sorted: &[f64], beta: f64, points: &[f64], kappa: f64, reach: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(3 * sorted.len() + points.len() + 2);
    c.extend_from_slice(sorted);
    if beta > 0.0 {
        c.extend(sorted.iter().map(|v| v - beta));
        c.extend(sorted.iter().map(|v| v + beta));
    }
    c.extend_from_slice(points);
    c.sort_by(f64::total_cmp);
    c.dedup();
    let pad = 2.0 * kappa + 4.0 * beta + reach;
    let (lo, hi) = (c[0] - pad, c[c.len() - 1] + pad);
    c.insert(0, lo);
    c.push(hi);
    c
}

/// Range maximum in O(1) after O(M log M) preprocessing.
struct SparseMax {
    levels: Vec<Vec<f64>>,
}

impl SparseMax {
    fn new(values: Vec<f64>) -> Self {
        let mut levels = vec![values];
        let mut span = 1;
        while 2 * span <= levels[0].len() {
            let prev = levels.last().expect("nonempty");
            let next = (0..prev.len() - span).map(|i| prev[i].max(prev[i + span])).collect();
            levels.push(next);
            span *= 2;
        }
        Self { levels }
    }

    /// max over [lo, hi); −∞ when empty.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        let k = (usize::BITS - 1 - (hi - lo).leading_zeros()) as usize;
        self.levels[k][lo].max(self.levels[k][hi - (1 << k)])
    }
}

/// sup over a = C[i] ≤ y ≤ b = C[j], C[j] − C[i] ≥ gap of P[i] + Q[j],
/// for every y in `ys` (each y must be an element of C).
struct Separable {
    prefix_p: Vec<f64>,
    suffix_q: Vec<f64>,
    /// First j with C[j] − C[i] ≥ gap.
    first_j: Vec<usize>,
    h: SparseMax,
}

impl Separable {
    fn new(c: &[f64], p: &[f64], q: &[f64], gap: f64) -> Self {
        let m = c.len();
        let mut prefix_p = Vec::with_capacity(m);
        let mut acc = f64::NEG_INFINITY;
        for &v in p {
            acc = acc.max(v);
            prefix_p.push(acc);
        }
        let mut suffix_q = vec![f64::NEG_INFINITY; m + 1];
        for j in (0..m).rev() {
            suffix_q[j] = suffix_q[j + 1].max(q[j]);
        }
        let mut first_j = Vec::with_capacity(m);
        let mut j = 0;
        for i in 0..m {
            j = j.max(i);
            while j < m && c[j] - c[i] < gap {
                j += 1;
            }
            first_j.push(j);
        }
        let h = SparseMax::new((0..m).map(|i| p[i] + suffix_q[first_j[i]]).collect());
        Self {
            prefix_p,
            suffix_q,
            first_j,
            h,
        }
    }

    /// `iy` indexes y in C.
    fn sup(&self, iy: usize) -> f64 {
        // i < split have first_j[i] ≤ iy, so the binding lower end of b is y.
        let split = self.first_j[..=iy].partition_point(|&j| j <= iy);
        let near = if split > 0 {
            self.prefix_p[split - 1] + self.suffix_q[iy]
        } else {
            f64::NEG_INFINITY
        };
        near.max(self.h.query(split, iy + 1))
    }
}

/// Supremum of the interval mismatch over J = [a, b] ∋ y with |J| ≥ κ and
/// endpoints in the candidate set, for every y in `ys`.
///
/// For the lower direction, intervals with κ ≤ |J| < 2β have an empty inner
/// set J_β; their mismatch is ∫_J f̂, whose supremum over b < a + 2β is
/// taken in the limit b → a + 2β.
pub fn sup_interval_mismatch(
    direction: Direction,
    ys: &[f64],
    kappa: f64,
    beta: f64,
    kde: &KdeModel,
) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(UqError::Domain(format!("κ = {kappa} must be > 0")));
    }
    if !(beta >= 0.0) {
        return Err(UqError::Domain(format!("β̂ = {beta} must be ≥ 0")));
    }
    let sorted = kde.values();
    let emp = Empirical { sorted };
    let reach = 40.0 * kde.bandwidth();
    let c = candidate_endpoints(sorted, beta, ys, kappa, reach);
    let fk: Vec<f64> = c.iter().map(|&x| kde.cdf(x)).collect();
    let index = |y: f64| c.partition_point(|v| *v < y);

    match direction {
        Direction::Upper => {
            let p: Vec<f64> = c.iter().zip(&fk).map(|(&a, f)| f - emp.lt(a - beta)).collect();
            let q: Vec<f64> = c.iter().zip(&fk).map(|(&b, f)| emp.le(b + beta) - f).collect();
            let sep = Separable::new(&c, &p, &q, kappa);
            Ok(ys.iter().map(|&y| sep.sup(index(y))).collect())
        }
        Direction::Lower => {
            let p: Vec<f64> = c.iter().zip(&fk).map(|(&a, f)| emp.lt(a + beta) - f).collect();
            let q: Vec<f64> = c.iter().zip(&fk).map(|(&b, f)| f - emp.le(b - beta)).collect();
            let sep = Separable::new(&c, &p, &q, kappa.max(2.0 * beta));
            let short = if 2.0 * beta > kappa {
                let d: Vec<f64> = c
                    .iter()
                    .zip(&fk)
                    .map(|(&a, f)| kde.cdf(a + 2.0 * beta) - f)
                    .collect();
                Some(SparseMax::new(d))
            } else {
                None
            };
            Ok(ys
                .iter()
                .map(|&y| {
                    let iy = index(y);
                    let mut s = sep.sup(iy);
                    if let Some(d) = &short {
                        let from = c.partition_point(|a| a + 2.0 * beta <= y);
                        s = s.max(d.query(from, iy + 1));
                    }
                    s
                })
                .collect())
        }
    }
}

/// Settings of the density band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSettings {
    pub kappa: f64,
    pub delta: f64,
    /// Empty means one data-driven bandwidth.
    pub bandwidths: Vec<f64>,
    #[serde(default)]
    pub kernel: Kernel,
    pub grid: Grid,
}

/// Bounds for a single bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandComponent {
    pub bandwidth: f64,
    pub density: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Lower and upper density bounds on a grid, combined over bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub settings: BandSettings,
    pub beta_hat: f64,
    pub n: usize,
    pub big_n: usize,
    pub eps_gamma: EpsGamma,
    /// ε + γ + 2√(ln N)/√N.
    pub correction: f64,
    pub components: Vec<BandComponent>,
}

/// Band from N surrogate outputs, with β̂ = maxᵢ |Yᵢ − m̂(Xᵢ)|.
pub fn density_band<S: Surrogate + ?Sized>(
    outputs: &[f64],
    experimental: &PairedDataset,
    surrogate: &S,
    settings: &BandSettings,
) -> Result<DensityBand> {
    let beta_hat = max_abs_error(experimental, surrogate)?;
    density_band_with_beta(outputs, experimental.len(), beta_hat, settings)
}

/// As [`density_band`] with β̂ given.
pub fn density_band_with_beta(
    outputs: &[f64],
    n: usize,
    beta_hat: f64,
    settings: &BandSettings,
) -> Result<DensityBand> {
    let BandSettings { kappa, delta, .. } = *settings;
    if !(kappa > 0.0) {
        return Err(UqError::Domain(format!("κ = {kappa} must be > 0")));
    }
    if kappa > settings.grid.hi - settings.grid.lo {
        return Err(UqError::Domain(format!(
            "κ = {kappa} exceeds the evaluation interval [{}, {}]",
            settings.grid.lo, settings.grid.hi
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(UqError::Domain(format!("δ = {delta} outside (0, 1)")));
    }
    if outputs.len() < 2 {
        return Err(UqError::InsufficientData {
            what: "surrogate outputs for a density band",
            needed: 2,
            got: outputs.len(),
        });
    }
    let big_n = outputs.len() as f64;
    let budget = delta - 2.0 / (big_n * big_n);
    if !(budget > 0.0) {
        return Err(UqError::Infeasible {
            reason: format!("2/N² ≥ δ for N = {}", outputs.len()),
            minimal_delta: None,
        });
    }
    let eps_gamma = minimize_eps_gamma(n, big_n, budget)?;
    let correction = eps_gamma.objective + 2.0 * big_n.ln().sqrt() / big_n.sqrt();
    let bandwidths = if settings.bandwidths.is_empty() {
        vec![select_bandwidth(outputs)?]
    } else {
        settings.bandwidths.clone()
    };
    let grid = settings.grid.points();

    let components = bandwidths
        .par_iter()
        .map(|&h| {
            let kde = KdeModel::new(outputs.to_vec(), h, settings.kernel)?;
            let density: Vec<f64> = grid.iter().map(|&y| kde.evaluate(y)).collect();
            let up = sup_interval_mismatch(Direction::Upper, &grid, kappa, beta_hat, &kde)?;
            let lo = sup_interval_mismatch(Direction::Lower, &grid, kappa, beta_hat, &kde)?;
            let upper = density
                .iter()
                .zip(&up)
                .map(|(f, s)| f + (correction + s) / kappa)
                .collect();
            let lower = density
                .iter()
                .zip(&lo)
                .map(|(f, s)| (f - (correction + s) / kappa).max(0.0))
                .collect();
            Ok(BandComponent {
                bandwidth: h,
                density,
                lower,
                upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lower = vec![0.0f64; grid.len()];
    let mut upper = vec![f64::INFINITY; grid.len()];
    for comp in &components {
        for k in 0..grid.len() {
            lower[k] = lower[k].max(comp.lower[k]);
            upper[k] = upper[k].min(comp.upper[k]);
        }
    }
    Ok(DensityBand {
        grid,
        lower,
        upper,
        settings: BandSettings {
            bandwidths,
            ..settings.clone()
        },
        beta_hat,
        n,
        big_n: outputs.len(),
        eps_gamma,
        correction,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_max_matches_scan() {
        let v: Vec<f64> = (0..37).map(|i| ((i * 7919) % 31) as f64).collect();
        let t = SparseMax::new(v.clone());
        for lo in 0..37 {
            for hi in lo..=37 {
                let want = v[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(t.query(lo, hi), want);
            }
        }
    }

    #[test]
    fn single_point_full_mass() {
        let kde = KdeModel::new(vec![0.5], 0.01, Kernel::Naive).unwrap();
        // J = [v − κ, v + κ] captures the point and the whole kernel mass,
        // so μ̂(J^β) − ∫_J f̂ = 0, and no interval does better than 1 − 0.
        let s = sup_interval_mismatch(Direction::Upper, &[0.5], 0.1, 0.0, &kde).unwrap();
        assert!(s[0] >= -1e-12 && s[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn lower_is_nonnegative_and_components_bracket() {
        let outputs: Vec<f64> = (0..500).map(|i| (i as f64 / 500.0).powi(2)).collect();
        let s = BandSettings {
            kappa: 0.1,
            delta: 0.1,
            bandwidths: vec![0.02, 0.05],
            kernel: Kernel::Naive,
            grid: Grid::new(0.0, 1.0, 50).unwrap(),
        };
        let b = density_band_with_beta(&outputs, 200, 0.01, &s).unwrap();
        assert!(b.lower.iter().all(|v| *v >= 0.0));
        for c in &b.components {
            for k in 0..b.grid.len() {
                assert!(b.upper[k] <= c.upper[k] && b.lower[k] >= c.lower[k]);
            }
        }
    }
}

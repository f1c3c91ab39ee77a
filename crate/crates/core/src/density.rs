//! Kernel density estimation and Monte-Carlo quantiles on surrogate outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::InputSample;
use crate::error::{Result, UqError};
use crate::surrogate::Surrogate;

/// Kernel K with ∫K = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// K(u) = ½·1[−1,1](u).
    #[default]
    Naive,
    /// Standard normal density.
    Gauss,
    /// K(u) = ¾(1 − u²) on [−1, 1].
    Epanechnikov,
}

impl FromStr for Kernel {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Kernel::Naive),
            "gauss" | "gaussian" => Ok(Kernel::Gauss),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(UqError::Domain(format!("unknown kernel {other:?}"))),
        }
    }
}

/// Gaussian contributions beyond this many bandwidths are below 1e-16.
const GAUSS_REACH: f64 = 8.5;

impl Kernel {
    pub fn density(self, u: f64) -> f64 {
        match self {
            Kernel::Naive => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Gauss => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// ∫_{−∞}^{u} K.
    pub fn cdf(self, u: f64) -> f64 {
        match self {
            Kernel::Naive => ((u + 1.0) / 2.0).clamp(0.0, 1.0),
            Kernel::Gauss => 0.5 * erfc(-u / std::f64::consts::SQRT_2),
            Kernel::Epanechnikov => {
                let u = u.clamp(-1.0, 1.0);
                0.5 + 0.75 * (u - u * u * u / 3.0)
            }
        }
    }

    fn reach(self) -> f64 {
        match self {
            Kernel::Gauss => GAUSS_REACH,
            _ => 1.0,
        }
    }
}

/// ĝ(y) = (1/(N·h))·Σ K((y − vᵢ)/h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    /// Sample values in ascending order.
    values: Vec<f64>,
    bandwidth: f64,
    kernel: Kernel,
    #[serde(skip)]
    center: f64,
    /// prefix[i] = Σ_{k<i} (values[k] − center)
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl KdeModel {
    pub fn new(mut values: Vec<f64>, bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if values.is_empty() {
            return Err(UqError::InsufficientData {
                what: "values for a density estimate",
                needed: 1,
                got: 0,
            });
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(UqError::Domain(format!("bandwidth {bandwidth} must be positive")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(UqError::InvalidData("non-finite sample value".into()));
        }
        values.sort_by(f64::total_cmp);
        let center = values[values.len() / 2];
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &values {
            acc += v - center;
            prefix.push(acc);
        }
        Ok(Self {
            values,
            bandwidth,
            kernel,
            center,
            prefix,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices [lo, hi) of values v with t − r ≤ v ≤ t + r.
    fn window(&self, t: f64, r: f64) -> (usize, usize) {
        let lo = self.values.partition_point(|&v| v < t - r);
        let hi = self.values.partition_point(|&v| v <= t + r);
        (lo, hi.max(lo))
    }

    pub fn evaluate(&self, y: f64) -> f64 {
        let n = self.values.len() as f64;
        let h = self.bandwidth;
        match self.kernel {
            Kernel::Naive => {
                let (lo, hi) = self.window(y, h);
                (hi - lo) as f64 * 0.5 / (n * h)
            }
            k => {
                let (lo, hi) = self.window(y, k.reach() * h);
                let s: f64 = self.values[lo..hi]
                    .iter()
                    .map(|v| k.density((y - v) / h))
                    .sum();
                s / (n * h)
            }
        }
    }

    /// ∫_{−∞}^{t} ĝ.
    pub fn cdf(&self, t: f64) -> f64 {
        let n = self.values.len();
        let h = self.bandwidth;
        let (lo, hi) = self.window(t, self.kernel.reach() * h);
        let inner = match self.kernel {
            Kernel::Naive => {
                let cnt = (hi - lo) as f64;
                let sum = self.prefix[hi] - self.prefix[lo];
                ((cnt * (t - self.center + h) - sum) / (2.0 * h)).clamp(0.0, cnt)
            }
            k => self.values[lo..hi]
                .iter()
                .map(|v| k.cdf((t - v) / h))
                .sum::<f64>(),
        };
        (lo as f64 + inner) / n as f64
    }

    /// ∫_a^b ĝ.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// Total mass as the sum of per-sample kernel areas over the full support.
    pub fn total_mass(&self) -> f64 {
        let lo = self.values[0] - self.kernel.reach() * self.bandwidth - 1.0;
        let hi = self.values[self.values.len() - 1] + self.kernel.reach() * self.bandwidth + 1.0;
        self.integral(lo, hi)
    }
}

/// Normal-reference bandwidth h = 1.06·σ̂·N^{−1/5}.
///
/// σ̂ is min(sample std, IQR/1.349) with the type-7 interpolated quartiles;
/// when the IQR is zero the standard deviation alone is used.
pub fn select_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(UqError::InsufficientData {
            what: "values for bandwidth selection",
            needed: 2,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(UqError::ZeroSpread(n));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Plug-in quantile q̂ = inf{y : Ĝ(y) ≥ α}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub value: f64,
    pub sample_size: usize,
}

/// 1-based rank ⌈N·α⌉ of the plug-in quantile, clamped to [1, N].
///
/// Products within 1e-9 (relative) of an integer are treated as that integer,
/// so decimal levels such as 0.95·20 are not pushed up by binary rounding.
pub fn order_rank(n: usize, alpha: f64) -> usize {
    let x = n as f64 * alpha;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k.max(1.0) as usize).min(n)
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(UqError::Domain(format!("level {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// The ⌈N·α⌉-th smallest value.
pub fn mc_quantile(values: &[f64], alpha: f64) -> Result<QuantileEstimate> {
    check_level(alpha)?;
    if values.is_empty() {
        return Err(UqError::InsufficientData {
            what: "values for a quantile",
            needed: 1,
            got: 0,
        });
    }
    let k = order_rank(values.len(), alpha);
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(QuantileEstimate {
        alpha,
        value: *v,
        sample_size: values.len(),
    })
}

/// Plug-in quantile of an already ascending slice.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if sorted.is_empty() {
        return Err(UqError::InsufficientData {
            what: "values for a quantile",
            needed: 1,
            got: 0,
        });
    }
    Ok(sorted[order_rank(sorted.len(), alpha) - 1])
}

/// Bandwidth given explicitly or chosen from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| UqError::Domain(format!("bandwidth {s:?} is neither 'auto' nor a number")))
    }
}

/// Evaluate the surrogate on every input and smooth the outputs.
pub fn surrogate_density<S: Surrogate + ?Sized>(
    surrogate: &S,
    inputs: &InputSample,
    kernel: Kernel,
    bandwidth: Bandwidth,
) -> Result<KdeModel> {
    if surrogate.dim() != inputs.dim() {
        return Err(UqError::DimensionMismatch {
            expected: surrogate.dim(),
            got: inputs.dim(),
        });
    }
    let outputs = surrogate.evaluate_sample(inputs);
    let h = match bandwidth {
        Bandwidth::Auto => select_bandwidth(&outputs)?,
        Bandwidth::Fixed(h) => h,
    };
    KdeModel::new(outputs, h, kernel)
}

/// Equidistant evaluation grid `lo:hi:steps` (`steps` points, both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo < hi) || steps < 2 {
            return Err(UqError::Domain(format!(
                "grid {lo}:{hi}:{steps} needs lo < hi and at least 2 points"
            )));
        }
        Ok(Self { lo, hi, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + i as f64 * step })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || UqError::Domain(format!("grid {s:?} is not lo:hi:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].parse().map_err(|_| bad())?;
        let hi = parts[1].parse().map_err(|_| bad())?;
        let steps = parts[2].parse().map_err(|_| bad())?;
        Grid::new(lo, hi, steps)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

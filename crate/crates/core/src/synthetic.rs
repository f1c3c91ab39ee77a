//! Synthetic technical systems with a known true response, an imperfect
//! computer model m = g* + bias, and closed-form or Monte-Carlo oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{DatasetKind, InputSample, PairedDataset};
use crate::density::mc_quantile;
use crate::error::{Result, UqError};
use crate::randgen::{estimate_mvn, latin_hypercube, sample_mvn, MvnParams};
use crate::rng;

/// Input mean of the one-dimensional system.
pub const MAFDS_MEAN: f64 = 0.05;
/// Input standard deviation of the one-dimensional system.
pub const MAFDS_SD: f64 = 0.0057;
/// Scale a in g*(x) = a·√x; an arbitrary choice that puts outputs near 0.08.
pub const MAFDS_SCALE: f64 = 0.37;

/// Column names of the five-dimensional measurement table.
pub const TABLE1_COLUMNS: [&str; 6] = ["k_rot_y", "k_rot_z", "k_lat_y", "k_lat_z", "h_x", "y"];

/// Ten measured input vectors (k_rot,y, k_rot,z, k_lat,y, k_lat,z, h_x).
pub const TABLE1_INPUTS: [[f64; 5]; 10] = [
    [131.0, 131.0, 3.27e7, 3.07e7, 6.79e-4],
    [134.0, 128.0, 3.28e7, 3.22e7, 6.77e-4],
    [131.0, 143.0, 3.35e7, 3.29e7, 6.82e-4],
    [123.0, 125.0, 3.29e7, 3.25e7, 6.80e-4],
    [114.0, 130.0, 3.22e7, 3.30e7, 6.79e-4],
    [129.0, 134.0, 3.26e7, 3.18e7, 6.76e-4],
    [135.0, 122.0, 3.19e7, 3.16e7, 6.81e-4],
    [128.0, 116.0, 3.54e7, 3.51e7, 6.74e-4],
    [104.0, 118.0, 3.21e7, 3.37e7, 6.68e-4],
    [120.0, 111.0, 3.42e7, 3.44e7, 6.84e-4],
];

/// Measured outputs y of the ten systems.
pub const TABLE1_OUTPUTS: [f64; 10] = [14.5, 14.2, 14.4, 14.2, 14.3, 13.5, 14.7, 13.2, 13.1, 16.3];

/// The measurement table as an experimental dataset.
pub fn table1_dataset() -> PairedDataset {
    let rows: Vec<Vec<f64>> = TABLE1_INPUTS.iter().map(|r| r.to_vec()).collect();
    PairedDataset::new(
        InputSample::from_rows(&rows).expect("rectangular"),
        TABLE1_OUTPUTS.to_vec(),
        DatasetKind::Experimental,
    )
    .expect("consistent")
}

/// Law of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InputLaw {
    Normal(MvnParams),
    /// Independent uniforms on a box.
    Uniform { ranges: Vec<(f64, f64)> },
}

impl InputLaw {
    pub fn dim(&self) -> usize {
        match self {
            InputLaw::Normal(p) => p.dim(),
            InputLaw::Uniform { ranges } => ranges.len(),
        }
    }

    /// Independent draws; uniform draws are plain Monte Carlo, not a design.
    pub fn sample(&self, count: usize, seed: u64) -> Result<InputSample> {
        match self {
            InputLaw::Normal(p) => sample_mvn(p, count, seed),
            InputLaw::Uniform { ranges } => {
                if count == 0 {
                    return Err(UqError::InsufficientData {
                        what: "draws",
                        needed: 1,
                        got: 0,
                    });
                }
                let mut r = rng::master(seed);
                let data = (0..count * ranges.len())
                    .map(|k| {
                        let (lo, hi) = ranges[k % ranges.len()];
                        lo + (hi - lo) * r.random::<f64>()
                    })
                    .collect();
                InputSample::new(ranges.len(), data)
            }
        }
    }

    /// A Latin hypercube over the box, or over mean ± 3 sd for normal laws.
    pub fn design(&self, count: usize, seed: u64) -> Result<InputSample> {
        let ranges = match self {
            InputLaw::Uniform { ranges } => ranges.clone(),
            InputLaw::Normal(p) => (0..p.dim())
                .map(|j| {
                    let sd = p.covariance[(j, j)].sqrt();
                    (p.mean[j] - 3.0 * sd, p.mean[j] + 3.0 * sd)
                })
                .collect(),
        };
        latin_hypercube(&ranges, count, seed)
    }
}

/// Model bias as a function of a scalar index u(x) of the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bias {
    /// c.
    Constant { value: f64 },
    /// c + s·u.
    Linear { intercept: f64, slope: f64 },
    /// c + A·sin(ω·u).
    Smooth { offset: f64, amplitude: f64, frequency: f64 },
}

impl Bias {
    pub fn at(&self, u: f64) -> f64 {
        match *self {
            Bias::Constant { value } => value,
            Bias::Linear { intercept, slope } => intercept + slope * u,
            Bias::Smooth {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * u).sin(),
        }
    }
}

/// Named bias shapes with default magnitudes for the one-dimensional system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasKind {
    None,
    Constant,
    Linear,
    Smooth,
}

impl std::str::FromStr for BiasKind {
    type Err = UqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(BiasKind::None),
            "constant" => Ok(BiasKind::Constant),
            "linear" => Ok(BiasKind::Linear),
            "smooth" => Ok(BiasKind::Smooth),
            _ => Err(UqError::Domain(format!(
                "unknown bias kind '{s}' (none, constant, linear, smooth)"
            ))),
        }
    }
}

impl BiasKind {
    /// Bias with magnitude proportional to `scale`.
    pub fn with_scale(self, scale: f64) -> Bias {
        match self {
            BiasKind::None => Bias::Constant { value: 0.0 },
            BiasKind::Constant => Bias::Constant { value: scale },
            BiasKind::Linear => Bias::Linear {
                intercept: 0.5 * scale,
                slope: 0.75 * scale,
            },
            BiasKind::Smooth => Bias::Smooth {
                offset: 0.25 * scale,
                amplitude: scale,
                frequency: 1.0,
            },
        }
    }
}

/// The true response g*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "response", rename_all = "kebab-case")]
pub enum Response {
    /// a·√max(x₁, 0).
    ScaledSqrt { scale: f64 },
    /// c₀ + Σ cⱼzⱼ + c₁₂·z₁z₂ + c₅₅·z₅², z the standardised inputs.
    Quadratic {
        intercept: f64,
        linear: Vec<f64>,
        cross12: f64,
        square_last: f64,
    },
}

/// A technical system with known truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSystem {
    pub name: String,
    pub law: InputLaw,
    pub response: Response,
    pub bias: Bias,
    /// Standard deviation of the additive observation noise.
    pub sigma_obs: f64,
    /// Per-input centre and scale defining zⱼ = (xⱼ − centreⱼ)/scaleⱼ.
    pub centre: Vec<f64>,
    pub scale: Vec<f64>,
}

/// One-dimensional system: X ~ N(0.05, 0.0057²), g*(x) = 0.37·√x.
///
/// The bias index is u = (x − 0.05)/0.0057; `BiasKind` magnitudes are
/// scaled to 0.002, roughly half the spread of g*(X).
pub fn make_mafds_like(kind: BiasKind, sigma_obs: f64) -> Result<SyntheticSystem> {
    make_mafds_with_bias(kind.with_scale(0.002), sigma_obs)
}

/// As [`make_mafds_like`] with an explicit bias.
pub fn make_mafds_with_bias(bias: Bias, sigma_obs: f64) -> Result<SyntheticSystem> {
    check_noise(sigma_obs)?;
    let law = MvnParams::new(
        DVector::from_element(1, MAFDS_MEAN),
        DMatrix::from_element(1, 1, MAFDS_SD * MAFDS_SD),
    )?;
    Ok(SyntheticSystem {
        name: "mafds-like".into(),
        law: InputLaw::Normal(law),
        response: Response::ScaledSqrt { scale: MAFDS_SCALE },
        bias,
        sigma_obs,
        centre: vec![MAFDS_MEAN],
        scale: vec![MAFDS_SD],
    })
}

/// Five-dimensional system with the input law estimated from the
/// measurement table.
///
/// g*(x) = 14.24 + 0.4z₁ − 0.3z₂ + 0.25z₃ + 0.2z₄ − 0.35z₅ + 0.1z₁z₂ + 0.15z₅²
/// on standardised inputs; the bias index is u = (z₁ + … + z₅)/√5.
pub fn make_hidim_like(kind: BiasKind, sigma_obs: f64) -> Result<SyntheticSystem> {
    check_noise(sigma_obs)?;
    let law = estimate_mvn(&table1_dataset().inputs)?;
    let centre: Vec<f64> = law.mean.iter().copied().collect();
    let scale: Vec<f64> = (0..5).map(|j| law.covariance[(j, j)].sqrt()).collect();
    Ok(SyntheticSystem {
        name: "hidim-like".into(),
        law: InputLaw::Normal(law),
        response: Response::Quadratic {
            intercept: 14.24,
            linear: vec![0.4, -0.3, 0.25, 0.2, -0.35],
            cross12: 0.1,
            square_last: 0.15,
        },
        bias: kind.with_scale(0.3),
        sigma_obs,
        centre,
        scale,
    })
}

fn check_noise(sigma_obs: f64) -> Result<()> {
    if !(sigma_obs >= 0.0) || !sigma_obs.is_finite() {
        return Err(UqError::Domain(format!("σ_obs = {sigma_obs} must be finite and ≥ 0")));
    }
    Ok(())
}

fn draw_label(label: &str) -> u64 {
    label.bytes().fold(0u64, |h, b| h.rotate_left(8) ^ b as u64)
}

impl SyntheticSystem {
    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    fn standardise<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        x.iter()
            .zip(self.centre.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
    }

    /// Scalar index driving the bias.
    pub fn bias_index(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        self.standardise(x).sum::<f64>() / d.sqrt()
    }

    pub fn truth(&self, x: &[f64]) -> f64 {
        match &self.response {
            Response::ScaledSqrt { scale } => scale * x[0].max(0.0).sqrt(),
            Response::Quadratic {
                intercept,
                linear,
                cross12,
                square_last,
            } => {
                let z: Vec<f64> = self.standardise(x).collect();
                let last = z[z.len() - 1];
                intercept
                    + linear.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>()
                    + cross12 * z[0] * z[1]
                    + square_last * last * last
            }
        }
    }

    /// bias(x) = m(x) − g*(x).
    pub fn bias_at(&self, x: &[f64]) -> f64 {
        self.bias.at(self.bias_index(x))
    }

    /// The computer model m = g* + bias.
    pub fn model(&self, x: &[f64]) -> f64 {
        self.truth(x) + self.bias_at(x)
    }

    /// Inputs from the law; identical for equal seeds.
    pub fn draw_inputs(&self, count: usize, seed: u64) -> Result<InputSample> {
        self.law.sample(count, seed)
    }

    /// n experiments: Yᵢ = g*(Xᵢ) + σ_obs·Zᵢ.
    pub fn draw_experiment(&self, n: usize, seed: u64) -> Result<PairedDataset> {
        if n == 0 {
            return Err(UqError::InsufficientData {
                what: "experiments",
                needed: 1,
                got: 0,
            });
        }
        let inputs = self.draw_inputs(n, rng::derive_seed(seed, draw_label("experiment")))?;
        let mut noise = rng::master(rng::derive_seed(seed, draw_label("noise")));
        let outputs = inputs
            .rows()
            .map(|x| {
                let z: f64 = noise.sample(StandardNormal);
                self.truth(x) + self.sigma_obs * z
            })
            .collect();
        PairedDataset::new(inputs, outputs, DatasetKind::Experimental)
    }

    /// L computer-model runs at inputs drawn from the law.
    pub fn draw_simulation(&self, count: usize, seed: u64) -> Result<PairedDataset> {
        let inputs = self.draw_inputs(count, rng::derive_seed(seed, draw_label("simulation")))?;
        let outputs = inputs.rows().map(|x| self.model(x)).collect();
        PairedDataset::new(inputs, outputs, DatasetKind::Simulated)
    }

    /// Mean square difference of `f` and g* under the input law, by Monte Carlo.
    pub fn l2_error<F: Fn(&[f64]) -> f64>(&self, f: F, count: usize, seed: u64) -> Result<f64> {
        let x = self.draw_inputs(count, seed)?;
        Ok(x.rows().map(|r| (f(r) - self.truth(r)).powi(2)).sum::<f64>() / count as f64)
    }

    fn mafds_law(&self) -> Option<(f64, f64, f64)> {
        match (&self.response, &self.law) {
            (Response::ScaledSqrt { scale }, InputLaw::Normal(p)) if self.sigma_obs == 0.0 => {
                Some((*scale, p.mean[0], p.covariance[(0, 0)].sqrt()))
            }
            _ => None,
        }
    }

    /// Closed-form CDF of Y, available for the noise-free square-root system.
    ///
    /// P{X ≤ 0} (below 1e-17 here) is placed at y = 0.
    pub fn true_cdf(&self, y: f64) -> Option<f64> {
        let (a, mu, sd) = self.mafds_law()?;
        if y < 0.0 {
            return Some(0.0);
        }
        let x = (y / a).powi(2);
        Some(Normal::new(mu, sd).ok()?.cdf(x))
    }

    /// Closed-form density of Y for y > 0 (same availability as the CDF).
    pub fn true_density(&self, y: f64) -> Option<f64> {
        let (a, mu, sd) = self.mafds_law()?;
        if y <= 0.0 {
            return Some(0.0);
        }
        let x = (y / a).powi(2);
        let z = (x - mu) / sd;
        Some((-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()) * 2.0 * y / (a * a))
    }

    /// Closed-form α-quantile of Y = a·√X.
    pub fn true_quantile(&self, alpha: f64) -> Option<f64> {
        let (a, mu, sd) = self.mafds_law()?;
        let x = Normal::new(mu, sd).ok()?.inverse_cdf(alpha);
        Some(a * x.max(0.0).sqrt())
    }

    /// α-quantile of |bias(X)| in closed form when the index is standard
    /// normal and the bias is constant or linear.
    pub fn bias_abs_quantile(&self, alpha: f64) -> Option<f64> {
        let unit_index = matches!(self.response, Response::ScaledSqrt { .. })
            && matches!(&self.law, InputLaw::Normal(p)
                if (p.mean[0] - self.centre[0]).abs() < 1e-15
                && (p.covariance[(0, 0)].sqrt() - self.scale[0]).abs() < 1e-15);
        if !unit_index {
            return None;
        }
        match self.bias {
            Bias::Constant { value } => Some(value.abs()),
            Bias::Linear { intercept, slope } => Some(folded_normal_quantile(intercept, slope.abs(), alpha)),
            Bias::Smooth { .. } => None,
        }
    }

    /// Monte-Carlo α-quantile of Y from `count` draws.
    pub fn monte_carlo_quantile(&self, alpha: f64, count: usize, seed: u64) -> Result<f64> {
        let exp = self.draw_experiment(count, seed)?;
        Ok(mc_quantile(&exp.outputs, alpha)?.value)
    }
}

/// α-quantile of |c + s·Z| with Z standard normal.
pub fn folded_normal_quantile(c: f64, s: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        return c.abs();
    }
    let n = Normal::new(0.0, 1.0).expect("valid");
    let mass = |q: f64| n.cdf((q - c) / s) - n.cdf((-q - c) / s);
    let mut lo = 0.0;
    let mut hi = c.abs() + 40.0 * s;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

//! Penalised least-squares surrogates of a computer model and their
//! residual-corrected ("improved") form.

mod basis;
mod cv;
mod fit;

pub use basis::{Basis, FamilyKind};
pub use cv::{default_weight_grid, fold_assignment, select_weight_and_penalty, Selection};
pub use fit::{
    compute_residuals, default_penalty_grid, fit_improved_surrogate, fit_penalized_ls,
    fit_penalized_ls_gcv, fit_residual_model, fit_residual_model_weighted, gcv_score,
    normal_equations, ImprovedSettings, NormalEquations,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{InputSample, PairedDataset};
use crate::error::{Result, UqError};

/// A scalar response over ℝᵈ that can be evaluated in bulk.
pub trait Surrogate: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    /// Evaluate every row; the result is in row order regardless of threading.
    fn evaluate_sample(&self, sample: &InputSample) -> Vec<f64> {
        let d = sample.dim();
        let mut out = vec![0.0; sample.len()];
        out.par_chunks_mut(4096)
            .zip(sample.as_slice().par_chunks(4096 * d))
            .for_each(|(o, rows)| {
                for (v, x) in o.iter_mut().zip(rows.chunks_exact(d)) {
                    *v = self.evaluate(x);
                }
            });
        out
    }
}

/// A function class together with its penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFamily {
    #[serde(flatten)]
    pub kind: FamilyKind,
    pub penalty: f64,
}

impl FunctionFamily {
    pub fn new(kind: FamilyKind, penalty: f64) -> Result<Self> {
        if !(penalty >= 0.0) || !penalty.is_finite() {
            return Err(UqError::Domain(format!("penalty {penalty} must be finite and ≥ 0")));
        }
        Ok(Self { kind, penalty })
    }

    pub fn spline1d(knots: usize, penalty: f64) -> Result<Self> {
        Self::new(FamilyKind::Spline1d { knots }, penalty)
    }

    pub fn poly(degree: usize, penalty: f64) -> Result<Self> {
        Self::new(FamilyKind::PolyRidge { degree }, penalty)
    }

    pub fn rbf(centers: usize, penalty: f64) -> Result<Self> {
        Self::new(
            FamilyKind::RbfRidge {
                centers,
                length_scale: None,
            },
            penalty,
        )
    }

    pub fn with_penalty(&self, penalty: f64) -> Result<Self> {
        Self::new(self.kind.clone(), penalty)
    }
}

/// A fitted member of a function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub family: FunctionFamily,
    pub basis: Basis,
    pub coefficients: Vec<f64>,
    pub training_size: usize,
    #[serde(default)]
    pub cv_score: Option<f64>,
}

impl SurrogateModel {
    /// The same basis with different coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.basis.size() {
            return Err(UqError::DimensionMismatch {
                expected: self.basis.size(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            coefficients,
            ..self.clone()
        })
    }

    /// (1/n)·Σ|f(Xᵢ) − yᵢ|² + λ·cᵀPc for this model's coefficients.
    pub fn objective(&self, data: &PairedDataset) -> f64 {
        let n = data.len() as f64;
        let fit: f64 = data
            .inputs
            .rows()
            .zip(&data.outputs)
            .map(|(x, y)| (self.evaluate(x) - y).powi(2))
            .sum::<f64>()
            / n;
        let p = self.basis.penalty_matrix();
        let c = nalgebra::DVector::from_column_slice(&self.coefficients);
        fit + self.family.penalty * (c.transpose() * p * &c)[(0, 0)]
    }
}

impl Surrogate for SurrogateModel {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; 64];
        let p = self.basis.size();
        if p <= buf.len() {
            self.basis.eval_into(x, &mut buf[..p]);
            buf[..p].iter().zip(&self.coefficients).map(|(a, c)| a * c).sum()
        } else {
            let phi = self.basis.eval(x);
            phi.iter().zip(&self.coefficients).map(|(a, c)| a * c).sum()
        }
    }
}

/// Base surrogate plus fitted residual model: m̂ₙ(x) = m̂_L(x) + m̂ₙᵋ(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovedSurrogate {
    pub base: SurrogateModel,
    pub residual_model: SurrogateModel,
    /// Weight w ∈ [0, 1] of the experimental term in the residual fit.
    pub weight: f64,
}

impl Surrogate for ImprovedSurrogate {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.base.evaluate(x) + self.residual_model.evaluate(x)
    }
}

pub fn improved_surrogate(
    base: SurrogateModel,
    residual_model: SurrogateModel,
    weight: f64,
) -> Result<ImprovedSurrogate> {
    if base.dim() != residual_model.dim() {
        return Err(UqError::DimensionMismatch {
            expected: base.dim(),
            got: residual_model.dim(),
        });
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(UqError::Domain(format!("weight {weight} outside [0, 1]")));
    }
    Ok(ImprovedSurrogate {
        base,
        residual_model,
        weight,
    })
}

/// Model serialised by the CLI: either a plain or an improved surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelFile {
    Plain(SurrogateModel),
    Improved(ImprovedSurrogate),
}

impl ModelFile {
    /// The plain surrogate m̂_L (the base of an improved model).
    pub fn base(&self) -> &SurrogateModel {
        match self {
            ModelFile::Plain(m) => m,
            ModelFile::Improved(m) => &m.base,
        }
    }
}

impl Surrogate for ModelFile {
    fn dim(&self) -> usize {
        match self {
            ModelFile::Plain(m) => m.dim(),
            ModelFile::Improved(m) => m.dim(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            ModelFile::Plain(m) => m.evaluate(x),
            ModelFile::Improved(m) => m.evaluate(x),
        }
    }
}

/// A closure viewed as a surrogate, e.g. a known computer model.
pub struct FnSurrogate<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnSurrogate<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Surrogate for FnSurrogate<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

//! Linear basis expansions behind the surrogate function families.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::InputSample;
use crate::error::{Result, UqError};

/// Structure of a function family; the penalty weight lives on
/// [`FunctionFamily`](super::FunctionFamily).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Natural cubic regression spline on equally spaced knots (d = 1),
    /// penalised by ∫ f''².
    Spline1d { knots: usize },
    /// Gaussian radial basis functions on a subsample of the training inputs,
    /// plus an unpenalised affine part; ridge penalty on the RBF weights.
    RbfRidge {
        centers: usize,
        #[serde(default)]
        length_scale: Option<f64>,
    },
    /// Monomials of total degree ≤ `degree`; ridge penalty on all but the
    /// constant term.
    PolyRidge { degree: usize },
}

/// A basis fixed to concrete knots, centres or exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "kebab-case")]
pub enum Basis {
    NaturalSpline {
        lo: f64,
        hi: f64,
        /// Knot positions on the unit interval, ascending, first 0 and last 1.
        knots: Vec<f64>,
    },
    Rbf {
        shift: Vec<f64>,
        scale: Vec<f64>,
        /// Centres in standardised coordinates.
        centers: Vec<Vec<f64>>,
        length_scale: f64,
    },
    Poly { dim: usize, exponents: Vec<Vec<u32>> },
}

fn cube_pos(t: f64) -> f64 {
    if t > 0.0 {
        t * t * t
    } else {
        0.0
    }
}

fn pos(t: f64) -> f64 {
    t.max(0.0)
}

fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0u32; dim];
        fill_exponents(&mut out, &mut current, 0, total as u32);
    }
    out
}

fn fill_exponents(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, j: usize, left: u32) {
    if j + 1 == current.len() {
        current[j] = left;
        out.push(current.clone());
        return;
    }
    for e in (0..=left).rev() {
        current[j] = e;
        fill_exponents(out, current, j + 1, left - e);
    }
}

impl Basis {
    /// Fix a basis of the given kind to the training inputs.
    ///
    /// A spline fitted to inputs with zero range collapses to the constant
    /// basis; so does any kind when only one distinct point is available.
    pub fn build(kind: &FamilyKind, inputs: &InputSample) -> Result<Basis> {
        let d = inputs.dim();
        match kind {
            FamilyKind::Spline1d { knots } => {
                if d != 1 {
                    return Err(UqError::DimensionMismatch { expected: 1, got: d });
                }
                if *knots < 2 {
                    return Err(UqError::Domain("a spline needs at least 2 knots".into()));
                }
                let xs = inputs.as_slice();
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(hi > lo) {
                    return Ok(Basis::constant(1));
                }
                let k = *knots;
                let knots = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
                Ok(Basis::NaturalSpline { lo, hi, knots })
            }
            FamilyKind::RbfRidge {
                centers,
                length_scale,
            } => {
                if *centers == 0 {
                    return Err(UqError::Domain("need at least one RBF centre".into()));
                }
                let n = inputs.len();
                let mut shift = vec![0.0; d];
                let mut scale = vec![1.0; d];
                for j in 0..d {
                    let col = inputs.column(j);
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                    shift[j] = mean;
                    if var > 0.0 {
                        scale[j] = var.sqrt();
                    }
                }
                let standardize = |x: &[f64]| -> Vec<f64> {
                    x.iter()
                        .zip(shift.iter().zip(&scale))
                        .map(|(v, (s, c))| (v - s) / c)
                        .collect()
                };
                let mut chosen: Vec<Vec<f64>> = Vec::new();
                let m = (*centers).min(n);
                for k in 0..m {
                    let idx = k * n / m;
                    let c = standardize(inputs.row(idx));
                    if !chosen.contains(&c) {
                        chosen.push(c);
                    }
                }
                let length_scale = match length_scale {
                    Some(l) if *l > 0.0 => *l,
                    Some(l) => {
                        return Err(UqError::Domain(format!("RBF length scale {l} must be positive")))
                    }
                    None => median_pairwise_distance(&chosen).unwrap_or(1.0).max(1e-3),
                };
                Ok(Basis::Rbf {
                    shift,
                    scale,
                    centers: chosen,
                    length_scale,
                })
            }
            FamilyKind::PolyRidge { degree } => Ok(Basis::Poly {
                dim: d,
                exponents: monomial_exponents(d, *degree),
            }),
        }
    }

    /// The constant-only basis in `dim` inputs.
    pub fn constant(dim: usize) -> Basis {
        Basis::Poly {
            dim,
            exponents: vec![vec![0; dim]],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::NaturalSpline { .. } => 1,
            Basis::Rbf { shift, .. } => shift.len(),
            Basis::Poly { dim, .. } => *dim,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Basis::NaturalSpline { knots, .. } => knots.len(),
            Basis::Rbf { shift, centers, .. } => 1 + shift.len() + centers.len(),
            Basis::Poly { exponents, .. } => exponents.len(),
        }
    }

    /// Write the basis functions evaluated at `x` into `out` (length `size()`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Basis::NaturalSpline { lo, hi, knots } => {
                let t = (x[0] - lo) / (hi - lo);
                let k = knots.len();
                let last = knots[k - 1];
                let d = |j: usize| (cube_pos(t - knots[j]) - cube_pos(t - last)) / (last - knots[j]);
                out[0] = 1.0;
                out[1] = t;
                let d_penult = d(k - 2);
                for j in 0..k.saturating_sub(2) {
                    out[j + 2] = d(j) - d_penult;
                }
            }
            Basis::Rbf {
                shift,
                scale,
                centers,
                length_scale,
            } => {
                let dim = shift.len();
                out[0] = 1.0;
                for j in 0..dim {
                    out[1 + j] = (x[j] - shift[j]) / scale[j];
                }
                let inv = 1.0 / (2.0 * length_scale * length_scale);
                for (k, c) in centers.iter().enumerate() {
                    let mut r2 = 0.0;
                    for j in 0..dim {
                        let z = (x[j] - shift[j]) / scale[j] - c[j];
                        r2 += z * z;
                    }
                    out[1 + dim + k] = (-r2 * inv).exp();
                }
            }
            Basis::Poly { exponents, .. } => {
                for (o, e) in out.iter_mut().zip(exponents) {
                    *o = e
                        .iter()
                        .zip(x)
                        .fold(1.0, |acc, (&p, &v)| acc * v.powi(p as i32));
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(x, &mut out);
        out
    }

    /// Penalty Gram matrix P, so that the roughness term is λ·cᵀPc.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        let p = self.size();
        match self {
            Basis::NaturalSpline { knots, .. } => spline_roughness(knots),
            Basis::Rbf { shift, .. } => {
                let mut m = DMatrix::identity(p, p);
                for j in 0..=shift.len() {
                    m[(j, j)] = 0.0;
                }
                m
            }
            Basis::Poly { .. } => {
                let mut m = DMatrix::identity(p, p);
                m[(0, 0)] = 0.0;
                m
            }
        }
    }
}

/// ∫₀¹ Nᵢ''(t)·Nⱼ''(t) dt for the natural-spline basis. The second
/// derivatives are piecewise linear between knots, so Simpson's rule on each
/// knot interval is exact.
fn spline_roughness(knots: &[f64]) -> DMatrix<f64> {
    let k = knots.len();
    let last = knots[k - 1];
    let second = |t: f64| -> Vec<f64> {
        let dd = |j: usize| 6.0 * (pos(t - knots[j]) - pos(t - last)) / (last - knots[j]);
        let pen = dd(k - 2);
        let mut v = vec![0.0; k];
        for j in 0..k.saturating_sub(2) {
            v[j + 2] = dd(j) - pen;
        }
        v
    };
    let mut m = DMatrix::zeros(k, k);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        let pts = [(a, h / 6.0), ((a + b) / 2.0, 4.0 * h / 6.0), (b, h / 6.0)];
        for (t, weight) in pts {
            let v = second(t);
            for i in 0..k {
                for j in 0..k {
                    m[(i, j)] += weight * v[i] * v[j];
                }
            }
        }
    }
    m
}

fn median_pairwise_distance(points: &[Vec<f64>]) -> Option<f64> {
    let mut dists = Vec::new();
    for i in 0..points.len() {
        for j in 0..i {
            let d2: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(f64::total_cmp);
    Some(dists[dists.len() / 2])
}

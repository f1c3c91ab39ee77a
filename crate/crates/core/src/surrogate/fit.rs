use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use super::cv::{default_weight_grid, select_weight_and_penalty};
use super::{improved_surrogate, FunctionFamily, ImprovedSurrogate, Surrogate, SurrogateModel};
use crate::data::{DatasetKind, InputSample, PairedDataset};
use crate::error::{Result, UqError};

/// Log-spaced penalty candidates 10⁻¹⁰ … 10², four per decade.
pub fn default_penalty_grid() -> Vec<f64> {
    (0..=48).map(|k| 10f64.powf(-10.0 + 0.25 * k as f64)).collect()
}

/// One group of least-squares rows sharing a per-row weight.
pub(crate) struct Block<'a> {
    pub inputs: &'a InputSample,
    /// `None` means all targets are zero.
    pub targets: Option<&'a [f64]>,
    pub weight: f64,
}

/// The regularised normal equations (ΣwφφᵀΣ + λP)·c = Σwφy.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl NormalEquations {
    pub fn system(&self, lambda: f64) -> DMatrix<f64> {
        &self.gram + &self.penalty * lambda
    }

    /// ‖A·c − b‖ / ‖b‖ (absolute when b = 0).
    pub fn relative_residual(&self, lambda: f64, coefficients: &[f64]) -> f64 {
        let c = DVector::from_column_slice(coefficients);
        let r = self.system(lambda) * c - &self.rhs;
        let scale = self.rhs.norm();
        if scale > 0.0 {
            r.norm() / scale
        } else {
            r.norm()
        }
    }
}

pub(crate) fn assemble(basis: &Basis, blocks: &[Block<'_>]) -> NormalEquations {
    let p = basis.size();
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    let mut phi = vec![0.0; p];
    for block in blocks {
        if block.weight == 0.0 {
            continue;
        }
        for (i, x) in block.inputs.rows().enumerate() {
            basis.eval_into(x, &mut phi);
            let y = block.targets.map_or(0.0, |t| t[i]);
            for a in 0..p {
                let wa = block.weight * phi[a];
                rhs[a] += wa * y;
                for b in 0..=a {
                    gram[(a, b)] += wa * phi[b];
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    NormalEquations {
        gram,
        penalty: basis.penalty_matrix(),
        rhs,
    }
}

/// Normal equations for fitting `family` to `data` with weights 1/n.
pub fn normal_equations(family: &FunctionFamily, data: &PairedDataset) -> Result<NormalEquations> {
    let basis = Basis::build(&family.kind, &data.inputs)?;
    Ok(assemble(
        &basis,
        &[Block {
            inputs: &data.inputs,
            targets: Some(&data.outputs),
            weight: 1.0 / data.len() as f64,
        }],
    ))
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, penalty: f64) -> Result<DVector<f64>> {
    let mut c = match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => {
            let svd = a.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let tol = 1e-12 * smax.max(f64::MIN_POSITIVE);
            let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
            if rank < a.nrows() && penalty == 0.0 {
                return Err(UqError::RankDeficient(format!(
                    "rank {rank} of {} with zero penalty",
                    a.nrows()
                )));
            }
            svd.solve(b, tol).map_err(|e| UqError::RankDeficient(e.to_string()))?
        }
    };
    // one step of iterative refinement
    let r = b - a * &c;
    if let Some(ch) = a.clone().cholesky() {
        c += ch.solve(&r);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(UqError::RankDeficient("solution is not finite".into()));
    }
    Ok(c)
}

pub(crate) fn fit_blocks(
    family: &FunctionFamily,
    basis: Basis,
    blocks: &[Block<'_>],
    training_size: usize,
) -> Result<SurrogateModel> {
    let eq = assemble(&basis, blocks);
    let c = solve_spd(&eq.system(family.penalty), &eq.rhs, family.penalty)?;
    Ok(SurrogateModel {
        family: family.clone(),
        basis,
        coefficients: c.as_slice().to_vec(),
        training_size,
        cv_score: None,
    })
}

/// Minimise (1/L)·Σ|f(Xᵢ) − yᵢ|² + λ·pen(f) over the family.
pub fn fit_penalized_ls(family: &FunctionFamily, data: &PairedDataset) -> Result<SurrogateModel> {
    let basis = Basis::build(&family.kind, &data.inputs)?;
    fit_blocks(
        family,
        basis,
        &[Block {
            inputs: &data.inputs,
            targets: Some(&data.outputs),
            weight: 1.0 / data.len() as f64,
        }],
        data.len(),
    )
}

/// Generalised cross-validation score (RSS/L) / (1 − tr(S)/L)².
pub fn gcv_score(family: &FunctionFamily, data: &PairedDataset) -> Result<f64> {
    let basis = Basis::build(&family.kind, &data.inputs)?;
    let phi = design_matrix(&basis, &data.inputs);
    let w = 1.0 / data.len() as f64;
    let gram = phi.transpose() * &phi * w;
    let rhs = phi.transpose() * DVector::from_column_slice(&data.outputs) * w;
    gcv_at(&phi, &gram, &rhs, &basis.penalty_matrix(), &data.outputs, family.penalty)
        .ok_or_else(|| UqError::RankDeficient("GCV undefined at this penalty".into()))
}

fn design_matrix(basis: &Basis, inputs: &InputSample) -> DMatrix<f64> {
    let p = basis.size();
    let mut phi = DMatrix::zeros(inputs.len(), p);
    let mut row = vec![0.0; p];
    for (i, x) in inputs.rows().enumerate() {
        basis.eval_into(x, &mut row);
        for j in 0..p {
            phi[(i, j)] = row[j];
        }
    }
    phi
}

fn gcv_at(
    phi: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    penalty: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
) -> Option<f64> {
    let l = y.len() as f64;
    let a = gram + penalty * lambda;
    let ch = a.cholesky()?;
    let c = ch.solve(rhs);
    let fitted = phi * &c;
    let rss: f64 = fitted.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
    let trace = ch.solve(gram).trace();
    let denom = 1.0 - trace / l;
    if denom <= 1e-9 {
        return None;
    }
    Some((rss / l) / (denom * denom))
}

/// Penalised fit with λ chosen by generalised cross-validation over `grid`.
pub fn fit_penalized_ls_gcv(
    family: &FunctionFamily,
    data: &PairedDataset,
    grid: &[f64],
) -> Result<SurrogateModel> {
    let basis = Basis::build(&family.kind, &data.inputs)?;
    let phi = design_matrix(&basis, &data.inputs);
    let w = 1.0 / data.len() as f64;
    let gram = phi.transpose() * &phi * w;
    let rhs = phi.transpose() * DVector::from_column_slice(&data.outputs) * w;
    let pen = basis.penalty_matrix();
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &sorted {
        if !(lambda >= 0.0) {
            return Err(UqError::Domain(format!("penalty {lambda} must be ≥ 0")));
        }
        if let Some(score) = gcv_at(&phi, &gram, &rhs, &pen, &data.outputs, lambda) {
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((lambda, score));
            }
        }
    }
    let (lambda, score) = best.ok_or_else(|| {
        UqError::RankDeficient("no penalty on the grid gives a well-posed GCV fit".into())
    })?;
    let mut model = fit_penalized_ls(&family.with_penalty(lambda)?, data)?;
    model.cv_score = Some(score);
    Ok(model)
}

/// εᵢ = Yᵢ − m̂(Xᵢ).
pub fn compute_residuals<S: Surrogate + ?Sized>(
    model: &S,
    experimental: &PairedDataset,
) -> Result<Vec<f64>> {
    if experimental.kind != DatasetKind::Experimental {
        return Err(UqError::InvalidData(
            "residuals are computed on experimental data".into(),
        ));
    }
    if model.dim() != experimental.dim() {
        return Err(UqError::DimensionMismatch {
            expected: model.dim(),
            got: experimental.dim(),
        });
    }
    Ok(experimental
        .inputs
        .rows()
        .zip(&experimental.outputs)
        .map(|(x, y)| y - model.evaluate(x))
        .collect())
}

fn check_lengths(experimental: &PairedDataset, residuals: &[f64]) -> Result<()> {
    if residuals.len() != experimental.len() {
        return Err(UqError::DimensionMismatch {
            expected: experimental.len(),
            got: residuals.len(),
        });
    }
    Ok(())
}

/// Minimise (1/n)·Σ|f(Xᵢ) − εᵢ|² + λ·pen(f).
///
/// With a single experimental point the residual model is the constant ε₁.
pub fn fit_residual_model(
    family: &FunctionFamily,
    experimental: &PairedDataset,
    residuals: &[f64],
) -> Result<SurrogateModel> {
    check_lengths(experimental, residuals)?;
    if experimental.len() == 1 {
        return Ok(SurrogateModel {
            family: family.clone(),
            basis: Basis::constant(experimental.dim()),
            coefficients: vec![residuals[0]],
            training_size: 1,
            cv_score: None,
        });
    }
    let basis = Basis::build(&family.kind, &experimental.inputs)?;
    fit_blocks(
        family,
        basis,
        &[Block {
            inputs: &experimental.inputs,
            targets: Some(residuals),
            weight: 1.0 / experimental.len() as f64,
        }],
        experimental.len(),
    )
}

/// Minimise (w/n)·Σ|f(Xᵢ) − εᵢ|² + ((1−w)/N₁)·Σ|f(X̃ⱼ)|² + λ·pen(f).
///
/// The basis is fixed from the experimental inputs only, so w = 1 reproduces
/// [`fit_residual_model`].
pub fn fit_residual_model_weighted(
    family: &FunctionFamily,
    experimental: &PairedDataset,
    residuals: &[f64],
    extra_inputs: &InputSample,
    weight: f64,
) -> Result<SurrogateModel> {
    check_lengths(experimental, residuals)?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(UqError::Domain(format!("weight {weight} outside [0, 1]")));
    }
    if extra_inputs.dim() != experimental.dim() {
        return Err(UqError::DimensionMismatch {
            expected: experimental.dim(),
            got: extra_inputs.dim(),
        });
    }
    let basis = Basis::build(&family.kind, &experimental.inputs)?;
    fit_blocks(
        family,
        basis,
        &[
            Block {
                inputs: &experimental.inputs,
                targets: Some(residuals),
                weight: weight / experimental.len() as f64,
            },
            Block {
                inputs: extra_inputs,
                targets: None,
                weight: (1.0 - weight) / extra_inputs.len() as f64,
            },
        ],
        experimental.len(),
    )
}

/// Settings for building an improved surrogate from a fitted base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovedSettings {
    /// Residual family; its penalty is used only when cross-validation is skipped.
    pub residual_family: FunctionFamily,
    /// Use the weighted residual fit with additional inputs.
    pub weighted: bool,
    pub weight_grid: Vec<f64>,
    pub penalty_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl ImprovedSettings {
    pub fn new(residual_family: FunctionFamily, weighted: bool, seed: u64) -> Self {
        Self {
            residual_family,
            weighted,
            weight_grid: if weighted { default_weight_grid() } else { vec![1.0] },
            penalty_grid: default_penalty_grid(),
            folds: 5,
            seed,
        }
    }
}

/// Residuals of `base`, cross-validated choice of (w, λ), and the final
/// residual fit on all experimental points.
pub fn fit_improved_surrogate(
    base: SurrogateModel,
    experimental: &PairedDataset,
    extra_inputs: Option<&InputSample>,
    settings: &ImprovedSettings,
) -> Result<ImprovedSurrogate> {
    let residuals = compute_residuals(&base, experimental)?;
    let extra = if settings.weighted {
        Some(extra_inputs.ok_or_else(|| {
            UqError::InvalidData("weighted residual fit needs additional inputs".into())
        })?)
    } else {
        None
    };
    let weight_grid: Vec<f64> = if extra.is_some() {
        settings.weight_grid.clone()
    } else {
        vec![1.0]
    };
    let folds = settings.folds.min(experimental.len());
    let (weight, family, score) = if folds >= 2 {
        let sel = select_weight_and_penalty(
            &settings.residual_family,
            experimental,
            &residuals,
            extra,
            &weight_grid,
            &settings.penalty_grid,
            folds,
            settings.seed,
        )?;
        (
            sel.weight,
            settings.residual_family.with_penalty(sel.penalty)?,
            Some(sel.cv_score),
        )
    } else {
        (1.0, settings.residual_family.clone(), None)
    };
    let mut residual_model = match extra {
        Some(extra) if weight < 1.0 => {
            fit_residual_model_weighted(&family, experimental, &residuals, extra, weight)?
        }
        _ => fit_residual_model(&family, experimental, &residuals)?,
    };
    residual_model.cv_score = score;
    improved_surrogate(base, residual_model, weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(xs: &[f64], ys: &[f64], kind: DatasetKind) -> PairedDataset {
        PairedDataset::new(InputSample::from_column(xs.to_vec()).unwrap(), ys.to_vec(), kind)
            .unwrap()
    }

    #[test]
    fn exact_line_recovery() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let d = dataset(&xs, &[0.0, 2.0, 4.0, 6.0], DatasetKind::Simulated);
        let m = fit_penalized_ls(&FunctionFamily::poly(1, 0.0).unwrap(), &d).unwrap();
        assert!(m.coefficients[0].abs() < 1e-12);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_system_without_penalty_is_rank_deficient() {
        let d = dataset(&[1.0, 1.0], &[1.0, 2.0], DatasetKind::Simulated);
        let err = fit_penalized_ls(&FunctionFamily::poly(2, 0.0).unwrap(), &d).unwrap_err();
        assert!(matches!(err, UqError::RankDeficient(_)), "{err:?}");
        // a positive penalty makes it well-posed
        assert!(fit_penalized_ls(&FunctionFamily::poly(2, 1e-3).unwrap(), &d).is_ok());
    }

    #[test]
    fn residual_arithmetic() {
        let exp = dataset(&[1.0, 2.0], &[3.0, 3.0], DatasetKind::Experimental);
        let sim = dataset(&[0.0, 1.0], &[0.0, 1.0], DatasetKind::Simulated);
        let identity = fit_penalized_ls(&FunctionFamily::poly(1, 0.0).unwrap(), &sim).unwrap();
        let r = compute_residuals(&identity, &exp).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        assert!(compute_residuals(&identity, &sim).is_err());
    }

    #[test]
    fn single_point_residual_model_is_constant() {
        let exp = dataset(&[0.3], &[1.0], DatasetKind::Experimental);
        let m = fit_residual_model(&FunctionFamily::spline1d(6, 1e-3).unwrap(), &exp, &[0.25])
            .unwrap();
        assert_eq!(m.evaluate(&[10.0]), 0.25);
    }

    #[test]
    fn weight_outside_unit_interval_is_rejected() {
        let exp = dataset(&[0.0, 1.0], &[0.0, 0.0], DatasetKind::Experimental);
        let extra = InputSample::from_column(vec![0.5]).unwrap();
        let f = FunctionFamily::poly(0, 0.0).unwrap();
        assert!(matches!(
            fit_residual_model_weighted(&f, &exp, &[1.0, 1.0], &extra, 1.5),
            Err(UqError::Domain(_))
        ));
    }
}

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use super::fit::{fit_blocks, Block};
use super::{FunctionFamily, Surrogate};
use crate::data::{InputSample, PairedDataset};
use crate::error::{Result, UqError};
use crate::rng;

const FOLD_STREAM: u64 = 0xF01D;

/// {0, 0.1, …, 1}.
pub fn default_weight_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Outcome of the (w, λ) grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub weight: f64,
    pub penalty: f64,
    /// Mean over folds of the held-out mean squared error.
    pub cv_score: f64,
}

/// Fold index for each of `n` points; a seeded permutation dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::master(rng::derive_seed(seed, FOLD_STREAM)));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Choose the residual-fit weight and penalty by k-fold cross-validation.
///
/// Held-out error is measured only on experimental points. Candidates are
/// visited with w ascending, then λ ascending, and only a strictly smaller
/// score replaces the incumbent, so ties go to the smaller w, then λ.
#[allow(clippy::too_many_arguments)]
pub fn select_weight_and_penalty(
    family: &FunctionFamily,
    experimental: &PairedDataset,
    residuals: &[f64],
    extra_inputs: Option<&InputSample>,
    weight_grid: &[f64],
    penalty_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Selection> {
    let n = experimental.len();
    if residuals.len() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: residuals.len(),
        });
    }
    if folds < 2 {
        return Err(UqError::Domain(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(UqError::InsufficientData {
            what: "experimental points for cross-validation",
            needed: folds,
            got: n,
        });
    }
    if weight_grid.is_empty() || penalty_grid.is_empty() {
        return Err(UqError::Domain("empty candidate grid".into()));
    }
    if let Some(w) = weight_grid.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(UqError::Domain(format!("weight {w} outside [0, 1]")));
    }
    if let Some(p) = penalty_grid.iter().find(|p| !(**p >= 0.0)) {
        return Err(UqError::Domain(format!("penalty {p} must be ≥ 0")));
    }
    if extra_inputs.is_none() && weight_grid.iter().any(|&w| w < 1.0) {
        return Err(UqError::InvalidData(
            "weights below 1 need additional inputs".into(),
        ));
    }

    let mut weights = weight_grid.to_vec();
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    let mut penalties = penalty_grid.to_vec();
    penalties.sort_by(f64::total_cmp);
    penalties.dedup();

    let fold_of = fold_assignment(n, folds, seed);
    let splits: Vec<(PairedDataset, Vec<f64>, PairedDataset, Vec<f64>)> = (0..folds)
        .map(|k| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
            (
                experimental.select(&train),
                train.iter().map(|&i| residuals[i]).collect(),
                experimental.select(&test),
                test.iter().map(|&i| residuals[i]).collect(),
            )
        })
        .collect();

    let candidates: Vec<(f64, f64)> = weights
        .iter()
        .flat_map(|&w| penalties.iter().map(move |&p| (w, p)))
        .collect();

    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(w, penalty)| {
            let fam = match family.with_penalty(penalty) {
                Ok(f) => f,
                Err(_) => return f64::INFINITY,
            };
            let mut total = 0.0;
            for (train, train_res, test, test_res) in &splits {
                let basis = match Basis::build(&fam.kind, &train.inputs) {
                    Ok(b) => b,
                    Err(_) => return f64::INFINITY,
                };
                let mut blocks = vec![Block {
                    inputs: &train.inputs,
                    targets: Some(train_res),
                    weight: w / train.len() as f64,
                }];
                if let Some(extra) = extra_inputs {
                    blocks.push(Block {
                        inputs: extra,
                        targets: None,
                        weight: (1.0 - w) / extra.len() as f64,
                    });
                }
                let model = match fit_blocks(&fam, basis, &blocks, train.len()) {
                    Ok(m) => m,
                    Err(_) => return f64::INFINITY,
                };
                let mse: f64 = test
                    .inputs
                    .rows()
                    .zip(test_res)
                    .map(|(x, e)| (model.evaluate(x) - e).powi(2))
                    .sum::<f64>()
                    / test.len() as f64;
                total += mse;
            }
            total / folds as f64
        })
        .collect();

    let mut best: Option<Selection> = None;
    for (&(weight, penalty), &cv_score) in candidates.iter().zip(&scores) {
        if cv_score.is_finite() && best.is_none_or(|b| cv_score < b.cv_score) {
            best = Some(Selection {
                weight,
                penalty,
                cv_score,
            });
        }
    }
    best.ok_or_else(|| UqError::RankDeficient("every (w, λ) candidate failed to fit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(23, 5, 3);
        assert_eq!(a, fold_assignment(23, 5, 3));
        for k in 0..5 {
            let c = a.iter().filter(|&&f| f == k).count();
            assert!(c == 4 || c == 5);
        }
    }

    #[test]
    fn too_few_points_for_folds() {
        let exp = PairedDataset::new(
            InputSample::from_column(vec![0.0, 1.0, 2.0]).unwrap(),
            vec![0.0; 3],
            crate::data::DatasetKind::Experimental,
        )
        .unwrap();
        let f = FunctionFamily::poly(1, 0.0).unwrap();
        let err = select_weight_and_penalty(&f, &exp, &[0.0; 3], None, &[1.0], &[0.0], 5, 0);
        assert!(matches!(err, Err(UqError::InsufficientData { .. })));
    }
}

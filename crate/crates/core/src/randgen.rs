//! Multivariate-normal estimation and sampling, and Latin hypercube designs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InputSample;
use crate::error::{Result, UqError};
use crate::rng;

/// Mean vector and covariance matrix of a multivariate normal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnParams {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Σ = O · diag(λ) · Oᵀ with λ clipped at zero.
#[derive(Debug, Clone)]
pub struct EigenFactors {
    pub orthogonal: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

impl EigenFactors {
    /// O · diag(√λ), the linear map applied to standard-normal vectors.
    pub fn transform(&self) -> DMatrix<f64> {
        let mut t = self.orthogonal.clone();
        for (j, mut col) in t.column_iter_mut().enumerate() {
            col *= self.eigenvalues[j].sqrt();
        }
        t
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.orthogonal * DMatrix::from_diagonal(&self.eigenvalues) * self.orthogonal.transpose()
    }
}

impl MvnParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(UqError::InvalidData("mean vector is empty".into()));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(UqError::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        let params = Self { mean, covariance };
        params.check_symmetric()?;
        Ok(params)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_symmetric(&self) -> Result<()> {
        let scale = self.covariance.amax().max(f64::MIN_POSITIVE);
        let asym = (&self.covariance - self.covariance.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(UqError::InvalidCovariance(format!(
                "not symmetric (max asymmetry {asym:e})"
            )));
        }
        if self.covariance.iter().any(|v| !v.is_finite()) {
            return Err(UqError::InvalidCovariance("non-finite entry".into()));
        }
        Ok(())
    }

    /// Eigendecomposition with negative eigenvalues clipped at zero.
    ///
    /// Diagonal matrices are decomposed exactly with O = I. Eigenvalues below
    /// −1e-10·‖Σ‖₂ are rejected as not positive semidefinite.
    pub fn eigen(&self) -> Result<EigenFactors> {
        let d = self.dim();
        let is_diagonal = (0..d).all(|i| (0..d).all(|j| i == j || self.covariance[(i, j)] == 0.0));
        let (orthogonal, raw) = if is_diagonal {
            (DMatrix::identity(d, d), self.covariance.diagonal())
        } else {
            let sym = (&self.covariance + self.covariance.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            (eig.eigenvectors, eig.eigenvalues)
        };
        let norm = raw.amax();
        if let Some(bad) = raw.iter().find(|&&l| l < -1e-10 * norm) {
            return Err(UqError::InvalidCovariance(format!(
                "eigenvalue {bad:e} below tolerance {:e}",
                -1e-10 * norm
            )));
        }
        Ok(EigenFactors {
            orthogonal,
            eigenvalues: raw.map(|l| l.max(0.0)),
        })
    }
}

/// Maximum-likelihood mean and covariance, with the 1/n normaliser.
pub fn estimate_mvn(sample: &InputSample) -> Result<MvnParams> {
    let n = sample.len();
    if n < 2 {
        return Err(UqError::InsufficientData {
            what: "points for covariance estimation",
            needed: 2,
            got: n,
        });
    }
    let d = sample.dim();
    let mut mean = DVector::zeros(d);
    for row in sample.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for row in sample.rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    MvnParams::new(mean, cov)
}

/// Draw `count` points X = O·Λ^{1/2}·Z + μ.
///
/// Rows are produced in chunks of [`rng::CHUNK`]; chunk k uses stream k of
/// `seed`, so the output does not depend on the thread count.
pub fn sample_mvn(params: &MvnParams, count: usize, seed: u64) -> Result<InputSample> {
    if count == 0 {
        return Err(UqError::Domain("sample count must be positive".into()));
    }
    let factors = params.eigen()?;
    let t = factors.transform();
    let d = params.dim();
    let mut data = vec![0.0; count * d];
    data.par_chunks_mut(rng::CHUNK * d)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = rng::stream(seed, chunk as u64);
            let mut z = vec![0.0; d];
            for row in out.chunks_exact_mut(d) {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for (i, x) in row.iter_mut().enumerate() {
                    let mut acc = params.mean[i];
                    for (k, zk) in z.iter().enumerate() {
                        acc += t[(i, k)] * zk;
                    }
                    *x = acc;
                }
            }
        });
    InputSample::new(d, data)
}

/// Latin hypercube sample: in every dimension each of the `count`
/// equal-width strata of (lo, hi) holds exactly one point.
pub fn latin_hypercube(ranges: &[(f64, f64)], count: usize, seed: u64) -> Result<InputSample> {
    if ranges.is_empty() {
        return Err(UqError::InvalidData("no ranges given".into()));
    }
    if count == 0 {
        return Err(UqError::Domain("sample count must be positive".into()));
    }
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(UqError::Domain(format!(
                "invalid range ({lo}, {hi}) for dimension {}",
                j + 1
            )));
        }
    }
    let d = ranges.len();
    let mut rng = rng::master(seed);
    let mut data = vec![0.0; count * d];
    let mut strata: Vec<usize> = (0..count).collect();
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = (hi - lo) / count as f64;
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            let lo_s = lo + s as f64 * width;
            let hi_s = if s + 1 == count { hi } else { lo + (s + 1) as f64 * width };
            let x = lo_s + u * width;
            // rounding can land on the upper edge, which belongs to the next stratum
            data[i * d + j] = if x < hi_s { x } else { lo_s + 0.5 * (hi_s - lo_s) };
        }
    }
    InputSample::new(d, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_variance_uses_one_over_n() {
        let s = InputSample::from_column(vec![0.0, 2.0]).unwrap();
        let p = estimate_mvn(&s).unwrap();
        assert_eq!(p.mean[0], 1.0);
        assert_eq!(p.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn identical_points_give_zero_covariance() {
        let s = InputSample::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let p = estimate_mvn(&s).unwrap();
        assert!(p.covariance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_is_insufficient() {
        let s = InputSample::from_column(vec![1.0]).unwrap();
        assert!(matches!(estimate_mvn(&s), Err(UqError::InsufficientData { .. })));
    }

    #[test]
    fn identity_transform_returns_raw_normals() {
        let p = MvnParams::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let s = sample_mvn(&p, 5, 11).unwrap();
        let mut rng = rng::stream(11, 0);
        for row in s.rows() {
            for &x in row {
                let z: f64 = rng.sample(StandardNormal);
                assert_eq!(x, z);
            }
        }
    }

    #[test]
    fn degenerate_law_is_constant() {
        let p = MvnParams::new(DVector::from_element(1, 5.0), DMatrix::zeros(1, 1)).unwrap();
        let s = sample_mvn(&p, 100, 1).unwrap();
        assert!(s.as_slice().iter().all(|&x| x == 5.0));
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = MvnParams::new(DVector::zeros(2), cov).unwrap();
        assert!(matches!(sample_mvn(&p, 3, 0), Err(UqError::InvalidCovariance(_))));
    }

    #[test]
    fn eigen_factors_reconstruct() {
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let p = MvnParams::new(DVector::zeros(3), cov.clone()).unwrap();
        let f = p.eigen().unwrap();
        let oto = f.orthogonal.transpose() * &f.orthogonal;
        assert!((oto - DMatrix::identity(3, 3)).amax() < 1e-10);
        assert!((f.reconstruct() - &cov).amax() < 1e-10 * cov.amax());
    }

    #[test]
    fn lhs_single_point_and_bad_range() {
        let s = latin_hypercube(&[(2.0, 3.0)], 1, 4).unwrap();
        let x = s.row(0)[0];
        assert!(x > 2.0 && x < 3.0);
        assert!(latin_hypercube(&[(1.0, 1.0)], 3, 0).is_err());
    }

    #[test]
    fn lhs_four_strata() {
        let s = latin_hypercube(&[(0.0, 1.0)], 4, 9).unwrap();
        let mut hits = [0usize; 4];
        for &x in s.as_slice() {
            hits[(x * 4.0).floor() as usize] += 1;
        }
        assert_eq!(hits, [1, 1, 1, 1]);
    }
}

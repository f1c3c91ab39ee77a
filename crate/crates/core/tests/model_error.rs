use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use uq_core::data::{DatasetKind, InputSample, PairedDataset};
use uq_core::model_error::*;
use uq_core::surrogate::{FnSurrogate, FunctionFamily};

fn discrepancy(xs: Vec<f64>, dim: usize, ys: Vec<f64>, ms: Vec<f64>) -> DiscrepancyData {
    let exp = PairedDataset::new(InputSample::new(dim, xs).unwrap(), ys, DatasetKind::Experimental)
        .unwrap();
    DiscrepancyData::new(exp, ms).unwrap()
}

fn random_case(rng: &mut ChaCha20Rng, n: usize, d: usize) -> (DiscrepancyData, GpDiscrepancyParams) {
    let xs = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
    let ys = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ms = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = GpDiscrepancyParams {
        lambda: rng.random_range(0.05..1.0),
        beta: rng.random_range(-0.5..0.5),
        sigma2: rng.random_range(0.1..2.0),
        omega: (0..d).map(|_| rng.random_range(0.1..4.0)).collect(),
    };
    (discrepancy(xs, d, ys, ms), p)
}

#[test]
fn ecdf_examples() {
    assert_eq!(empirical_cdf(&[1.0, 2.0]).unwrap().eval(1.5), 0.5);
    let f = empirical_cdf(&[1.0, 1.0, 2.0]).unwrap();
    assert!((f.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(f.eval(0.5), 0.0);
    assert_eq!(f.eval(2.0), 1.0);
    assert!(empirical_cdf(&[]).is_err());
}

#[test]
fn avm_examples() {
    assert_eq!(avm(&[0.3, 0.7], &[0.7, 0.3], 100).unwrap().exact, 0.0);
    assert_eq!(avm(&[0.0], &[1.0], 100).unwrap().exact, 1.0);
    assert!((avm(&[0.0, 1.0], &[0.0, 2.0], 100).unwrap().exact - 0.5).abs() < 1e-15);
    assert!(avm(&[], &[1.0], 100).is_err());
    assert!(avm(&[0.0], &[1.0], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn avm_is_symmetric(
        a in prop::collection::vec(-10.0f64..10.0, 1..40),
        b in prop::collection::vec(-10.0f64..10.0, 1..40),
    ) {
        let (fa, fb) = (empirical_cdf(&a).unwrap(), empirical_cdf(&b).unwrap());
        prop_assert_eq!(avm_exact(&fa, &fb), avm_exact(&fb, &fa));
        prop_assert!(avm_exact(&fa, &fb) >= 0.0);
    }

    #[test]
    fn covariance_is_bounded_by_sigma2(
        z1 in prop::collection::vec(-3.0f64..3.0, 3),
        z2 in prop::collection::vec(-3.0f64..3.0, 3),
        omega in prop::collection::vec(0.0f64..5.0, 3),
        sigma2 in 0.01f64..10.0,
    ) {
        let p = GpDiscrepancyParams { lambda: 0.0, beta: 0.0, sigma2, omega };
        let c = gp_covariance(&z1, &z2, &p).unwrap();
        prop_assert!(c >= 0.0 && c <= sigma2);
    }
}

#[test]
fn two_point_likelihood_matches_closed_form() {
    let data = discrepancy(vec![0.0, 1.0], 1, vec![1.0, 0.5], vec![0.2, 0.1]);
    let p = GpDiscrepancyParams {
        lambda: 0.3,
        beta: 0.1,
        sigma2: 1.2,
        omega: vec![0.7],
    };
    let c = 1.2 * (-0.7f64).exp();
    let (a, d) = (1.5, 1.5);
    let det = a * d - c * c;
    let (r1, r2) = (0.8 - 0.1, 0.4 - 0.1);
    let quad = (d * r1 * r1 - 2.0 * c * r1 * r2 + a * r2 * r2) / det;
    let want = -0.5 * (quad + det.ln() + 2.0 * (2.0 * std::f64::consts::PI).ln());
    assert!((gp_loglikelihood(&p, &data).unwrap() - want).abs() < 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for _ in 0..20 {
        let (data, p) = random_case(&mut rng, 6, 2);
        let g = gp_loglikelihood_gradient(&p, &data).unwrap();
        let perturb = |k: usize, h: f64| {
            let mut q = p.clone();
            match k {
                0 => q.lambda += h,
                1 => q.beta += h,
                2 => q.sigma2 += h,
                j => q.omega[j - 3] += h,
            }
            gp_loglikelihood(&q, &data).unwrap()
        };
        for (k, gk) in g.iter().enumerate() {
            let h = 1e-6;
            let fd = (perturb(k, h) - perturb(k, -h)) / (2.0 * h);
            assert!((fd - gk).abs() <= 1e-4 * gk.abs().max(1.0), "k={k}: fd {fd} vs {gk}");
        }
    }
}

#[test]
fn closed_form_beta_cases() {
    let data = discrepancy(vec![0.0, 0.4, 0.9], 1, vec![1.0, 2.0, 4.0], vec![0.0, 0.5, 0.5]);
    let mean = (1.0 + 1.5 + 3.5) / 3.0;
    assert!((beta_closed_form_with(&DMatrix::identity(3, 3), &data.differences()).unwrap() - mean).abs() < 1e-14);
    assert!((gp_beta_empirical(&data) - mean).abs() < 1e-14);

    let shifted = discrepancy(vec![0.0, 0.4, 0.9], 1, vec![0.7, 1.7, 2.7], vec![0.0, 1.0, 2.0]);
    let p = GpDiscrepancyParams {
        lambda: 0.2,
        beta: 0.0,
        sigma2: 1.0,
        omega: vec![2.0],
    };
    assert!((gp_beta_closed_form(&p, &shifted).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn closed_form_beta_matches_golden_section() {
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let (data, p) = random_case(&mut rng, 5, 1);
    let beta = gp_beta_closed_form(&p, &data).unwrap();
    let f = |b: f64| -gp_loglikelihood(&GpDiscrepancyParams { beta: b, ..p.clone() }, &data).unwrap();
    let (mut lo, mut hi) = (-10.0, 10.0);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-10 {
        let (x1, x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    assert!((beta - 0.5 * (lo + hi)).abs() < 1e-6);
}

#[test]
fn posterior_adds_prior_terms_and_flags_support() {
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    let (data, p) = random_case(&mut rng, 4, 1);
    let hyper = GpHyperParams {
        mu_lambda: p.lambda,
        var_lambda: 4.0,
        mu_beta: p.beta,
        var_beta: 9.0,
        c_sigma2: 0.05,
        c_omega: vec![0.05],
        trunc_floor: 1e-3,
    };
    let post = gp_log_posterior(&p, &hyper, &data).unwrap();
    let ll = gp_loglikelihood(&p, &data).unwrap();
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let prior = -0.5 * (4f64.ln() + ln2pi) - 0.5 * (9f64.ln() + ln2pi)
        + (0.05 / p.sigma2).ln()
        + (0.05 / p.omega[0]).ln();
    assert!(post.in_support);
    assert!((post.value - ll - prior).abs() < 1e-12);

    let below = GpDiscrepancyParams { sigma2: 1e-4, ..p.clone() };
    let out = gp_log_posterior(&below, &hyper, &data).unwrap();
    assert!(!out.in_support && out.value == f64::NEG_INFINITY);

    // ∫ c/t over [ε, e^{1/c}ε] = 1
    let (c, eps) = (0.2, 1e-3);
    let upper = hyper.support_upper(c) / hyper.trunc_floor * eps;
    assert!((c * (upper / eps).ln() - 1.0).abs() < 1e-12);
}

fn simulate(n: usize, truth: &GpDiscrepancyParams, seed: u64) -> DiscrepancyData {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let x = InputSample::from_column(xs.clone()).unwrap();
    let theta = theta_matrix(&x, truth.sigma2, truth.lambda, &truth.omega);
    let l = theta.cholesky().unwrap().l();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e = l * z;
    let ms: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let ys = ms.iter().zip(e.iter()).map(|(m, e)| m + truth.beta + e).collect();
    discrepancy(xs, 1, ys, ms)
}

#[test]
fn map_recovers_noise_variance() {
    let truth = GpDiscrepancyParams {
        lambda: 0.04,
        beta: 0.3,
        sigma2: 1.0,
        omega: vec![4.0],
    };
    let options = MapOptions {
        restarts: 20,
        max_evals: 1500,
        joint_hyper: false,
    };
    let hits = (0..20u64)
        .filter(|&rep| {
            let data = simulate(50, &truth, 100 + rep);
            let hyper = GpHyperParams::default_for(&data);
            let fit = gp_fit_map(&data, &hyper, BetaMode::ClosedForm, &options, None, rep).unwrap();
            let ratio = fit.params.lambda / truth.lambda;
            (1.0 / 3.0..=3.0).contains(&ratio)
        })
        .count();
    assert!(hits >= 16, "λ within a factor 3 in {hits}/20");
}

#[test]
fn profiled_and_free_beta_agree() {
    let truth = GpDiscrepancyParams {
        lambda: 0.05,
        beta: -0.2,
        sigma2: 0.5,
        omega: vec![3.0],
    };
    let data = simulate(10, &truth, 7);
    let hyper = GpHyperParams::default_for(&data);
    let options = MapOptions {
        restarts: 20,
        max_evals: 4000,
        joint_hyper: false,
    };
    let closed = gp_fit_map(&data, &hyper, BetaMode::ClosedForm, &options, None, 1).unwrap();
    let free = gp_fit_map(&data, &hyper, BetaMode::Free, &options, None, 1).unwrap();
    assert!((closed.objective - free.objective).abs() < 1e-4, "{} vs {}", closed.objective, free.objective);
}

#[test]
fn single_start_from_truth_does_not_decrease() {
    let truth = GpDiscrepancyParams {
        lambda: 0.05,
        beta: 0.1,
        sigma2: 0.5,
        omega: vec![3.0],
    };
    let data = simulate(15, &truth, 8);
    let hyper = GpHyperParams::default_for(&data);
    let options = MapOptions {
        restarts: 1,
        ..Default::default()
    };
    let start = gp_log_posterior(&truth, &hyper, &data).unwrap().value;
    let fit = gp_fit_map(&data, &hyper, BetaMode::Free, &options, Some(&truth), 0).unwrap();
    assert!(fit.objective >= start);
}

#[test]
fn map_needs_two_points() {
    let data = discrepancy(vec![0.5], 1, vec![1.0], vec![0.0]);
    let hyper = GpHyperParams::default_for(&data);
    assert!(gp_fit_map(&data, &hyper, BetaMode::Empirical, &MapOptions::default(), None, 0).is_err());
}

#[test]
fn single_point_error_quantile_is_folded_normal_median() {
    let x = InputSample::from_column(vec![0.0]).unwrap();
    let p = GpDiscrepancyParams {
        lambda: 1.0,
        beta: 0.0,
        sigma2: 0.0,
        omega: vec![1.0],
    };
    let r = gp_error_quantile(&p, &x, 0.95, 20_000, 4).unwrap();
    // median of |Z| is Φ⁻¹(0.75)
    assert!((r.median - 0.674_489_750_196_081_7).abs() < 0.03, "{}", r.median);
    assert_eq!(r, gp_error_quantile(&p, &x, 0.95, 20_000, 4).unwrap());
}

#[test]
fn bootstrap_is_deterministic_and_linear_bias_is_close() {
    let xs: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x * x + 0.1 * x).collect();
    let exp = PairedDataset::new(InputSample::from_column(xs).unwrap(), ys, DatasetKind::Experimental)
        .unwrap();
    let base = FnSurrogate::new(1, |x: &[f64]| x[0] * x[0]);
    let settings = BootstrapSettings {
        reps: 200,
        n_learn: 10,
        alpha: 0.95,
        residual_family: FunctionFamily::poly(1, 1e-8).unwrap(),
        weight: 1.0,
        seed: 5,
    };
    let a = bootstrap_error_quantile(&exp, &base, None, &settings).unwrap();
    let b = bootstrap_error_quantile(&exp, &base, None, &settings).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.quantiles.len(), 200);
    // |0.1x| on a uniform grid: 0.95-quantile ≈ 0.095
    assert!((a.median - 0.095).abs() < 0.01, "{}", a.median);
}

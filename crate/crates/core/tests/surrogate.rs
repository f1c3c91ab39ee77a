use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use uq_core::data::{DatasetKind, InputSample, PairedDataset};
use uq_core::surrogate::*;

fn data1d(xs: Vec<f64>, ys: Vec<f64>, kind: DatasetKind) -> PairedDataset {
    PairedDataset::new(InputSample::from_column(xs).unwrap(), ys, kind).unwrap()
}

#[test]
fn sine_with_gcv_spline() {
    let xs: Vec<f64> = (0..20).map(|i| std::f64::consts::PI * i as f64 / 19.0).collect();
    let ys = xs.iter().map(|x| x.sin()).collect();
    let d = data1d(xs, ys, DatasetKind::Simulated);
    let m = fit_penalized_ls_gcv(&FunctionFamily::spline1d(10, 0.0).unwrap(), &d, &default_penalty_grid()).unwrap();
    let worst = (0..=200)
        .map(|k| {
            let x = std::f64::consts::PI * k as f64 / 200.0;
            (m.evaluate(&[x]) - x.sin()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn constant_data_gives_constant_fit() {
    let xs: Vec<f64> = (0..15).map(|i| i as f64).collect();
    let d = data1d(xs, vec![2.5; 15], DatasetKind::Simulated);
    for family in [
        FunctionFamily::spline1d(6, 1e-9).unwrap(),
        FunctionFamily::poly(3, 1e-9).unwrap(),
        FunctionFamily::rbf(8, 1e-9).unwrap(),
    ] {
        let m = fit_penalized_ls(&family, &d).unwrap();
        for x in [0.0, 3.3, 14.0] {
            assert!((m.evaluate(&[x]) - 2.5).abs() < 1e-6, "{family:?}");
        }
    }
}

#[test]
fn residual_examples() {
    let exp = data1d(vec![1.0, 2.0], vec![3.0, 3.0], DatasetKind::Experimental);
    let id = FnSurrogate::new(1, |x: &[f64]| x[0]);
    assert_eq!(compute_residuals(&id, &exp).unwrap(), vec![2.0, 1.0]);
    let sim = data1d(vec![1.0, 2.0], vec![3.0, 3.0], DatasetKind::Simulated);
    assert!(compute_residuals(&id, &sim).is_err());

    let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
    let lin: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
    let exp = data1d(xs.clone(), lin.clone(), DatasetKind::Experimental);
    let m = fit_residual_model(&FunctionFamily::poly(1, 0.0).unwrap(), &exp, &lin).unwrap();
    assert!((m.coefficients[0] - 0.5).abs() < 1e-12 && (m.coefficients[1] + 2.0).abs() < 1e-12);
    let zero = fit_residual_model(&FunctionFamily::spline1d(5, 0.3).unwrap(), &exp, &[0.0; 8]).unwrap();
    assert!(zero.coefficients.iter().all(|c| c.abs() < 1e-15));
}

#[test]
fn weighted_fit_limits() {
    let xs: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
    let exp = data1d(xs.clone(), vec![0.0; 6], DatasetKind::Experimental);
    let res = vec![0.8; 6];
    let extra = InputSample::from_column(xs).unwrap();
    let constant = FunctionFamily::poly(0, 0.0).unwrap();

    let half = fit_residual_model_weighted(&constant, &exp, &res, &extra, 0.5).unwrap();
    assert!((half.coefficients[0] - 0.4).abs() < 1e-12);
    let none = fit_residual_model_weighted(&constant, &exp, &res, &extra, 0.0).unwrap();
    assert!(none.coefficients[0].abs() < 1e-12);

    let spline = FunctionFamily::spline1d(4, 1e-3).unwrap();
    let a = fit_residual_model_weighted(&spline, &exp, &res, &extra, 1.0).unwrap();
    let b = fit_residual_model(&spline, &exp, &res).unwrap();
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn cv_single_weight_and_exact_residuals() {
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let xs: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
    let lin: Vec<f64> = xs.iter().map(|x| 1.0 + x).collect();
    let exp = data1d(xs.clone(), vec![0.0; 12], DatasetKind::Experimental);
    let extra = InputSample::from_column(xs).unwrap();
    let family = FunctionFamily::poly(1, 0.0).unwrap();
    let sel = select_weight_and_penalty(&family, &exp, &lin, Some(&extra), &[0.3], &[0.0, 1.0], 4, 1).unwrap();
    assert_eq!(sel.weight, 0.3);
    let sel = select_weight_and_penalty(&family, &exp, &lin, None, &[1.0], &[0.0], 4, 1).unwrap();
    assert_eq!(sel.penalty, 0.0);
    assert!(sel.cv_score < 1e-20);
}

#[test]
fn cv_shrinks_pure_noise() {
    let family = FunctionFamily::spline1d(5, 0.0).unwrap();
    let shrunk = (0..100u64)
        .filter(|&rep| {
            let mut rng = ChaCha20Rng::seed_from_u64(rep);
            let xs: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
            let noise: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exp = data1d(xs, vec![0.0; 10], DatasetKind::Experimental);
            let extra = InputSample::from_column((0..100).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let sel = select_weight_and_penalty(
                &family, &exp, &noise, Some(&extra), &default_weight_grid(), &default_penalty_grid(), 5, rep,
            )
            .unwrap();
            sel.weight < 1.0
        })
        .count();
    assert!(shrunk >= 80, "{shrunk}/100");
}

#[test]
fn improved_surrogate_examples() {
    let xs: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let d = data1d(xs.clone(), xs.clone(), DatasetKind::Simulated);
    let base = fit_penalized_ls(&FunctionFamily::poly(1, 0.0).unwrap(), &d).unwrap();
    let one = base.with_coefficients(vec![1.0, 0.0]).unwrap();
    let zero = base.with_coefficients(vec![0.0, 0.0]).unwrap();
    let m = improved_surrogate(base.clone(), one.clone(), 1.0).unwrap();
    assert!((m.evaluate(&[2.0]) - 3.0).abs() < 1e-12);
    let same = improved_surrogate(base.clone(), zero.clone(), 1.0).unwrap();
    let only_res = improved_surrogate(zero, one, 1.0).unwrap();
    for x in [-1.0, 0.3, 7.0] {
        assert_eq!(same.evaluate(&[x]), base.evaluate(&[x]));
        assert!((only_res.evaluate(&[x]) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn representable_bias_is_removed() {
    // truth x², computer model x² + 0.3 + 0.2x, noise-free experiments
    let truth = |x: f64| x * x;
    let model = |x: f64| truth(x) + 0.3 + 0.2 * x;
    let sx: Vec<f64> = (0..30).map(|i| -1.0 + 2.0 * i as f64 / 29.0).collect();
    let sims = data1d(sx.clone(), sx.iter().map(|x| model(*x)).collect(), DatasetKind::Simulated);
    let base = fit_penalized_ls(&FunctionFamily::poly(2, 0.0).unwrap(), &sims).unwrap();
    let ex: Vec<f64> = (0..12).map(|i| -0.9 + 1.7 * i as f64 / 11.0).collect();
    let exp = data1d(ex.clone(), ex.iter().map(|x| truth(*x)).collect(), DatasetKind::Experimental);
    let settings = ImprovedSettings {
        penalty_grid: vec![0.0],
        ..ImprovedSettings::new(FunctionFamily::poly(1, 0.0).unwrap(), false, 3)
    };
    let improved = fit_improved_surrogate(base, &exp, None, &settings).unwrap();
    let worst = (0..=100)
        .map(|k| {
            let x = -0.9 + 1.7 * k as f64 / 100.0;
            (improved.evaluate(&[x]) - truth(x)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_beats_zero_and_random_coefficients(seed in any::<u64>(), pen in 1e-8f64..1e-1) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let d = data1d(xs, ys, DatasetKind::Simulated);
        for family in [FunctionFamily::spline1d(7, pen).unwrap(), FunctionFamily::rbf(10, pen).unwrap()] {
            let m = fit_penalized_ls(&family, &d).unwrap();
            let best = m.objective(&d);
            let zero = m.with_coefficients(vec![0.0; m.coefficients.len()]).unwrap();
            prop_assert!(best <= zero.objective(&d) + 1e-12);
            for _ in 0..100 {
                let c = m.coefficients.iter().map(|c| c + rng.random_range(-0.1..0.1)).collect();
                prop_assert!(best <= m.with_coefficients(c).unwrap().objective(&d) + 1e-12);
            }
            let ne = normal_equations(&family, &d).unwrap();
            prop_assert!(ne.relative_residual(pen, &m.coefficients) < 1e-8);
        }
    }
}

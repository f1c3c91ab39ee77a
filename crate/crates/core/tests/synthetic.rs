use uq_core::model_error::avm;
use uq_core::surrogate::{
    fit_improved_surrogate, fit_penalized_ls_gcv, default_penalty_grid, FunctionFamily,
    ImprovedSettings, Surrogate,
};
use uq_core::synthetic::*;

#[test]
fn experiment_mean_matches_analytic_mean() {
    let s = make_mafds_like(BiasKind::None, 0.001).unwrap();
    let n = 100_000;
    let e = s.draw_experiment(n, 1).unwrap();
    let mean = e.outputs.iter().sum::<f64>() / n as f64;
    // E[a√X] by quadrature against the analytic density
    let (lo, hi, m) = (0.04, 0.13, 50_000);
    let h = (hi - lo) / m as f64;
    let noise_free = make_mafds_like(BiasKind::None, 0.0).unwrap();
    let want: f64 = (0..m)
        .map(|k| {
            let y = lo + (k as f64 + 0.5) * h;
            y * noise_free.true_density(y).unwrap() * h
        })
        .sum();
    let sd = 0.005;
    assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean} vs {want}");
}

#[test]
fn constant_bias_shows_up_as_avm() {
    for s in [
        make_mafds_like(BiasKind::Constant, 0.0).unwrap(),
        make_hidim_like(BiasKind::Constant, 0.0).unwrap(),
    ] {
        let c = s.bias_at(s.draw_inputs(1, 0).unwrap().row(0));
        let y = s.draw_experiment(20_000, 2).unwrap().outputs;
        let m = s.draw_simulation(20_000, 3).unwrap().outputs;
        let r = avm(&y, &m, 1000).unwrap();
        assert!((r.exact - c.abs()).abs() < 0.1 * c.abs(), "{} vs {c}", r.exact);
    }
}

#[test]
fn hidim_quantile_is_stable_across_seeds() {
    let s = make_hidim_like(BiasKind::None, 0.0).unwrap();
    let a = s.monte_carlo_quantile(0.95, 1_000_000, 1).unwrap();
    let b = s.monte_carlo_quantile(0.95, 1_000_000, 2).unwrap();
    assert!((a - b).abs() < 0.02, "{a} {b}");
    let median = s.monte_carlo_quantile(0.5, 200_000, 3).unwrap();
    assert!(a > median);
}

#[test]
fn no_bias_no_noise_leaves_nothing_to_correct() {
    let s = make_mafds_like(BiasKind::None, 0.0).unwrap();
    let sims = s.draw_simulation(80, 4).unwrap();
    let base = fit_penalized_ls_gcv(&FunctionFamily::spline1d(12, 0.0).unwrap(), &sims, &default_penalty_grid()).unwrap();
    // experiments observed at simulated inputs: residuals are the base fit error only
    let exp = s.draw_experiment(20, 5).unwrap();
    let settings = ImprovedSettings::new(FunctionFamily::poly(0, 0.0).unwrap(), false, 6);
    let improved = fit_improved_surrogate(base.clone(), &exp, None, &settings).unwrap();
    let x = s.draw_inputs(1000, 7).unwrap();
    let worst = x
        .rows()
        .map(|r| (improved.evaluate(r) - base.evaluate(r)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn bias_quantile_oracles() {
    let s = make_mafds_with_bias(Bias::Linear { intercept: 0.0, slope: 0.001 }, 0.0).unwrap();
    assert!((s.bias_abs_quantile(0.95).unwrap() - 0.001 * 1.959_963_984_540_054).abs() < 1e-12);
    assert!(make_mafds_like(BiasKind::Smooth, 0.0).unwrap().bias_abs_quantile(0.95).is_none());
    assert!(make_hidim_like(BiasKind::Linear, 0.0).unwrap().true_quantile(0.5).is_none());
}

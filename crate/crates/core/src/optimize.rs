//! Small derivative-free optimisers used by the fitting routines.

/// Minimise a unimodal function on [lo, hi] by golden-section search.
/// Returns (argmin, min).
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Nelder–Mead settings.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Rebuild the simplex around the best point this many times.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            initial_step: 0.5,
            f_tol: 1e-12,
            x_tol: 1e-9,
            restarts: 2,
        }
    }
}

impl NelderMead {
    /// Minimise `f`; non-finite values count as +∞. The returned point is
    /// never worse than `x0`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> (Vec<f64>, f64) {
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut best_x = x0.to_vec();
        let mut best_f = eval(x0);
        let mut budget = self.max_evals;
        for _ in 0..=self.restarts {
            let (x, fx, used) = self.run(&mut eval, &best_x, best_f, budget);
            budget = budget.saturating_sub(used);
            let improved = fx < best_f - self.f_tol * (1.0 + best_f.abs());
            if fx <= best_f {
                best_x = x;
                best_f = fx;
            }
            if !improved || budget == 0 {
                break;
            }
        }
        (best_x, best_f)
    }

    fn run<F: FnMut(&[f64]) -> f64>(
        &self,
        eval: &mut F,
        x0: &[f64],
        f0: f64,
        budget: usize,
    ) -> (Vec<f64>, f64, usize) {
        let k = x0.len();
        let mut used = 0;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
        for i in 0..k {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let fx = eval(&x);
            used += 1;
            simplex.push((x, fx));
        }
        while used < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[k].1;
            let spread = if f_worst.is_finite() { f_worst - f_best } else { f64::INFINITY };
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * (1.0 + f_best.abs()) && size <= self.x_tol {
                break;
            }
            let mut centroid = vec![0.0; k];
            for (x, _) in &simplex[..k] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / k as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[k].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(1.0);
            let fr = eval(&xr);
            used += 1;
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe);
                used += 1;
                simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[k - 1].1 {
                simplex[k] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[k].1 {
                    let x = along(0.5);
                    let v = eval(&x);
                    (x, v)
                } else {
                    let x = along(-0.5);
                    let v = eval(&x);
                    (x, v)
                };
                used += 1;
                if fc < simplex[k].1.min(fr) {
                    simplex[k] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> =
                            best.iter().zip(&entry.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                        let fx = eval(&x);
                        *entry = (x, fx);
                    }
                    used += k;
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        (x, fx, used)
    }
}

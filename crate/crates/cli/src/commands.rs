use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use uq_core::confidence::{
    default_delta_delta_fractions, density_band, quantile_ci, BandSettings, CiSettings, DeltaDelta,
};
use uq_core::data::{
    csv_string, default_schema, parse_dataset, read_columns, read_header, read_input_sample,
    write_dataset, write_input_sample, ColumnSpec, DatasetKind, InputSample, PairedDataset, RunConfig,
};
use uq_core::density::{mc_quantile, select_bandwidth, Bandwidth, Grid, KdeModel, Kernel};
use uq_core::model_error::{
    avm, bootstrap_error_quantile, empirical_cdf, gp_error_quantile, gp_fit_map, BetaMode,
    BootstrapSettings, DiscrepancyData, GpHyperParams, MapOptions,
};
use uq_core::randgen::{estimate_mvn, latin_hypercube, sample_mvn};
use uq_core::rng::derive_seed;
use uq_core::surrogate::{
    default_penalty_grid, fit_improved_surrogate, fit_penalized_ls, fit_penalized_ls_gcv, FunctionFamily,
    ImprovedSettings, ModelFile, Surrogate,
};
use uq_core::synthetic::{make_hidim_like, make_mafds_like, BiasKind};
use uq_core::{Result, UqError};

use crate::args::*;
use crate::report::{OutDir, Stopwatch};

/// Run state shared by every command.
pub struct Ctx {
    pub seed: u64,
    pub config: RunConfig,
    pub dry_run: bool,
    pub out: OutDir,
    pub watch: Stopwatch,
}

/// Resolved settings and, unless dry-running, results.
pub struct Outcome {
    pub settings: Value,
    pub results: Value,
}

fn config_err(msg: impl Into<String>) -> UqError {
    UqError::Config(vec![msg.into()])
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serialises")
}

/// A required input file that must exist.
fn need_file<'a>(opt: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let path = opt.as_deref().ok_or_else(|| config_err(format!("{flag} is required")))?;
    check_file(path)?;
    Ok(path)
}

fn check_file(path: &Path) -> Result<()> {
    fs::metadata(path).map(|_| ()).map_err(|source| UqError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn optional_file(opt: &Option<PathBuf>) -> Result<Option<&Path>> {
    match opt.as_deref() {
        Some(p) => check_file(p).map(|_| Some(p)),
        None => Ok(None),
    }
}

fn parse_f64(flag: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| config_err(format!("{flag}: {s:?} is not a number")))
}

fn parse_grid(text: &str) -> Result<Grid> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(config_err(format!("--grid {text:?} must be lo:hi:steps")));
    }
    let steps = parts[2]
        .trim()
        .parse()
        .map_err(|_| config_err(format!("--grid steps {:?} is not an integer", parts[2])))?;
    Grid::new(parse_f64("--grid", parts[0])?, parse_f64("--grid", parts[1])?, steps)
}

/// `spline1d`, `poly` or `rbf` with the given size and penalty.
fn family(name: &str, size: Option<usize>, defaults: [usize; 3], penalty: f64) -> Result<FunctionFamily> {
    match name {
        "spline1d" => FunctionFamily::spline1d(size.unwrap_or(defaults[0]), penalty),
        "poly" => FunctionFamily::poly(size.unwrap_or(defaults[1]), penalty),
        "rbf" => FunctionFamily::rbf(size.unwrap_or(defaults[2]), penalty),
        other => Err(config_err(format!("unknown family {other:?} (spline1d, poly, rbf)"))),
    }
}

/// Dataset whose output is `output` (default: last column) and whose inputs
/// are every other column not in `exclude`.
fn load_dataset(path: &Path, output: Option<&str>, exclude: &[&str], kind: DatasetKind) -> Result<PairedDataset> {
    let header = read_header(path)?;
    let output = match output {
        Some(o) => o.to_string(),
        None => header.last().cloned().unwrap_or_default(),
    };
    let inputs: Vec<String> = header
        .iter()
        .filter(|h| **h != output && !exclude.contains(&h.as_str()))
        .cloned()
        .collect();
    parse_dataset(path, &ColumnSpec::new(inputs, output), kind)
}

fn load_inputs(path: &Path, columns: &[String]) -> Result<InputSample> {
    if columns.is_empty() {
        read_input_sample(path)
    } else {
        read_columns(path, columns)
    }
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|source| UqError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| UqError::Format {
        path: path.to_path_buf(),
        message: format!("not a model file: {e}"),
    })
}

fn evaluate<S: Surrogate + ?Sized>(model: &S, inputs: &InputSample) -> Result<Vec<f64>> {
    if model.dim() != inputs.dim() {
        return Err(UqError::DimensionMismatch {
            expected: model.dim(),
            got: inputs.dim(),
        });
    }
    Ok(model.evaluate_sample(inputs))
}

/// Grid over the data range widened by `pad` on both sides.
fn span_grid(values: &[f64], pad: f64, steps: usize) -> Result<Grid> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { pad } else { pad.max(lo.abs().max(1.0) * 1e-3) };
    Grid::new(lo - pad, hi + pad, steps)
}

fn write_csv(out: &mut OutDir, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let rows = (0..columns[0].len()).map(|i| columns.iter().map(|c| c[i]).collect());
    out.write(name, &csv_string(&header, rows))
}

fn planned(settings: Value) -> Result<Outcome> {
    Ok(Outcome {
        settings,
        results: Value::Null,
    })
}

pub fn run(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome> {
    match cmd {
        Command::GenInputs(a) => gen_inputs(a, ctx),
        Command::FitSurrogate(a) => fit_surrogate(a, ctx),
        Command::Density(a) => density(a, ctx),
        Command::Quantile(a) => quantile(a, ctx),
        Command::Avm(a) => avm_cmd(a, ctx),
        Command::GpError(a) => gp_error(a, ctx),
        Command::BootstrapError(a) => bootstrap_error(a, ctx),
        Command::CiQuantile(a) => ci_quantile(a, ctx),
        Command::DensityBand(a) => density_band_cmd(a, ctx),
        Command::Synth(a) => synth(a, ctx),
    }
}

fn gen_inputs(a: &GenInputs, ctx: &mut Ctx) -> Result<Outcome> {
    let count = a.count.unwrap_or(ctx.config.n2);
    ctx.out.resolve(&a.out)?;
    let ranges = a
        .ranges
        .iter()
        .map(|r| match r.split_once(':') {
            Some((lo, hi)) => Ok((parse_f64("--ranges", lo)?, parse_f64("--ranges", hi)?)),
            None => Err(config_err(format!("--ranges entry {r:?} must be lo:hi"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let from = optional_file(&a.from)?;
    if from.is_none() && ranges.is_empty() {
        return Err(config_err("gen-inputs needs --from or --ranges"));
    }
    let settings = json!({ "args": a, "count": count, "seed": ctx.seed });
    if ctx.dry_run {
        return planned(settings);
    }
    let results = if let Some(path) = from {
        let header = read_header(path)?;
        let sample = read_input_sample(path)?;
        let mvn = estimate_mvn(&sample)?;
        ctx.watch.lap("estimate");
        let draws = sample_mvn(&mvn, count, ctx.seed)?;
        ctx.watch.lap("sample");
        write_input_sample(&ctx.out.prepare(&a.out)?, &draws, Some(&header))?;
        let d = mvn.dim();
        let cov: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| mvn.covariance[(i, j)]).collect()).collect();
        json!({
            "method": "mvn",
            "mean": mvn.mean.as_slice(),
            "covariance": cov,
            "count": count,
            "seed": ctx.seed,
        })
    } else {
        let draws = latin_hypercube(&ranges, count, ctx.seed)?;
        ctx.watch.lap("sample");
        write_input_sample(&ctx.out.prepare(&a.out)?, &draws, None)?;
        json!({ "method": "latin-hypercube", "ranges": ranges, "count": count, "seed": ctx.seed })
    };
    ctx.watch.lap("write");
    Ok(Outcome { settings, results })
}

fn fit_surrogate(a: &FitSurrogate, ctx: &mut Ctx) -> Result<Outcome> {
    let sim = need_file(&a.sim, "--sim")?;
    let exp = optional_file(&a.exp.exp)?;
    let extra = optional_file(&a.extra)?;
    ctx.out.resolve(&a.out)?;
    let gcv = a.penalty == "gcv";
    let penalty = if gcv { 0.0 } else { parse_f64("--penalty", &a.penalty)? };
    let fam = family(&a.family, a.size, [12, 3, 50], penalty)?;
    let residual = family(&a.residual_family, a.residual_size, [5, 1, 20], 0.0)?;
    if a.weighted && (exp.is_none() || extra.is_none()) {
        return Err(config_err("--weighted needs --exp and --extra"));
    }
    let settings = json!({ "args": a, "family": fam, "residual_family": residual, "seed": ctx.seed });
    if ctx.dry_run {
        return planned(settings);
    }
    let sims = load_dataset(sim, a.sim_output.as_deref(), &[], DatasetKind::Simulated)?;
    let base = if gcv {
        fit_penalized_ls_gcv(&fam, &sims, &default_penalty_grid())?
    } else {
        fit_penalized_ls(&fam, &sims)?
    };
    ctx.watch.lap("base-fit");
    let mut results = json!({
        "family": base.family,
        "cv_score": base.cv_score,
        "training_size": base.training_size,
        "objective": base.objective(&sims),
    });
    let model = match exp {
        Some(path) => {
            let exp = load_dataset(path, a.exp.exp_output.as_deref(), &[], DatasetKind::Experimental)?;
            let extra = extra.map(read_input_sample).transpose()?;
            let mut s = ImprovedSettings::new(residual, a.weighted, derive_seed(ctx.seed, 1));
            s.folds = a.folds;
            let plain_beta = uq_core::confidence::max_abs_error(&exp, &base)?;
            let improved = fit_improved_surrogate(base, &exp, extra.as_ref(), &s)?;
            ctx.watch.lap("residual-fit");
            results["residual_family"] = to_value(&improved.residual_model.family);
            results["weight"] = json!(improved.weight);
            results["residual_cv_score"] = json!(improved.residual_model.cv_score);
            results["max_abs_error_plain"] = json!(plain_beta);
            results["max_abs_error_improved"] = json!(uq_core::confidence::max_abs_error(&exp, &improved)?);
            results["cv_seed"] = json!(s.seed);
            ModelFile::Improved(improved)
        }
        None => ModelFile::Plain(base),
    };
    let text = serde_json::to_string_pretty(&model).expect("model serialises");
    ctx.out.write(&a.out, &text)?;
    ctx.watch.lap("write");
    Ok(Outcome { settings, results })
}

/// Model and input sample shared by the output-based commands.
fn model_and_inputs(model: &ModelArg, inputs: &InputsArg) -> Result<(PathBuf, PathBuf)> {
    Ok((
        need_file(&model.model, "--model")?.to_path_buf(),
        need_file(&inputs.inputs, "--inputs")?.to_path_buf(),
    ))
}

fn density(a: &Density, ctx: &mut Ctx) -> Result<Outcome> {
    let (model_path, inputs_path) = model_and_inputs(&a.model, &a.inputs)?;
    let kernel: Kernel = a.kernel.parse()?;
    let bandwidth: Bandwidth = a.bandwidth.parse()?;
    let grid = a.grid.grid.as_deref().map(parse_grid).transpose()?;
    ctx.out.resolve(&a.out)?;
    let settings = json!({ "args": a, "kernel": kernel, "bandwidth": bandwidth });
    if ctx.dry_run {
        return planned(settings);
    }
    let model = load_model(&model_path)?;
    let inputs = load_inputs(&inputs_path, &a.inputs.columns)?;
    ctx.watch.lap("load");
    let outputs = evaluate(&model, &inputs)?;
    ctx.watch.lap("evaluate");
    let h = match bandwidth {
        Bandwidth::Auto => select_bandwidth(&outputs)?,
        Bandwidth::Fixed(h) => h,
    };
    let n = outputs.len();
    let kde = KdeModel::new(outputs, h, kernel)?;
    let grid = match grid {
        Some(g) => g,
        None => span_grid(kde.values(), 3.0 * h, a.grid.grid_steps)?,
    };
    let ys = grid.points();
    let dens: Vec<f64> = ys.iter().map(|&y| kde.evaluate(y)).collect();
    ctx.watch.lap("kde");
    write_csv(&mut ctx.out, &a.out, &["y", "density"], &[&ys, &dens])?;
    let results = json!({
        "bandwidth": h,
        "kernel": kernel,
        "sample_size": n,
        "grid": grid,
        "total_mass": kde.total_mass(),
    });
    Ok(Outcome { settings, results })
}

fn quantile(a: &Quantile, ctx: &mut Ctx) -> Result<Outcome> {
    let (model_path, inputs_path) = model_and_inputs(&a.model, &a.inputs)?;
    let settings = json!({ "args": a });
    if ctx.dry_run {
        return planned(settings);
    }
    let model = load_model(&model_path)?;
    let inputs = load_inputs(&inputs_path, &a.inputs.columns)?;
    ctx.watch.lap("load");
    let outputs = evaluate(&model, &inputs)?;
    ctx.watch.lap("evaluate");
    let q = mc_quantile(&outputs, a.alpha)?;
    ctx.watch.lap("quantile");
    Ok(Outcome {
        settings,
        results: to_value(&q),
    })
}

fn avm_cmd(a: &Avm, ctx: &mut Ctx) -> Result<Outcome> {
    let exp = need_file(&a.exp.exp, "--exp")?;
    let sim = need_file(&a.sim, "--sim")?;
    if let Some(name) = &a.out {
        ctx.out.resolve(name)?;
    }
    let settings = json!({ "args": a });
    if ctx.dry_run {
        return planned(settings);
    }
    let exp = load_dataset(exp, a.exp.exp_output.as_deref(), &[], DatasetKind::Experimental)?;
    let sim = load_dataset(sim, a.sim_output.as_deref(), &[], DatasetKind::Simulated)?;
    ctx.watch.lap("load");
    let r = avm(&exp.outputs, &sim.outputs, a.steps)?;
    ctx.watch.lap("avm");
    if let Some(name) = &a.out {
        let (fe, fs) = (empirical_cdf(&exp.outputs)?, empirical_cdf(&sim.outputs)?);
        let dt = (r.grid_hi - r.grid_lo) / r.steps as f64;
        let ts: Vec<f64> = (0..r.steps).map(|k| r.grid_lo + (k as f64 + 0.5) * dt).collect();
        let a_cdf: Vec<f64> = ts.iter().map(|&t| fe.eval(t)).collect();
        let b_cdf: Vec<f64> = ts.iter().map(|&t| fs.eval(t)).collect();
        write_csv(&mut ctx.out, name, &["t", "cdf_exp", "cdf_sim"], &[&ts, &a_cdf, &b_cdf])?;
        ctx.watch.lap("write");
    }
    let mut results = to_value(&r);
    results["n_exp"] = json!(exp.len());
    results["n_sim"] = json!(sim.len());
    Ok(Outcome { settings, results })
}

fn gp_error(a: &GpError, ctx: &mut Ctx) -> Result<Outcome> {
    let exp_path = need_file(&a.exp.exp, "--exp")?;
    let model_path = optional_file(&a.model.model)?;
    if a.model_column.is_none() == model_path.is_none() {
        return Err(config_err("gp-error needs exactly one of --model-column and --model"));
    }
    let beta_mode = match a.beta_mode.as_str() {
        "closed-form" => BetaMode::ClosedForm,
        "empirical" => BetaMode::Empirical,
        "free" => BetaMode::Free,
        other => return Err(config_err(format!("unknown --beta-mode {other:?}"))),
    };
    let options = MapOptions {
        restarts: a.restarts,
        max_evals: a.max_evals,
        joint_hyper: a.joint_hyper,
    };
    let (fit_seed, sim_seed) = (derive_seed(ctx.seed, 1), derive_seed(ctx.seed, 2));
    let settings = json!({ "args": a, "map": options, "fit_seed": fit_seed, "simulation_seed": sim_seed });
    if ctx.dry_run {
        return planned(settings);
    }
    let exclude: Vec<&str> = a.model_column.iter().map(String::as_str).collect();
    let exp = load_dataset(exp_path, a.exp.exp_output.as_deref(), &exclude, DatasetKind::Experimental)?;
    let model_outputs = match (&a.model_column, model_path) {
        (Some(col), _) => read_columns(exp_path, std::slice::from_ref(col))?.column(0),
        (None, Some(p)) => evaluate(&load_model(p)?, &exp.inputs)?,
        (None, None) => unreachable!("checked above"),
    };
    let data = DiscrepancyData::new(exp, model_outputs)?;
    ctx.watch.lap("load");
    let hyper = GpHyperParams::default_for(&data);
    let fit = gp_fit_map(&data, &hyper, beta_mode, &options, None, fit_seed)?;
    ctx.watch.lap("map-fit");
    let q = gp_error_quantile(&fit.params, data.inputs(), a.alpha, a.reps, sim_seed)?;
    ctx.watch.lap("error-quantile");
    let results = json!({ "fit": fit, "error_quantile": q });
    Ok(Outcome { settings, results })
}

fn bootstrap_error(a: &BootstrapError, ctx: &mut Ctx) -> Result<Outcome> {
    let exp_path = need_file(&a.exp.exp, "--exp")?;
    let model_path = need_file(&a.model.model, "--model")?;
    let extra_path = optional_file(&a.extra)?;
    let settings = BootstrapSettings {
        reps: a.reps,
        n_learn: a.n_learn,
        alpha: a.alpha,
        residual_family: family(&a.residual_family, a.residual_size, [5, 1, 20], a.residual_penalty)?,
        weight: a.weight,
        seed: ctx.seed,
    };
    let echo = json!({ "args": a, "bootstrap": settings });
    if ctx.dry_run {
        return planned(echo);
    }
    let exp = load_dataset(exp_path, a.exp.exp_output.as_deref(), &[], DatasetKind::Experimental)?;
    let model = load_model(model_path)?;
    let extra = extra_path.map(read_input_sample).transpose()?;
    ctx.watch.lap("load");
    let r = bootstrap_error_quantile(&exp, model.base(), extra.as_ref(), &settings)?;
    ctx.watch.lap("bootstrap");
    Ok(Outcome {
        settings: echo,
        results: to_value(&r),
    })
}

fn delta_delta(text: &str) -> Result<DeltaDelta> {
    match text {
        "half" => Ok(DeltaDelta::Half),
        "sweep" => Ok(DeltaDelta::Sweep(default_delta_delta_fractions())),
        v => parse_f64("--delta-delta", v).map(DeltaDelta::Fixed),
    }
}

/// The surrogate the confidence statements are made for.
fn chosen(model: &ModelFile, improved: bool) -> Result<&dyn Surrogate> {
    match (model, improved) {
        (ModelFile::Improved(m), true) => Ok(m),
        (ModelFile::Plain(_), true) => Err(config_err("--improved needs an improved model file")),
        (m, false) => Ok(m.base()),
    }
}

fn ci_quantile(a: &CiQuantile, ctx: &mut Ctx) -> Result<Outcome> {
    let exp_path = need_file(&a.exp.exp, "--exp")?;
    let (model_path, inputs_path) = model_and_inputs(&a.model, &a.inputs)?;
    let ci = CiSettings {
        alpha: a.alpha,
        delta: a.delta,
        delta_delta: delta_delta(&a.delta_delta)?,
    };
    let settings = json!({ "args": a, "ci": ci });
    if ctx.dry_run {
        return planned(settings);
    }
    let exp = load_dataset(exp_path, a.exp.exp_output.as_deref(), &[], DatasetKind::Experimental)?;
    let model = load_model(&model_path)?;
    let inputs = load_inputs(&inputs_path, &a.inputs.columns)?;
    let surrogate = chosen(&model, a.improved)?;
    ctx.watch.lap("load");
    let outputs = evaluate(surrogate, &inputs)?;
    ctx.watch.lap("evaluate");
    let r = quantile_ci(&exp, surrogate, &outputs, &ci)?;
    ctx.watch.lap("interval");
    Ok(Outcome {
        settings,
        results: to_value(&r),
    })
}

fn density_band_cmd(a: &DensityBand, ctx: &mut Ctx) -> Result<Outcome> {
    let exp_path = need_file(&a.exp.exp, "--exp")?;
    let (model_path, inputs_path) = model_and_inputs(&a.model, &a.inputs)?;
    let kappa = a.kappa.ok_or_else(|| config_err("--kappa is required"))?;
    let kernel: Kernel = a.kernel.parse()?;
    let grid = a.grid.grid.as_deref().map(parse_grid).transpose()?;
    ctx.out.resolve(&a.out)?;
    let settings = json!({ "args": a, "kernel": kernel });
    if ctx.dry_run {
        return planned(settings);
    }
    let exp = load_dataset(exp_path, a.exp.exp_output.as_deref(), &[], DatasetKind::Experimental)?;
    let model = load_model(&model_path)?;
    let inputs = load_inputs(&inputs_path, &a.inputs.columns)?;
    let surrogate = chosen(&model, a.improved)?;
    ctx.watch.lap("load");
    let outputs = evaluate(surrogate, &inputs)?;
    ctx.watch.lap("evaluate");
    let grid = match grid {
        Some(g) => g,
        None => {
            let lo = outputs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            span_grid(&outputs, 0.1 * (hi - lo), a.grid.grid_steps)?
        }
    };
    let band_settings = BandSettings {
        kappa,
        delta: a.delta,
        bandwidths: a.bandwidths.clone(),
        kernel,
        grid,
    };
    let band = density_band(&outputs, &exp, surrogate, &band_settings)?;
    ctx.watch.lap("band");
    write_csv(&mut ctx.out, &a.out, &["y", "lower", "upper"], &[&band.grid, &band.lower, &band.upper])?;
    let bandwidths: Vec<f64> = band.components.iter().map(|c| c.bandwidth).collect();
    let results = json!({
        "settings": band.settings,
        "beta_hat": band.beta_hat,
        "n": band.n,
        "big_n": band.big_n,
        "eps_gamma": band.eps_gamma,
        "correction": band.correction,
        "bandwidths": bandwidths,
    });
    Ok(Outcome { settings, results })
}

fn synth(a: &Synth, ctx: &mut Ctx) -> Result<Outcome> {
    let kind: BiasKind = a.bias.parse()?;
    let system = match a.system.as_str() {
        "mafds" => make_mafds_like(kind, a.sigma_obs)?,
        "hidim" => make_hidim_like(kind, a.sigma_obs)?,
        other => return Err(config_err(format!("unknown --system {other:?} (mafds, hidim)"))),
    };
    let sims = a.sims.unwrap_or(ctx.config.l_n);
    let extra = a.extra_count.unwrap_or(ctx.config.n1);
    let count = a.inputs_count.unwrap_or(ctx.config.n2);
    let seeds = [1, 2, 3, 4].map(|k| derive_seed(ctx.seed, k));
    let settings = json!({
        "args": a,
        "sims": sims,
        "extra_count": extra,
        "inputs_count": count,
        "seeds": { "experiment": seeds[0], "simulation": seeds[1], "extra": seeds[2], "inputs": seeds[3] },
    });
    if ctx.dry_run {
        return planned(settings);
    }
    let schema = default_schema(system.dim());
    let exp = system.draw_experiment(a.n, seeds[0])?;
    write_dataset(&ctx.out.prepare("experiment.csv")?, &exp, &schema)?;
    if sims > 0 {
        let sim = system.draw_simulation(sims, seeds[1])?;
        write_dataset(&ctx.out.prepare("simulation.csv")?, &sim, &schema)?;
    }
    for (name, n, seed) in [("extra.csv", extra, seeds[2]), ("inputs.csv", count, seeds[3])] {
        if n > 0 {
            let x = system.draw_inputs(n, seed)?;
            write_input_sample(&ctx.out.prepare(name)?, &x, Some(&schema.inputs))?;
        }
    }
    ctx.watch.lap("draw");
    let mut results = json!({ "system": system });
    if let Some(alpha) = a.alpha {
        results["alpha"] = json!(alpha);
        results["true_quantile"] = json!(system.true_quantile(alpha));
        results["bias_abs_quantile"] = json!(system.bias_abs_quantile(alpha));
    }
    Ok(Outcome { settings, results })
}

mod args;
mod commands;
mod report;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde_json::Value;
use uq_core::data::RunConfig;
use uq_core::rng::RNG_CONTRACT;
use uq_core::{Result, UqError};

use args::{Cli, VALUE_GLOBALS};
use commands::Ctx;
use report::{error_json, OutDir, PipelineReport, Stopwatch};

fn main() -> ExitCode {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(cli) => cli,
        Err(e) => return usage_failure(e),
    };
    match execute(cli, &raw) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut v = error_json(e.kind(), &e.to_string(), e.path());
            if let UqError::Infeasible { minimal_delta, .. } = &e {
                v["error"]["minimal_delta"] = serde_json::json!(minimal_delta);
            }
            if let UqError::Config(problems) = &e {
                v["error"]["problems"] = serde_json::json!(problems);
            }
            eprintln!("{v}");
            ExitCode::FAILURE
        }
    }
}

fn usage_failure(e: clap::Error) -> ExitCode {
    use clap::error::ErrorKind;
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        let _ = e.print();
        return ExitCode::SUCCESS;
    }
    let message = e.render().to_string();
    eprintln!("{}", error_json("usage", message.trim(), None));
    ExitCode::from(2)
}

/// Flags for one config block: `{"alpha": 0.9, "improved": true}` becomes
/// `--alpha 0.9 --improved`. Every unknown key is reported at once.
fn block_flags(cmd_name: &str, block: &Value) -> Result<Vec<OsString>> {
    let command = Cli::command();
    let sub = command
        .find_subcommand(cmd_name)
        .expect("subcommand exists");
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let Value::Object(map) = block else {
        return Err(UqError::Config(vec![format!("block {cmd_name:?} must be a JSON object")]));
    };
    let mut problems = Vec::new();
    let mut flags = Vec::new();
    for (key, value) in map {
        let long = key.replace('_', "-");
        if !known.contains(&long) {
            problems.push(format!("{cmd_name}.{key}: unknown setting"));
            continue;
        }
        let flag = OsString::from(format!("--{long}"));
        match value {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => flags.extend([flag, s.into()]),
            Value::Number(n) => flags.extend([flag, n.to_string().into()]),
            Value::Array(items) => {
                let parts: Option<Vec<String>> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Some(s.clone()),
                        Value::Number(n) => Some(n.to_string()),
                        _ => None,
                    })
                    .collect();
                match parts {
                    Some(p) => flags.extend([flag, p.join(",").into()]),
                    None => problems.push(format!("{cmd_name}.{key}: arrays may hold only strings and numbers")),
                }
            }
            Value::Object(_) => problems.push(format!("{cmd_name}.{key}: nested objects are not settings")),
        }
    }
    if problems.is_empty() {
        Ok(flags)
    } else {
        Err(UqError::Config(problems))
    }
}

/// Re-parse with the config block's flags placed right after the subcommand,
/// so flags given on the command line win.
fn merge_config(cli: Cli, raw: &[OsString], config: &RunConfig) -> Result<Cli> {
    let name = cli.command.name();
    let Some(block) = config.method(name) else {
        return Ok(cli);
    };
    let flags = block_flags(name, block)?;
    let mut pos = None;
    for i in 1..raw.len() {
        let prev_takes_value = VALUE_GLOBALS.iter().any(|g| raw[i - 1] == *g);
        if raw[i] == name && !prev_takes_value {
            pos = Some(i);
            break;
        }
    }
    let pos = pos.expect("parsed subcommand appears in argv");
    let mut merged = raw[..=pos].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&raw[pos + 1..]);
    Cli::try_parse_from(&merged).map_err(|e| UqError::Config(vec![e.render().to_string().trim().to_string()]))
}

fn execute(cli: Cli, raw: &[OsString]) -> Result<PipelineReport> {
    let mut watch = Stopwatch::start();
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cli = merge_config(cli, raw, &config)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(UqError::Config(vec!["--threads must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| UqError::Config(vec![format!("thread pool: {e}")]))?;
    }
    let seed = cli.seed.unwrap_or(config.seed);
    let name = cli.command.name();
    let report_name = cli.report.clone().unwrap_or_else(|| format!("{name}.json"));
    let mut ctx = Ctx {
        seed,
        config,
        dry_run: cli.dry_run,
        out: OutDir::new(cli.out_dir.clone()),
        watch: Stopwatch::start(),
    };
    ctx.out.resolve(&report_name)?;
    watch.lap("setup");
    let outcome = commands::run(&cli.command, &mut ctx)?;
    let mut timings = ctx.watch.into_laps();
    watch.lap("run");
    timings.extend(watch.into_laps());
    let mut report = PipelineReport {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        rng_contract: RNG_CONTRACT.to_string(),
        dry_run: cli.dry_run,
        settings: outcome.settings,
        results: outcome.results,
        artifacts: Vec::new(),
        timings,
    };
    if !cli.dry_run {
        // The report lists itself among the artifacts.
        report.artifacts = ctx.out.artifacts();
        report.artifacts.push(report_name.clone());
        let text = serde_json::to_string_pretty(&report).expect("report serialises");
        ctx.out.write(&report_name, &text)?;
    }
    Ok(report)
}

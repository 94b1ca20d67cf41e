mod bench;
mod config;
mod error;
mod model;
mod pipeline;

use clap::{Parser, Subcommand};
use config::RunConfig;
use error::{CliError, CliResult, EXIT_CONFIG};
use model::Model;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Symbolic regression: fit, predict, benchmark and profile.
#[derive(Parser)]
#[command(name = "symreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model from a JSON run config.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV; overrides the config's "data".
        #[arg(long)]
        data: Option<PathBuf>,
        /// Target column; defaults to the last column.
        #[arg(long)]
        target: Option<String>,
        /// Model JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-generation run log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Per-replacement simplification log CSV (GP engine).
        #[arg(long)]
        simplify_log: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply a saved model to a CSV of features.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every config in a directory on every dataset for seeds 0..N.
    Bench {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Performance-profile curves from a bench results table.
    Profile {
        #[arg(long)]
        results: PathBuf,
        /// "max" or "median" across seeds.
        #[arg(long, default_value = "max")]
        agg: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn pick(flag: Option<PathBuf>, fallback: &Option<String>) -> Option<PathBuf> {
    flag.or_else(|| fallback.as_ref().map(PathBuf::from))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            config,
            data,
            target,
            out,
            log,
            simplify_log,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = pick(data, &cfg.data).ok_or_else(|| CliError::config("no dataset: pass --data or set \"data\""))?;
            let target = target.or_else(|| cfg.target.clone());
            let fit = pipeline::fit(&cfg, &data, target.as_deref())?;
            if let Some(p) = pick(out, &cfg.model_out) {
                fit.model.save(&p)?;
            }
            if let Some(p) = pick(log, &cfg.log_out) {
                write(&p, &fit.log_csv)?;
            }
            if let (Some(p), Some(text)) = (pick(simplify_log, &cfg.simplify_log_out), &fit.simplify_csv) {
                write(&p, text)?;
            }
            let m = &fit.model.metrics;
            println!("expression: {}", fit.model.to_value()?["expression"].as_str().unwrap_or_default());
            println!(
                "train_r2={} test_r2={} size={} complexity={} runtime_ms={}",
                m.train_r2.map_or("NA".into(), |v| v.to_string()),
                m.test_r2.map_or("NA".into(), |v| v.to_string()),
                fit.model.expression.size(),
                fit.model.expression.complexity(),
                fit.runtime_ms
            );
        }
        Command::Predict { model, data, out } => {
            let model = Model::load(&model)?;
            let (names, x) = pipeline::read_features(&data)?;
            let x = pipeline::align_features(&model, &names, &x)?;
            let pred = model.predict(&x)?;
            let mut text = String::from("prediction\n");
            for p in pred {
                text.push_str(&format!("{p}\n"));
            }
            write(&out, &text)?;
        }
        Command::Bench {
            configs,
            data,
            seeds,
            target,
            out,
        } => {
            let s = bench::bench(&configs, &data, seeds, target.as_deref(), &out)?;
            println!("ran {} runs, skipped {} completed", s.ran, s.skipped);
        }
        Command::Profile { results, agg, out } => {
            for c in bench::run_profile(&results, &agg, &out)? {
                println!("{}\tauc={:.6}\tdatasets={}", c.method, c.auc, c.n_datasets);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

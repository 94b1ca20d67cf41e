//! `bench` (configs × datasets × seeds → results table) and `profile`
//! (results table → per-method performance curves).

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::model::Model;
use crate::pipeline;
use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use symreg::profile::{profile, Aggregation, ProfileCurve, RunScore};

pub const RESULTS_HEADER: [&str; 11] = [
    "dataset",
    "method",
    "seed",
    "train_r2",
    "val_r2",
    "test_r2",
    "train_nmse",
    "test_nmse",
    "size",
    "complexity",
    "runtime_ms",
];

pub const CURVES_HEADER: &str = "method,n_datasets,auc,threshold,probability";

type Key = (String, String, u64);

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn result_row(dataset: &str, method: &str, model: &Model, runtime_ms: u128) -> Vec<String> {
    let m = &model.metrics;
    vec![
        dataset.to_string(),
        method.to_string(),
        model.seed.to_string(),
        cell(m.train_r2),
        cell(m.val_r2),
        cell(m.test_r2),
        cell(m.train_nmse),
        cell(m.test_nmse),
        model.expression.size().to_string(),
        model.expression.complexity().to_string(),
        runtime_ms.to_string(),
    ]
}

/// Files in `dir` with extension `ext`, sorted by name.
fn listing(dir: &Path, ext: &str, code: fn(String) -> CliError) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| code(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(code(format!("{}: no *.{ext} files", dir.display())));
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parse_results(text: &str, origin: &Path) -> CliResult<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", origin.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(CliError::data(format!("{}: not a results table", origin.display())));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| CliError::data(format!("{}: {e}", origin.display()))))
        .collect()
}

fn record_key(r: &csv::StringRecord) -> Option<Key> {
    Some((r.get(0)?.to_string(), r.get(1)?.to_string(), r.get(2)?.parse().ok()?))
}

/// Existing rows of `file`, read through the already-held lock.
fn read_locked(file: &mut File, path: &Path) -> CliResult<Vec<csv::StringRecord>> {
    let mut text = String::new();
    file.seek(SeekFrom::Start(0)).map_err(|e| CliError::io(path, e))?;
    file.read_to_string(&mut text).map_err(|e| CliError::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    parse_results(&text, path)
}

fn open_locked(path: &Path) -> CliResult<File> {
    let file = OpenOptions::new()
        .read(true)
        .write(true)
        .create(true)
        .truncate(false)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    file.lock().map_err(|e| CliError::io(path, e))?;
    Ok(file)
}

/// Appends one row, writing the header first if the file is empty.
fn append_row(path: &Path, row: &[String]) -> CliResult<()> {
    let mut file = open_locked(path)?;
    let empty = file.metadata().map_err(|e| CliError::io(path, e))?.len() == 0;
    file.seek(SeekFrom::End(0)).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    if empty {
        w.write_record(RESULTS_HEADER).expect("in-memory write");
    }
    w.write_record(row).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    file.write_all(&bytes).map_err(|e| CliError::io(path, e))?;
    file.sync_data().map_err(|e| CliError::io(path, e))
}

/// Rewrites the table sorted by (dataset, method, seed), dropping duplicate
/// keys (first occurrence wins).
fn sort_results(path: &Path) -> CliResult<()> {
    let mut file = open_locked(path)?;
    let rows = read_locked(&mut file, path)?;
    let mut keyed: Vec<(Key, csv::StringRecord)> = Vec::new();
    let mut seen = BTreeSet::new();
    for r in rows {
        let k = record_key(&r).ok_or_else(|| CliError::data(format!("{}: malformed row", path.display())))?;
        if seen.insert(k.clone()) {
            keyed.push((k, r));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for (_, r) in &keyed {
        w.write_record(r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    file.set_len(0).map_err(|e| CliError::io(path, e))?;
    file.seek(SeekFrom::Start(0)).map_err(|e| CliError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| CliError::io(path, e))?;
    file.sync_data().map_err(|e| CliError::io(path, e))
}

fn completed(path: &Path) -> CliResult<BTreeSet<Key>> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let mut file = open_locked(path)?;
    Ok(read_locked(&mut file, path)?.iter().filter_map(record_key).collect())
}

pub struct BenchSummary {
    pub ran: usize,
    pub skipped: usize,
}

/// Runs every (dataset, method, seed) not already present in `out`. The
/// method name is the config file stem; each config's seed is overridden.
pub fn bench(configs_dir: &Path, data_dir: &Path, seeds: u64, target: Option<&str>, out: &Path) -> CliResult<BenchSummary> {
    if seeds == 0 {
        return Err(CliError::config("--seeds must be at least 1"));
    }
    let configs: Vec<(String, RunConfig)> = listing(configs_dir, "json", CliError::config)?
        .iter()
        .map(|p| Ok((stem(p), RunConfig::load(p)?)))
        .collect::<CliResult<_>>()?;
    for (_, c) in &configs {
        match c.engine_kind()? {
            crate::config::EngineKind::Gp => c.engine_config().map(|_| ())?,
            crate::config::EngineKind::Itea => c.itea_config().map(|_| ())?,
        }
    }
    let datasets = listing(data_dir, "csv", CliError::data)?;
    let done = completed(out)?;
    let mut summary = BenchSummary { ran: 0, skipped: 0 };
    for data in &datasets {
        let dataset = stem(data);
        for (method, base) in &configs {
            for seed in 0..seeds {
                if done.contains(&(dataset.clone(), method.clone(), seed)) {
                    summary.skipped += 1;
                    continue;
                }
                let config = RunConfig { seed, ..base.clone() };
                let fit = pipeline::fit(&config, data, target)?;
                append_row(out, &result_row(&dataset, method, &fit.model, fit.runtime_ms))?;
                summary.ran += 1;
                eprintln!(
                    "{dataset} {method} seed={seed} test_r2={} ({} ms)",
                    cell(fit.model.metrics.test_r2),
                    fit.runtime_ms
                );
            }
        }
    }
    if out.exists() {
        sort_results(out)?;
    }
    Ok(summary)
}

/// Test R² per run; a blank cell (undefined score) counts as a failure.
pub fn read_scores(path: &Path) -> CliResult<Vec<RunScore>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_results(&text, path)?
        .iter()
        .map(|r| {
            let raw = r.get(5).unwrap_or_default();
            let r2 = if raw.is_empty() {
                f64::NAN
            } else {
                raw.parse::<f64>()
                    .map_err(|_| CliError::data(format!("{}: bad test_r2 {raw:?}", path.display())))?
            };
            Ok(RunScore {
                dataset: r.get(0).unwrap_or_default().to_string(),
                method: r.get(1).unwrap_or_default().to_string(),
                r2,
            })
        })
        .collect()
}

pub fn curves_csv(curves: &[ProfileCurve]) -> String {
    let mut s = format!("{CURVES_HEADER}\n");
    for c in curves {
        for (x, p) in c.thresholds.iter().zip(&c.probability) {
            s.push_str(&format!("{},{},{},{x},{p}\n", c.method, c.n_datasets, c.auc));
        }
    }
    s
}

pub fn run_profile(results: &Path, aggregation: &str, out: &Path) -> CliResult<Vec<ProfileCurve>> {
    let agg = Aggregation::from_name(aggregation)
        .ok_or_else(|| CliError::config(format!("unknown aggregation {aggregation:?}; use \"max\" or \"median\"")))?;
    let curves = profile(&read_scores(results)?, agg)?;
    std::fs::write(out, curves_csv(&curves)).map_err(|e| CliError::io(out, e))?;
    Ok(curves)
}

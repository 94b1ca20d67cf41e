//! Load → split → standardize → search → score, shared by `fit` and `bench`.

use crate::config::{EngineKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::model::{Expression, Metrics, Model};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;
use symreg::data::{load_csv, nmse, r2, Dataset, FeatureMatrix, Partition};
use symreg::engine::{GenerationLog, SimplificationRecord};
use symreg::itea::itea_run;

pub struct FitOutcome {
    pub model: Model,
    /// Run log CSV (header included).
    pub log_csv: String,
    /// Per-replacement simplification log CSV; GP only.
    pub simplify_csv: Option<String>,
    pub runtime_ms: u128,
}

fn finite(v: symreg::Result<f64>) -> Option<f64> {
    v.ok().filter(|x| x.is_finite())
}

fn score(expr: &Expression, data: &Dataset<f64>, part: Partition) -> CliResult<(Option<f64>, Option<f64>)> {
    let (x, y) = data.subset(part);
    if y.is_empty() {
        return Ok((None, None));
    }
    let pred = expr.predict(&x)?;
    Ok((finite(r2(&pred, &y)), finite(nmse(&pred, &y))))
}

pub fn fit(config: &RunConfig, data_path: &Path, target: Option<&str>) -> CliResult<FitOutcome> {
    let start = Instant::now();
    let kind = config.engine_kind()?;
    // validate before touching data so config mistakes exit with the config code
    let engine_cfg = match kind {
        EngineKind::Gp => Some(config.engine_config()?),
        EngineKind::Itea => None,
    };
    let itea_cfg = match kind {
        EngineKind::Itea => Some(config.itea_config()?),
        EngineKind::Gp => None,
    };
    let raw: Dataset<f64> = load_csv(data_path, target)?;
    // the IT engine has no use for a validation partition
    let val_fraction = if kind == EngineKind::Gp {
        config.validation_fraction
    } else {
        0.0
    };
    let raw = raw.split(config.test_fraction, val_fraction, config.seed)?;
    let stats = config.standardize.then(|| raw.standardization_stats());
    let data = match &stats {
        Some(s) => raw.standardized(s)?,
        None => raw.clone(),
    };

    let (expression, log_csv, simplify_csv) = match kind {
        EngineKind::Gp => {
            let run = symreg::engine::run(engine_cfg.as_ref().expect("gp config"), &data)?;
            if !run.best.train_loss.is_finite() {
                return Err(CliError::numeric("no individual has a finite training loss"));
            }
            let mut log = format!("{}\n", GenerationLog::CSV_HEADER);
            for g in &run.log {
                log.push_str(&g.csv_row());
                log.push('\n');
            }
            let mut simp = format!("{}\n", SimplificationRecord::CSV_HEADER);
            for r in &run.simplifications {
                simp.push_str(&r.csv_row());
                simp.push('\n');
            }
            (Expression::Tree(run.best.tree), log, Some(simp))
        }
        EngineKind::Itea => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let run = itea_run(itea_cfg.as_ref().expect("itea config"), &data, &mut rng)?;
            if !run.best_nmse.is_finite() {
                return Err(CliError::numeric("no expression has a finite training error"));
            }
            let mut log = String::from("generation,best_train_nmse\n");
            for (g, v) in run.history.iter().enumerate() {
                log.push_str(&format!("{g},{v}\n"));
            }
            (Expression::Itea(run.best), log, None)
        }
    };

    let (train_r2, train_nmse) = score(&expression, &data, Partition::Train)?;
    let (val_r2, _) = score(&expression, &data, Partition::Validation)?;
    let (test_r2, test_nmse) = score(&expression, &data, Partition::Test)?;
    let model = Model {
        expression,
        features: raw.feature_names.clone(),
        target: raw.target_name.clone(),
        standardization: stats,
        seed: config.seed,
        config_digest: config.digest(),
        metrics: Metrics {
            train_r2,
            val_r2,
            test_r2,
            train_nmse,
            test_nmse,
        },
    };
    Ok(FitOutcome {
        model,
        log_csv,
        simplify_csv,
        runtime_ms: start.elapsed().as_millis(),
    })
}

/// Reads a headed numeric CSV into (column names, matrix).
pub fn read_features(path: &Path) -> CliResult<(Vec<String>, FeatureMatrix<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::data(format!(
                        "{}: row {line}, column {:?}: cannot parse {cell:?} as a finite number",
                        path.display(),
                        headers[j]
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    let x = FeatureMatrix::from_rows(&rows, headers.len())?;
    Ok((headers, x))
}

/// Columns of `x` in the model's feature order: by name when every feature
/// name is present, otherwise positionally when the widths agree.
pub fn align_features(model: &Model, names: &[String], x: &FeatureMatrix<f64>) -> CliResult<FeatureMatrix<f64>> {
    let by_name: Option<Vec<usize>> = model
        .features
        .iter()
        .map(|f| names.iter().position(|n| n == f))
        .collect();
    if let Some(idx) = by_name {
        let cols = idx
            .iter()
            .map(|&j| x.column(j).expect("index from header").to_vec())
            .collect();
        return Ok(FeatureMatrix::from_columns(cols)?);
    }
    if x.ncols() == model.n_features() {
        return Ok(x.clone());
    }
    Err(CliError::data(format!(
        "feature-count mismatch: model expects {} features ({}), data has {} columns",
        model.n_features(),
        model.features.join(", "),
        x.ncols()
    )))
}

//! Datasets: CSV ingestion, partitioning, feature standardization and metrics.

mod matrix;
mod metrics;

pub use matrix::FeatureMatrix;
pub use metrics::{mse, nmse, r2};
pub(crate) use metrics::mse_unchecked;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Which partition a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// Features, target and per-row partition tags. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: FeatureMatrix<T>,
    pub target: Vec<T>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub partition: Vec<Partition>,
}

impl<T: Scalar> Dataset<T> {
    /// Wraps features and target; all rows start in the training partition.
    pub fn new(
        features: FeatureMatrix<T>,
        target: Vec<T>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::data(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                target.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::data("one name per feature column is required"));
        }
        if target.iter().any(|v| !v.is_finite())
            || features.columns().iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::data("dataset contains non-finite values"));
        }
        let rows = target.len();
        Ok(Self {
            features,
            target,
            feature_names,
            target_name: target_name.into(),
            partition: vec![Partition::Train; rows],
        })
    }

    /// Convenience constructor naming features `x0, x1, ...` and the target `y`.
    pub fn from_columns(columns: Vec<Vec<T>>, target: Vec<T>) -> Result<Self> {
        let names = (0..columns.len()).map(|i| format!("x{i}")).collect();
        Self::new(FeatureMatrix::from_columns(columns)?, target, names, "y")
    }

    pub fn nrows(&self) -> usize {
        self.target.len()
    }

    pub fn nfeatures(&self) -> usize {
        self.features.ncols()
    }

    pub fn rows_in(&self, part: Partition) -> Vec<usize> {
        self.partition
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| (p == part).then_some(i))
            .collect()
    }

    /// Features and target restricted to one partition, in row order.
    pub fn subset(&self, part: Partition) -> (FeatureMatrix<T>, Vec<T>) {
        let rows = self.rows_in(part);
        let y = rows.iter().map(|&i| self.target[i]).collect();
        (self.features.select_rows(&rows), y)
    }

    /// Tags rows as test / validation / train. `round(test_fraction * rows)`
    /// rows go to test; validation takes `round(validation_fraction * rest)`
    /// of the remainder. Deterministic for a seed.
    pub fn split(&self, test_fraction: f64, validation_fraction: f64, seed: u64) -> Result<Self> {
        let ok = |f: f64| (0.0..1.0).contains(&f);
        if !ok(test_fraction) || !ok(validation_fraction) || test_fraction + validation_fraction >= 1.0
        {
            return Err(Error::data(format!(
                "invalid split fractions test={test_fraction} validation={validation_fraction}"
            )));
        }
        let rows = self.nrows();
        let n_test = (test_fraction * rows as f64).round() as usize;
        let n_val = (validation_fraction * (rows - n_test) as f64).round() as usize;
        if test_fraction > 0.0 && n_test == 0 {
            return Err(Error::data("test partition would be empty"));
        }
        if validation_fraction > 0.0 && n_val == 0 {
            return Err(Error::data("validation partition would be empty"));
        }
        if n_test + n_val >= rows {
            return Err(Error::data("training partition would be empty"));
        }

        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut partition = vec![Partition::Train; rows];
        for &i in &order[..n_test] {
            partition[i] = Partition::Test;
        }
        for &i in &order[n_test..n_test + n_val] {
            partition[i] = Partition::Validation;
        }
        Ok(Self {
            partition,
            ..self.clone()
        })
    }

    /// Per-feature mean and standard deviation over the training rows.
    pub fn standardization_stats(&self) -> StandardizationStats {
        let rows = self.rows_in(Partition::Train);
        let n = T::from_usize_lossy(rows.len());
        let mut stats = StandardizationStats::default();
        for col in self.features.columns() {
            let mean = rows.iter().map(|&i| col[i]).sum::<T>() / n;
            let var = rows
                .iter()
                .map(|&i| (col[i] - mean) * (col[i] - mean))
                .sum::<T>()
                / n;
            let std = var.sqrt();
            let constant = !(std > T::lit(1e-12) * (T::one() + mean.abs()));
            stats.mean.push(mean.as_f64());
            stats.std.push(std.as_f64());
            stats.constant.push(constant);
        }
        stats
    }

    /// Returns a copy with features standardized by `stats`.
    pub fn standardized(&self, stats: &StandardizationStats) -> Result<Self> {
        Ok(Self {
            features: stats.apply(&self.features)?,
            ..self.clone()
        })
    }
}

/// Feature scaling learned on the training partition. Constant features are
/// passed through untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationStats {
    pub fn constant_features(&self) -> Vec<usize> {
        self.constant
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    pub fn apply<T: Scalar>(&self, x: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::data(format!(
                "standardization expects {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, col) in out.columns_mut().iter_mut().enumerate() {
            if self.constant[j] {
                continue;
            }
            let (m, s) = (T::lit(self.mean[j]), T::lit(self.std[j]));
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}

/// Reads a headed, comma-separated numeric file. `target` names the target
/// column; the last column is used when it is `None`.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, target: Option<&str>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.len() < 2 {
        return Err(Error::data("need at least one feature and a target column"));
    }
    let target_col = match target {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("target column {name:?} not found")))?,
        None => headers.len() - 1,
    };

    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::data(format!(
                    "row {line}, column {:?}: cannot parse {cell:?} as a finite number",
                    headers[j]
                ))
            })?;
            if j == target_col {
                y.push(T::lit(v));
            } else {
                row.push(T::lit(v));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data("no data rows"));
    }
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter_map(|(j, h)| (j != target_col).then(|| h.clone()))
        .collect();
    let features = FeatureMatrix::from_rows(&rows, names.len())?;
    Dataset::new(features, y, names, headers[target_col].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = write("x0,x1,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d: Dataset<f64> = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(d.nrows(), 3);
        assert_eq!(d.nfeatures(), 2);
        assert_eq!(d.target, vec![3.0, 6.0, 9.0]);
        assert_eq!(d.features.row(1), vec![4.0, 5.0]);
    }

    #[test]
    fn target_can_be_in_the_middle() {
        let f = write("a,y,b\n1,2,3\n4,5,6\n");
        let d: Dataset<f64> = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.target, vec![2.0, 5.0]);
        let d: Dataset<f64> = load_csv(f.path(), None).unwrap();
        assert_eq!(d.target_name, "b");
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let f = write("x0,x1,y\n1,abc,3\n");
        let msg = load_csv::<f64>(f.path(), Some("y")).unwrap_err().to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("\"x1\""), "{msg}");
    }

    #[test]
    fn header_only_is_an_error() {
        let f = write("x0,y\n");
        let msg = load_csv::<f64>(f.path(), None).unwrap_err().to_string();
        assert!(msg.contains("no data rows"), "{msg}");
    }

    #[test]
    fn missing_target_is_an_error() {
        let f = write("x0,y\n1,2\n");
        assert!(load_csv::<f64>(f.path(), Some("z")).is_err());
    }

    fn hundred_rows() -> Dataset<f64> {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        Dataset::from_columns(vec![x.clone()], x).unwrap()
    }

    #[test]
    fn split_sizes() {
        let d = hundred_rows().split(0.25, 0.25, 7).unwrap();
        assert_eq!(d.rows_in(Partition::Test).len(), 25);
        assert_eq!(d.rows_in(Partition::Validation).len(), 19);
        assert_eq!(d.rows_in(Partition::Train).len(), 56);
    }

    #[test]
    fn degenerate_split_is_all_train() {
        let d = hundred_rows().split(0.0, 0.0, 1).unwrap();
        assert_eq!(d.rows_in(Partition::Train).len(), 100);
    }

    #[test]
    fn split_is_deterministic() {
        let a = hundred_rows().split(0.3, 0.2, 42).unwrap();
        let b = hundred_rows().split(0.3, 0.2, 42).unwrap();
        let c = hundred_rows().split(0.3, 0.2, 43).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_ne!(a.partition, c.partition);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let d = hundred_rows();
        assert!(d.split(0.6, 0.5, 1).is_err());
        assert!(d.split(1.0, 0.0, 1).is_err());
        let tiny = Dataset::from_columns(vec![vec![1.0, 2.0]], vec![1.0, 2.0]).unwrap();
        assert!(tiny.split(0.1, 0.0, 1).is_err());
    }

    #[test]
    fn standardization_uses_train_rows_only() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 3.0 + 5.0).collect();
        let c = vec![2.0; 100];
        let d = Dataset::from_columns(vec![x, c], vec![0.0; 100])
            .unwrap()
            .split(0.25, 0.25, 3)
            .unwrap();
        let stats = d.standardization_stats();
        assert_eq!(stats.constant_features(), vec![1]);
        let s = d.standardized(&stats).unwrap();
        let (xt, _) = s.subset(Partition::Train);
        let col = xt.column(0).unwrap();
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-12);
        assert!(xt.column(1).unwrap().iter().all(|&v| v == 2.0));
    }
}

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column-major feature matrix. Tree evaluation works one column at a time,
/// so each feature is stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    columns: Vec<Vec<T>>,
    rows: usize,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn from_columns(columns: Vec<Vec<T>>) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(Error::data(format!(
                "column {j} has {} rows, expected {rows}",
                c.len()
            )));
        }
        Ok(Self { columns, rows })
    }

    /// Builds a matrix from row vectors; every row must have `ncols` entries.
    pub fn from_rows(rows: &[Vec<T>], ncols: usize) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); ncols];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::data(format!(
                    "row {i} has {} values, expected {ncols}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Ok(Self {
            columns,
            rows: rows.len(),
        })
    }

    /// A matrix with no features but a known row count (constant-only models).
    pub fn empty(rows: usize) -> Self {
        Self {
            columns: Vec::new(),
            rows,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn column(&self, j: usize) -> Option<&[T]> {
        self.columns.get(j).map(Vec::as_slice)
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.columns
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            rows: rows.len(),
        }
    }
}

use super::linalg::{qr_least_squares, QrSolve};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ridge strength used when the design matrix is rank deficient.
pub const RIDGE: f64 = 1e-8;

/// Design matrix (row-major, `rows × cols`) and response of a linear
/// least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<T> {
    design: Vec<T>,
    rows: usize,
    cols: usize,
    response: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(design: Vec<T>, rows: usize, cols: usize, response: Vec<T>) -> Result<Self> {
        if design.len() != rows * cols || response.len() != rows {
            return Err(Error::data("linear system dimensions do not match"));
        }
        Ok(Self {
            design,
            rows,
            cols,
            response,
        })
    }

    /// Builds `[1 | columns]`: an intercept column of ones followed by the
    /// given regressors. The coefficient vector is `(intercept, β_1, ..)`.
    pub fn with_intercept(columns: &[&[T]], response: &[T]) -> Result<Self> {
        let rows = response.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::data("regressor length differs from response"));
        }
        let cols = columns.len() + 1;
        let mut design = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            design.push(T::one());
            design.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(design, rows, cols, response.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `Φ β`.
    pub fn predict(&self, beta: &[T]) -> Vec<T> {
        self.design
            .chunks(self.cols)
            .map(|row| row.iter().zip(beta).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }

    pub fn design(&self) -> &[T] {
        &self.design
    }
}

/// Ordinary least squares by Householder QR. A rank-deficient design is
/// retried with a ridge term `RIDGE·I` (as an augmented system).
pub fn ols_fit<T: Scalar>(system: &LinearSystem<T>) -> Result<Vec<T>> {
    let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
    if !finite(&system.design) || !finite(&system.response) {
        return Err(Error::numeric("linear system has non-finite entries"));
    }
    let (rows, cols) = (system.rows, system.cols);
    let beta = match qr_least_squares(system.design.clone(), system.response.clone(), rows, cols) {
        QrSolve::Solved(beta) => beta,
        QrSolve::RankDeficient => {
            let root = T::lit(RIDGE).sqrt();
            let mut design = system.design.clone();
            let mut response = system.response.clone();
            for j in 0..cols {
                design.extend((0..cols).map(|k| if k == j { root } else { T::zero() }));
                response.push(T::zero());
            }
            match qr_least_squares(design, response, rows + cols, cols) {
                QrSolve::Solved(beta) => beta,
                QrSolve::RankDeficient => {
                    return Err(Error::numeric("design matrix is degenerate even with ridge"))
                }
            }
        }
    };
    if finite(&beta) {
        Ok(beta)
    } else {
        Err(Error::numeric("least-squares solution is not finite"))
    }
}

use crate::error::{Error, Result};
use crate::scalar::{population_variance, Scalar};

fn check_lengths<T>(yhat: &[T], y: &[T]) -> Result<()> {
    if yhat.len() != y.len() {
        return Err(Error::data(format!(
            "prediction length {} differs from target length {}",
            yhat.len(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::data("metrics need at least two samples"));
    }
    Ok(())
}

fn target_variance<T: Scalar>(y: &[T]) -> Result<T> {
    let var = population_variance(y);
    if var > T::zero() {
        Ok(var)
    } else {
        Err(Error::data("target has zero variance"))
    }
}

/// Mean squared error.
pub fn mse<T: Scalar>(yhat: &[T], y: &[T]) -> Result<T> {
    check_lengths(yhat, y)?;
    Ok(mse_unchecked(yhat, y))
}

pub(crate) fn mse_unchecked<T: Scalar>(yhat: &[T], y: &[T]) -> T {
    let sse: T = yhat.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
    sse / T::from_usize_lossy(y.len())
}

/// MSE normalized by the (population) variance of the target.
pub fn nmse<T: Scalar>(yhat: &[T], y: &[T]) -> Result<T> {
    check_lengths(yhat, y)?;
    Ok(mse_unchecked(yhat, y) / target_variance(y)?)
}

/// Coefficient of determination `1 - RSS/TSS`; unbounded below.
pub fn r2<T: Scalar>(yhat: &[T], y: &[T]) -> Result<T> {
    check_lengths(yhat, y)?;
    target_variance(y)?;
    let m = crate::scalar::mean(y);
    let rss: T = yhat.iter().zip(y).map(|(&a, &b)| (b - a) * (b - a)).sum();
    let tss: T = y.iter().map(|&b| (b - m) * (b - m)).sum();
    Ok(T::one() - rss / tss)
}

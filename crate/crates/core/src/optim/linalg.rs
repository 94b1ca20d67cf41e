//! Small dense solvers. Matrices are row-major slices.

use crate::scalar::Scalar;

/// Outcome of a Householder least-squares solve.
pub(crate) enum QrSolve<T> {
    Solved(Vec<T>),
    RankDeficient,
}

/// Least-squares solution of `a x ≈ b` for a `rows × cols` matrix with
/// `rows >= cols`, via Householder QR. Reports rank deficiency when a diagonal
/// entry of R is negligible relative to the largest one.
pub(crate) fn qr_least_squares<T: Scalar>(
    mut a: Vec<T>,
    mut b: Vec<T>,
    rows: usize,
    cols: usize,
) -> QrSolve<T> {
    debug_assert_eq!(a.len(), rows * cols);
    if rows < cols {
        return QrSolve::RankDeficient;
    }
    let mut diag = vec![T::zero(); cols];
    for k in 0..cols {
        let norm = (k..rows)
            .map(|i| a[i * cols + k] * a[i * cols + k])
            .sum::<T>()
            .sqrt();
        if norm == T::zero() {
            diag[k] = T::zero();
            continue;
        }
        let akk = a[k * cols + k];
        let alpha = if akk > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in place of column k.
        a[k * cols + k] = akk - alpha;
        let vnorm2: T = (k..rows).map(|i| a[i * cols + k] * a[i * cols + k]).sum();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in k + 1..cols {
                let dot: T = (k..rows).map(|i| a[i * cols + k] * a[i * cols + j]).sum();
                let s = two * dot / vnorm2;
                for i in k..rows {
                    let vik = a[i * cols + k];
                    a[i * cols + j] -= s * vik;
                }
            }
            let dot: T = (k..rows).map(|i| a[i * cols + k] * b[i]).sum();
            let s = two * dot / vnorm2;
            for i in k..rows {
                b[i] -= s * a[i * cols + k];
            }
        }
        diag[k] = alpha;
    }

    let largest = diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let tol = T::epsilon() * T::from_usize_lossy(rows.max(cols) * 10) * largest;
    if largest == T::zero() || diag.iter().any(|d| d.abs() <= tol) {
        return QrSolve::RankDeficient;
    }

    let mut x = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut acc = b[k];
        for j in k + 1..cols {
            acc -= a[k * cols + j] * x[j];
        }
        x[k] = acc / diag[k];
    }
    QrSolve::Solved(x)
}

/// Solves the symmetric positive-definite system `m x = rhs` (n × n) by
/// Cholesky factorization; `None` when `m` is not numerically positive definite.
pub(crate) fn cholesky_solve<T: Scalar>(m: &[T], rhs: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

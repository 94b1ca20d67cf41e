use super::linalg::cholesky_solve;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Levenberg-Marquardt settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Number of trial steps (accepted or rejected).
    pub max_iters: usize,
    pub initial_damping: f64,
    /// Stop when an accepted step improves the loss by less than this fraction.
    pub relative_tolerance: f64,
    /// Give up once damping grows past this.
    pub max_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            initial_damping: 1e-3,
            relative_tolerance: 1e-9,
            max_damping: 1e16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmFit<T> {
    pub params: Vec<T>,
    /// Sum of squared residuals at `params`.
    pub loss: T,
    pub iterations: usize,
    /// Loss at the start followed by the loss after each accepted step.
    pub accepted_losses: Vec<T>,
}

fn sum_squares<T: Scalar>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum()
}

/// Minimizes `‖residuals(θ)‖²` starting from `theta0`.
///
/// The Jacobian is taken by central differences with step
/// `√ε·(1 + |θ_i|)`. Each trial solves `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`;
/// a trial is accepted only if it strictly lowers the loss, after which
/// `λ` shrinks tenfold, otherwise it grows tenfold. The returned parameters
/// are always the best seen.
pub fn lm_fit<T, F>(residuals: F, theta0: &[T], config: &LmConfig) -> Result<LmFit<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
{
    lm_core(residuals, |r: &mut F, theta: &[T], n| jacobian(r, theta, n), theta0, config)
}

/// [`lm_fit`] with a caller-supplied Jacobian of the residuals (row-major
/// `n × p`) in place of finite differences.
pub fn lm_fit_with_jacobian<T, F, J>(residuals: F, mut jac: J, theta0: &[T], config: &LmConfig) -> Result<LmFit<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
    J: FnMut(&[T]) -> Vec<T>,
{
    lm_core(residuals, |_: &mut F, theta: &[T], _| jac(theta), theta0, config)
}

fn lm_core<T, F, J>(mut residuals: F, mut jac_of: J, theta0: &[T], config: &LmConfig) -> Result<LmFit<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
    J: FnMut(&mut F, &[T], usize) -> Vec<T>,
{
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("initial parameters are not finite"));
    }
    let mut theta = theta0.to_vec();
    let mut r = residuals(&theta);
    let mut loss = sum_squares(&r);
    if !loss.is_finite() {
        return Err(Error::numeric("residuals are not finite at the initial parameters"));
    }
    let mut fit = LmFit {
        params: theta.clone(),
        loss,
        iterations: 0,
        accepted_losses: vec![loss],
    };
    let p = theta.len();
    if p == 0 || config.max_iters == 0 {
        return Ok(fit);
    }

    let n = r.len();
    let mut lambda = T::lit(config.initial_damping);
    let max_damping = T::lit(config.max_damping);
    let tol = T::lit(config.relative_tolerance);
    let tiny = T::epsilon();
    let mut normal: Option<(Vec<T>, Vec<T>)> = None;

    while fit.iterations < config.max_iters {
        if normal.is_none() {
            let jac = jac_of(&mut residuals, &theta, n);
            if jac.len() != n * p {
                return Err(Error::numeric("Jacobian has the wrong shape"));
            }
            // A = JᵀJ, g = Jᵀr
            let mut a = vec![T::zero(); p * p];
            let mut g = vec![T::zero(); p];
            for i in 0..n {
                let row = &jac[i * p..(i + 1) * p];
                for j in 0..p {
                    g[j] += row[j] * r[i];
                    for k in 0..=j {
                        a[j * p + k] += row[j] * row[k];
                    }
                }
            }
            for j in 0..p {
                for k in 0..j {
                    a[k * p + j] = a[j * p + k];
                }
            }
            if g.iter().all(|&v| v == T::zero()) {
                break; // flat in every direction
            }
            normal = Some((a, g));
        }
        let (a, g) = normal.as_ref().expect("computed above");

        fit.iterations += 1;
        let mut damped = a.clone();
        for j in 0..p {
            damped[j * p + j] += lambda * a[j * p + j].max(tiny);
        }
        let neg_g: Vec<T> = g.iter().map(|&v| -v).collect();
        let accepted = cholesky_solve(&damped, &neg_g, p).and_then(|step| {
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + s).collect();
            let r_trial = residuals(&trial);
            let trial_loss = sum_squares(&r_trial);
            (trial_loss.is_finite() && trial_loss < loss).then_some((trial, r_trial, trial_loss))
        });

        match accepted {
            Some((trial, r_trial, trial_loss)) => {
                let improvement = (loss - trial_loss) / loss;
                theta = trial;
                r = r_trial;
                loss = trial_loss;
                fit.params.clone_from(&theta);
                fit.loss = loss;
                fit.accepted_losses.push(loss);
                lambda /= T::lit(10.0);
                normal = None;
                if loss == T::zero() || improvement < tol {
                    break;
                }
            }
            None => {
                lambda *= T::lit(10.0);
                if lambda > max_damping {
                    break;
                }
            }
        }
    }
    Ok(fit)
}

/// Central-difference Jacobian of the residuals, row-major `n × p`.
/// Non-finite difference quotients are treated as zero slope.
fn jacobian<T, F>(residuals: &mut F, theta: &[T], n: usize) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Vec<T>,
{
    let p = theta.len();
    let sqrt_eps = T::epsilon().sqrt();
    let mut jac = vec![T::zero(); n * p];
    let mut probe = theta.to_vec();
    for j in 0..p {
        let h = sqrt_eps * (T::one() + theta[j].abs());
        probe[j] = theta[j] + h;
        let plus = residuals(&probe);
        probe[j] = theta[j] - h;
        let minus = residuals(&probe);
        probe[j] = theta[j];
        let denom = (theta[j] + h) - (theta[j] - h);
        for i in 0..n.min(plus.len()).min(minus.len()) {
            let d = (plus[i] - minus[i]) / denom;
            jac[i * p + j] = if d.is_finite() { d } else { T::zero() };
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_problem() -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let y = x.iter().map(|v| (0.5 * v).exp()).collect();
        (x, y)
    }

    fn exp_residuals<'a>(x: &'a [f64], y: &'a [f64]) -> impl FnMut(&[f64]) -> Vec<f64> + 'a {
        move |t: &[f64]| x.iter().zip(y).map(|(xi, yi)| yi - (t[0] * xi).exp()).collect()
    }

    #[test]
    fn fits_exponential_rate() {
        let (x, y) = exp_problem();
        let fit = lm_fit(exp_residuals(&x, &y), &[0.4], &LmConfig::default()).unwrap();
        assert!((fit.params[0] - 0.5).abs() < 1e-4, "{:?}", fit.params);
        assert!(fit.iterations <= 10);
        for w in fit.accepted_losses.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let (x, y) = exp_problem();
        let fit = lm_fit(exp_residuals(&x, &y), &[0.5], &LmConfig::default()).unwrap();
        assert_eq!(fit.params, vec![0.5]);
        assert_eq!(fit.loss, fit.accepted_losses[0]);
    }

    #[test]
    fn constant_residual_stalls() {
        let fit = lm_fit(|_: &[f64]| vec![1.0, 2.0], &[3.0, -1.0], &LmConfig::default()).unwrap();
        assert_eq!(fit.params, vec![3.0, -1.0]);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let (x, y) = exp_problem();
        let cfg = LmConfig {
            max_iters: 0,
            ..LmConfig::default()
        };
        let fit = lm_fit(exp_residuals(&x, &y), &[0.1], &cfg).unwrap();
        assert_eq!(fit.params, vec![0.1]);
    }

    #[test]
    fn non_finite_start_is_numeric_failure() {
        let err = lm_fit(|_: &[f64]| vec![f64::NAN], &[1.0], &LmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NumericFailure(_)));
        let err = lm_fit(|_: &[f64]| vec![1.0], &[f64::INFINITY], &LmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NumericFailure(_)));
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = (0..20).map(|i| i as f32 / 19.0).collect();
        let y: Vec<f32> = x.iter().map(|v| (0.5 * v).exp()).collect();
        let res = |t: &[f32]| x.iter().zip(&y).map(|(xi, yi)| yi - (t[0] * xi).exp()).collect();
        let fit = lm_fit(res, &[0.4f32], &LmConfig::default()).unwrap();
        assert!((fit.params[0] - 0.5).abs() < 1e-2);
    }
}

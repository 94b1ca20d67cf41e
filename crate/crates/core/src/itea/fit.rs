use super::{ITEAConfig, ITExpression, ITTerm};
use crate::data::{mse, FeatureMatrix};
use crate::error::{Error, Result};
use crate::optim::{lm_fit, ols_fit, LinearSystem};
use crate::scalar::Scalar;
use rand::Rng;
use std::collections::HashMap;

/// Strategy for fitting an expression's intercept, coefficients and inner
/// shift/scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Heuristic {
    /// Coefficients by least squares, inner parameters fixed at `(0, 1)`.
    #[default]
    Ols,
    /// Everything jointly by Levenberg-Marquardt from a random start.
    Lm,
    /// Least-squares coefficients, random inner parameters, then joint LM.
    OlsLm,
    /// LM on each term's inner parameters, then least squares for the coefficients.
    LmOls,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [Heuristic::Ols, Heuristic::Lm, Heuristic::OlsLm, Heuristic::LmOls];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Ols => "OLS",
            Heuristic::Lm => "LM",
            Heuristic::OlsLm => "OLS+LM",
            Heuristic::LmOls => "LM+OLS",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|h| h.name().eq_ignore_ascii_case(name))
    }
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What happened during a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport<T> {
    /// Training MSE before fitting, at the fitter's starting point.
    pub initial_loss: T,
    /// Training MSE of the returned expression (`+inf` if not finite).
    pub loss: T,
    /// Whether neutral values had to be substituted.
    pub fallback: bool,
}

impl<T: Scalar> FitReport<T> {
    /// Worth memoizing: no numeric trouble and an actual improvement.
    pub fn succeeded(&self) -> bool {
        !self.fallback && self.loss.is_finite() && self.loss < self.initial_loss
    }
}

/// Replaces non-finite parameters by neutral values: a term with any
/// non-finite parameter gets coefficient 0, shift 0 and scale 1; a
/// non-finite intercept becomes 0. Returns whether anything changed.
pub fn neutral_fallback<T: Scalar>(expr: &mut ITExpression<T>) -> bool {
    let mut changed = false;
    if !expr.intercept.is_finite() {
        expr.intercept = T::zero();
        changed = true;
    }
    for (t, c) in expr.terms.iter_mut().zip(expr.coefs.iter_mut()) {
        if !(c.is_finite() && t.shift.is_finite() && t.scale.is_finite()) {
            *c = T::zero();
            t.shift = T::zero();
            t.scale = T::one();
            changed = true;
        }
    }
    changed
}

/// Per distinct `(g, k)` parameters; duplicates share one set.
struct Unique<T> {
    terms: Vec<ITTerm<T>>,
    interactions: Vec<Vec<T>>,
    /// For every original term, its unique index and whether it is the first copy.
    map: Vec<(usize, bool)>,
}

impl<T: Scalar> Unique<T> {
    fn new(expr: &ITExpression<T>, x: &FeatureMatrix<T>) -> Self {
        let mut seen: HashMap<(super::Transform, Vec<i32>), usize> = HashMap::new();
        let mut terms = Vec::new();
        let mut map = Vec::with_capacity(expr.terms.len());
        for t in &expr.terms {
            let key = (t.transform, t.strengths.clone());
            match seen.get(&key) {
                Some(&u) => map.push((u, false)),
                None => {
                    seen.insert(key, terms.len());
                    map.push((terms.len(), true));
                    terms.push(ITTerm::new(t.transform, t.strengths.clone()));
                }
            }
        }
        let interactions = terms.iter().map(|t| t.interaction(x)).collect();
        Self {
            terms,
            interactions,
            map,
        }
    }

    fn len(&self) -> usize {
        self.terms.len()
    }

    /// Writes unique parameters back onto the original term list. The first
    /// copy of a duplicated tuple carries the coefficient, later copies get 0.
    fn assemble(&self, original: &ITExpression<T>, intercept: T, coefs: &[T]) -> ITExpression<T> {
        let mut out = original.clone();
        out.intercept = intercept;
        for (i, &(u, first)) in self.map.iter().enumerate() {
            out.terms[i].shift = self.terms[u].shift;
            out.terms[i].scale = self.terms[u].scale;
            out.coefs[i] = if first { coefs[u] } else { T::zero() };
        }
        out
    }
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Least squares on `[1 | columns]`. Columns that are not finite everywhere
/// are left out and get coefficient 0.
fn ols_columns<T: Scalar>(columns: &[Vec<T>], y: &[T]) -> Result<(T, Vec<T>)> {
    let usable: Vec<usize> = (0..columns.len()).filter(|&i| all_finite(&columns[i])).collect();
    let cols: Vec<&[T]> = usable.iter().map(|&i| columns[i].as_slice()).collect();
    let beta = ols_fit(&LinearSystem::with_intercept(&cols, y)?)?;
    let mut coefs = vec![T::zero(); columns.len()];
    for (k, &i) in usable.iter().enumerate() {
        coefs[i] = beta[k + 1];
    }
    Ok((beta[0], coefs))
}

/// Intercept and slope of `y ~ a + b·c`; the slope is 0 for a constant column.
fn simple_regression<T: Scalar>(c: &[T], y: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(y.len());
    let mc = c.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&ci, &yi) in c.iter().zip(y) {
        sxy += (ci - mc) * (yi - my);
        sxx += (ci - mc) * (ci - mc);
    }
    if sxx > T::zero() {
        let b = sxy / sxx;
        (my - b * mc, b)
    } else {
        (my, T::zero())
    }
}

fn columns<T: Scalar>(u: &Unique<T>) -> Vec<Vec<T>> {
    u.terms.iter().zip(&u.interactions).map(|(t, p)| t.apply(p)).collect()
}

fn loss_of<T: Scalar>(expr: &ITExpression<T>, x: &FeatureMatrix<T>, y: &[T]) -> T {
    let pred = super::it_evaluate(expr, x).expect("width checked before fitting");
    let l = mse(&pred, y).unwrap_or_else(|_| T::infinity());
    if l.is_finite() {
        l
    } else {
        T::infinity()
    }
}

/// Packs `[b0, (b, th0, th1) per unique term]`.
fn pack<T: Scalar>(intercept: T, coefs: &[T], u: &Unique<T>) -> Vec<T> {
    let mut p = vec![intercept];
    for (t, &c) in u.terms.iter().zip(coefs) {
        p.extend([c, t.shift, t.scale]);
    }
    p
}

fn unpack<T: Scalar>(p: &[T], u: &mut Unique<T>) -> (T, Vec<T>) {
    let mut coefs = Vec::with_capacity(u.len());
    for (i, t) in u.terms.iter_mut().enumerate() {
        coefs.push(p[1 + 3 * i]);
        t.shift = p[2 + 3 * i];
        t.scale = p[3 + 3 * i];
    }
    (p[0], coefs)
}

fn joint_residuals<'a, T: Scalar>(u: &'a Unique<T>, y: &'a [T]) -> impl FnMut(&[T]) -> Vec<T> + 'a {
    move |p: &[T]| {
        let mut r: Vec<T> = y.iter().map(|&v| v - p[0]).collect();
        for (i, (t, inter)) in u.terms.iter().zip(&u.interactions).enumerate() {
            let (c, s0, s1) = (p[1 + 3 * i], p[2 + 3 * i], p[3 + 3 * i]);
            if c == T::zero() {
                continue;
            }
            for (ri, &pi) in r.iter_mut().zip(inter) {
                *ri -= c * t.transform.apply(s0 + s1 * pi);
            }
        }
        r
    }
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, range: f64) -> T {
    T::lit(if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 })
}

/// Fits the parameters of `expr` on `(x, y)` with `heuristic`. The structure
/// (transformations and strengths) is never changed. Terms that share a
/// `(g, k)` tuple are fitted once; the first copy carries the coefficient.
///
/// On numeric failure every parameter is reset to its neutral value and the
/// report says so.
pub fn fit_heuristic<T: Scalar, R: Rng + ?Sized>(
    expr: &ITExpression<T>,
    x: &FeatureMatrix<T>,
    y: &[T],
    heuristic: Heuristic,
    config: &ITEAConfig,
    rng: &mut R,
) -> Result<(ITExpression<T>, FitReport<T>)> {
    expr.check_width(x.ncols())?;
    if y.len() != x.nrows() || y.is_empty() {
        return Err(Error::data("training partition is empty or mismatched"));
    }
    let mut u = Unique::new(expr, x);
    let neutral = ITExpression::new(expr.terms.iter().map(|t| ITTerm::new(t.transform, t.strengths.clone())).collect());

    let attempt = |u: &mut Unique<T>, rng: &mut R| -> Result<(ITExpression<T>, T)> {
        match heuristic {
            Heuristic::Ols => {
                let (b0, coefs) = ols_columns(&columns(u), y)?;
                Ok((u.assemble(expr, b0, &coefs), loss_of(&neutral, x, y)))
            }
            Heuristic::Lm => {
                let init: Vec<T> = (0..1 + 3 * u.len()).map(|_| uniform(rng, config.init_range)).collect();
                let start = {
                    let (b0, c) = unpack(&init, u);
                    loss_of(&u.assemble(expr, b0, &c), x, y)
                };
                let fit = lm_fit(joint_residuals(u, y), &init, &config.lm)?;
                let (b0, coefs) = unpack(&fit.params, u);
                Ok((u.assemble(expr, b0, &coefs), start))
            }
            Heuristic::OlsLm => {
                let (b0, coefs) = ols_columns(&columns(u), y)?;
                for t in u.terms.iter_mut() {
                    t.shift = uniform(rng, config.init_range);
                    t.scale = uniform(rng, config.init_range);
                }
                let init = pack(b0, &coefs, u);
                let start = loss_of(&u.assemble(expr, b0, &coefs), x, y);
                let fit = lm_fit(joint_residuals(u, y), &init, &config.lm)?;
                let (b0, coefs) = unpack(&fit.params, u);
                Ok((u.assemble(expr, b0, &coefs), start))
            }
            Heuristic::LmOls => {
                for i in 0..u.len() {
                    let (g, inter) = (u.terms[i].transform, &u.interactions[i]);
                    let residuals = |th: &[T]| {
                        let c: Vec<T> = inter.iter().map(|&p| g.apply(th[0] + th[1] * p)).collect();
                        let (a, b) = simple_regression(&c, y);
                        y.iter().zip(&c).map(|(&yi, &ci)| yi - a - b * ci).collect::<Vec<T>>()
                    };
                    // A term undefined at (0, 1) keeps its neutral inner parameters.
                    if let Ok(fit) = lm_fit(residuals, &[T::zero(), T::one()], &config.lm) {
                        u.terms[i].shift = fit.params[0];
                        u.terms[i].scale = fit.params[1];
                    }
                }
                // Plain least squares at (0, 1) is a feasible point of this
                // heuristic; keep it if the per-term fits led somewhere worse.
                let fresh = Unique::new(expr, x);
                let (p0, pc) = ols_columns(&columns(&fresh), y)?;
                let plain = fresh.assemble(expr, p0, &pc);
                let start = loss_of(&neutral, x, y);
                match ols_columns(&columns(u), y) {
                    Ok((b0, coefs)) => {
                        let composite = u.assemble(expr, b0, &coefs);
                        if loss_of(&composite, x, y) <= loss_of(&plain, x, y) {
                            return Ok((composite, start));
                        }
                        Ok((plain, start))
                    }
                    Err(_) => Ok((plain, start)),
                }
            }
        }
    };

    let (mut fitted, initial_loss, mut fallback) = match attempt(&mut u, rng) {
        Ok((e, start)) => (e, start, false),
        Err(Error::NumericFailure(_)) => (neutral.clone(), T::infinity(), true),
        Err(e) => return Err(e),
    };
    fallback |= neutral_fallback(&mut fitted);
    let loss = loss_of(&fitted, x, y);
    Ok((
        fitted,
        FitReport {
            initial_loss,
            loss,
            fallback,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{it_evaluate, Transform};
    use super::*;
    use crate::data::nmse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> (FeatureMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0: Vec<f64> = (0..60).map(|_| rng.random_range(0.5..3.0)).collect();
        let x1: Vec<f64> = (0..60).map(|_| rng.random_range(0.5..3.0)).collect();
        let y = x0
            .iter()
            .zip(&x1)
            .map(|(&a, &b)| 1.5 + 2.0 * (a * b).sin() - 0.5 * (a * a).sqrt() / b)
            .collect();
        (FeatureMatrix::from_columns(vec![x0, x1]).unwrap(), y)
    }

    fn realizable() -> ITExpression<f64> {
        ITExpression::new(vec![
            ITTerm::new(Transform::Sin, vec![1, 1]),
            ITTerm::new(Transform::Sqrt, vec![2, -2]),
            ITTerm::new(Transform::Exp, vec![0, 1]),
        ])
    }

    #[test]
    fn ols_on_realizable_structure_is_exact() {
        let (x, y) = data();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (fit, report) = fit_heuristic(&realizable(), &x, &y, Heuristic::Ols, &ITEAConfig::default(), &mut rng).unwrap();
        let pred = it_evaluate(&fit, &x).unwrap();
        assert!(nmse(&pred, &y).unwrap() < 1e-10);
        assert!(report.succeeded());
        assert_eq!(fit.key(), realizable().key());
    }

    #[test]
    fn lm_ols_no_worse_than_ols() {
        let (x, y) = data();
        let cfg = ITEAConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let e: ITExpression<f64> = super::super::random_expression(2, &cfg, &mut rng);
            let (a, ra) = fit_heuristic(&e, &x, &y, Heuristic::Ols, &cfg, &mut rng).unwrap();
            let (b, rb) = fit_heuristic(&e, &x, &y, Heuristic::LmOls, &cfg, &mut rng).unwrap();
            assert!(rb.loss <= ra.loss + 1e-8, "{} vs {}", rb.loss, ra.loss);
            assert_eq!(a.key(), b.key());
        }
    }

    #[test]
    fn lm_with_zero_iterations_returns_initialization() {
        let (x, y) = data();
        let cfg = ITEAConfig {
            lm: crate::optim::LmConfig {
                max_iters: 0,
                ..Default::default()
            },
            init_range: 1.0,
            ..Default::default()
        };
        let e = ITExpression::new(vec![
            ITTerm::new(Transform::Id, vec![1, 0]),
            ITTerm::new(Transform::Sin, vec![0, 1]),
        ]);
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let (fit, report) = fit_heuristic(&e, &x, &y, Heuristic::Lm, &cfg, &mut a).unwrap();
        let want: Vec<f64> = (0..7).map(|_| b.random_range(-1.0..=1.0)).collect();
        assert_eq!(fit.parameters(), want);
        assert!(!report.fallback);
    }

    #[test]
    fn heuristics_keep_structure() {
        let (x, y) = data();
        let cfg = ITEAConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for h in Heuristic::ALL {
            let e: ITExpression<f64> = super::super::random_expression(2, &cfg, &mut rng);
            let (fit, _) = fit_heuristic(&e, &x, &y, h, &cfg, &mut rng).unwrap();
            assert_eq!(fit.key(), e.key());
            assert_eq!(fit.len(), e.len());
            assert!(fit.is_finite());
        }
    }

    #[test]
    fn duplicates_share_one_coefficient() {
        let (x, y) = data();
        let t = ITTerm::new(Transform::Sin, vec![1, 1]);
        let e = ITExpression::new(vec![t.clone(), ITTerm::new(Transform::Id, vec![1, 0]), t]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (fit, _) = fit_heuristic(&e, &x, &y, Heuristic::Ols, &ITEAConfig::default(), &mut rng).unwrap();
        assert_ne!(fit.coefs[0], 0.0);
        assert_eq!(fit.coefs[2], 0.0);
    }

    #[test]
    fn undefined_terms_get_neutral_coefficient() {
        let x = FeatureMatrix::from_columns(vec![vec![-1.0f64, 2.0, 3.0, -4.0]]).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let e = ITExpression::new(vec![ITTerm::new(Transform::Log, vec![1]), ITTerm::new(Transform::Id, vec![1])]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (fit, report) = fit_heuristic(&e, &x, &y, Heuristic::Ols, &ITEAConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.coefs[0], 0.0);
        assert!(report.loss.is_finite());
    }

    #[test]
    fn neutral_fallback_rules() {
        let mut e = ITExpression {
            terms: vec![ITTerm::new(Transform::Id, vec![1]), ITTerm::new(Transform::Sin, vec![1])],
            coefs: vec![f64::INFINITY, 2.0],
            intercept: f64::NAN,
        };
        e.terms[1].scale = f64::NAN;
        assert!(neutral_fallback(&mut e));
        assert_eq!(e.coefs, vec![0.0, 0.0]);
        assert_eq!((e.terms[1].shift, e.terms[1].scale), (0.0, 1.0));
        assert_eq!(e.intercept, 0.0);
        let mut ok = e.clone();
        assert!(!neutral_fallback(&mut ok));
        assert_eq!(ok, e);
    }

    #[test]
    fn heuristic_names() {
        for h in Heuristic::ALL {
            assert_eq!(Heuristic::from_name(h.name()), Some(h));
        }
    }
}

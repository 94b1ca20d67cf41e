//! Interaction-Transformation expressions and the evolutionary search over them.
//!
//! An expression is `b0 + Σ b_i·g_i(th0_i + th1_i·Π_j x_j^k_ij)`. Evolution
//! decides the transformations `g` and integer strengths `k`; the intercept,
//! coefficients and inner shift/scale are left to a fitting heuristic.

mod fit;
mod mutate;
mod run;

pub use fit::{fit_heuristic, neutral_fallback, FitReport, Heuristic};
pub use mutate::{mutate, mutate_with, random_expression, random_strengths, random_term, Mutation};
pub use run::{itea_run, ItRun};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::expr::fmt_float;
use crate::optim::LmConfig;
use crate::scalar::Scalar;
use std::fmt;

/// Outer function applied to an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transform {
    Id,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Log,
    Exp,
    Abs,
}

impl Transform {
    pub const ALL: [Transform; 8] = [
        Transform::Id,
        Transform::Sin,
        Transform::Cos,
        Transform::Tan,
        Transform::Sqrt,
        Transform::Log,
        Transform::Exp,
        Transform::Abs,
    ];

    /// Plain (unprotected) semantics: `sqrt` and `log` of negatives give NaN.
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Transform::Id => v,
            Transform::Sin => v.sin(),
            Transform::Cos => v.cos(),
            Transform::Tan => v.tan(),
            Transform::Sqrt => v.sqrt(),
            Transform::Log => v.ln(),
            Transform::Exp => v.exp(),
            Transform::Abs => v.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Id => "id",
            Transform::Sin => "sin",
            Transform::Cos => "cos",
            Transform::Tan => "tan",
            Transform::Sqrt => "sqrt",
            Transform::Log => "log",
            Transform::Exp => "exp",
            Transform::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Transform::Id),
            _ => Self::ALL.into_iter().find(|t| t.name() == name),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One `(g, k)` tuple with its inner shift `th0` and scale `th1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ITTerm<T> {
    pub transform: Transform,
    pub strengths: Vec<i32>,
    pub shift: T,
    pub scale: T,
}

impl<T: Scalar> ITTerm<T> {
    /// A term with neutral inner parameters `(0, 1)`.
    pub fn new(transform: Transform, strengths: Vec<i32>) -> Self {
        Self {
            transform,
            strengths,
            shift: T::zero(),
            scale: T::one(),
        }
    }

    pub fn nonzero(&self) -> usize {
        self.strengths.iter().filter(|&&k| k != 0).count()
    }

    /// `Π_j x_j^k_j` for every row.
    pub fn interaction(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        let mut out = vec![T::one(); x.nrows()];
        for (j, &k) in self.strengths.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let col = x.column(j).expect("strength vector checked against width");
            for (o, &v) in out.iter_mut().zip(col) {
                *o *= v.powi(k);
            }
        }
        out
    }

    /// `g(th0 + th1·p)` for a precomputed interaction `p`.
    pub fn apply(&self, interaction: &[T]) -> Vec<T> {
        interaction
            .iter()
            .map(|&p| self.transform.apply(self.shift + self.scale * p))
            .collect()
    }

    fn key(&self) -> (Transform, Vec<i32>) {
        (self.transform, self.strengths.clone())
    }
}

/// The canonical identity of an expression's structure: its `(g, k)`
/// tuples as a sorted multiset, so term order does not matter.
pub type ItKey = Vec<(Transform, Vec<i32>)>;

/// `b0 + Σ b_i·term_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ITExpression<T> {
    pub terms: Vec<ITTerm<T>>,
    pub coefs: Vec<T>,
    pub intercept: T,
}

impl<T: Scalar> ITExpression<T> {
    /// Terms with neutral parameters: zero coefficients and intercept.
    pub fn new(terms: Vec<ITTerm<T>>) -> Self {
        let coefs = vec![T::zero(); terms.len()];
        Self {
            terms,
            coefs,
            intercept: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn key(&self) -> ItKey {
        let mut k: ItKey = self.terms.iter().map(ITTerm::key).collect();
        k.sort();
        k
    }

    /// Every parameter, finite or not, in the order intercept, then per term
    /// `(coef, shift, scale)`.
    pub fn parameters(&self) -> Vec<T> {
        let mut p = vec![self.intercept];
        for (t, &c) in self.terms.iter().zip(&self.coefs) {
            p.extend([c, t.shift, t.scale]);
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_width(&self, n: usize) -> Result<()> {
        if self.coefs.len() != self.terms.len() {
            return Err(Error::Structure("one coefficient per term is required".into()));
        }
        if let Some(t) = self.terms.iter().find(|t| t.strengths.len() != n) {
            return Err(Error::Structure(format!(
                "term has {} strengths but the data has {n} features",
                t.strengths.len()
            )));
        }
        Ok(())
    }
}

/// Predictions of `expr` on `x`. Non-finite values propagate, except that a
/// term whose coefficient is exactly zero is skipped: zero is the neutral
/// coefficient, so such a term contributes nothing even where it is undefined.
pub fn it_evaluate<T: Scalar>(expr: &ITExpression<T>, x: &FeatureMatrix<T>) -> Result<Vec<T>> {
    expr.check_width(x.ncols())?;
    let mut out = vec![expr.intercept; x.nrows()];
    for (term, &c) in expr.terms.iter().zip(&expr.coefs) {
        if c == T::zero() {
            continue;
        }
        let col = term.apply(&term.interaction(x));
        for (o, v) in out.iter_mut().zip(col) {
            *o += c * v;
        }
    }
    Ok(out)
}

fn num<T: Scalar>(v: T) -> String {
    fmt_float(v.as_f64()).unwrap_or_else(|| v.as_f64().to_string())
}

impl<T: Scalar> fmt::Display for ITExpression<T> {
    /// `b0 + b1*g1(th0 + th1*x0^k0*x2^k2) + ...` with 17 significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", num(self.intercept))?;
        for (t, &c) in self.terms.iter().zip(&self.coefs) {
            write!(f, " + {}*{}({} + {}", num(c), t.transform, num(t.shift), num(t.scale))?;
            for (j, &k) in t.strengths.iter().enumerate() {
                if k != 0 {
                    write!(f, "*x{j}^{k}")?;
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ITEAConfig {
    pub popsize: usize,
    pub gens: usize,
    /// Inclusive bounds on each strength.
    pub strength_bounds: (i32, i32),
    /// Inclusive bounds on the number of terms.
    pub terms_bounds: (usize, usize),
    pub max_nonzero_strengths: usize,
    pub transforms: Vec<Transform>,
    pub heuristic: Heuristic,
    pub tournament_size: usize,
    pub lm: LmConfig,
    pub cache_capacity: usize,
    /// Random parameter initialization draws from `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for ITEAConfig {
    fn default() -> Self {
        Self {
            popsize: 250,
            gens: 400,
            strength_bounds: (-3, 3),
            terms_bounds: (2, 15),
            max_nonzero_strengths: 2,
            transforms: Transform::ALL.to_vec(),
            heuristic: Heuristic::Ols,
            tournament_size: 3,
            lm: LmConfig::default(),
            cache_capacity: 10_000,
            init_range: 100.0,
        }
    }
}

impl ITEAConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.strength_bounds;
        if lo > hi {
            return Err(Error::config("strength bounds are reversed"));
        }
        let (tmin, tmax) = self.terms_bounds;
        if tmin < 1 || tmin > tmax {
            return Err(Error::config("terms bounds must satisfy 1 <= min <= max"));
        }
        if self.max_nonzero_strengths == 0 {
            return Err(Error::config("max_nonzero_strengths must be at least 1"));
        }
        if lo == 0 && hi == 0 {
            return Err(Error::config("strength bounds admit only zero"));
        }
        if self.transforms.is_empty() {
            return Err(Error::config("no transformation functions"));
        }
        if self.popsize == 0 {
            return Err(Error::config("population size must be positive"));
        }
        if self.tournament_size < 1 {
            return Err(Error::config("tournament size must be positive"));
        }
        if !(self.init_range >= 0.0) {
            return Err(Error::config("init_range must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> FeatureMatrix<f64> {
        FeatureMatrix::from_columns(vec![vec![2.0], vec![3.0]]).unwrap()
    }

    #[test]
    fn single_term_hand_value() {
        let e = ITExpression {
            terms: vec![ITTerm::new(Transform::Id, vec![1, 1])],
            coefs: vec![2.0],
            intercept: 1.0,
        };
        assert_eq!(it_evaluate(&e, &xs()).unwrap(), vec![13.0]);
    }

    #[test]
    fn zero_strengths_are_constant() {
        let x = FeatureMatrix::from_columns(vec![vec![1.0, -4.0, 9.5], vec![0.0, 2.0, 7.0]]).unwrap();
        let mut t = ITTerm::new(Transform::Sin, vec![0, 0]);
        t.shift = 0.3;
        t.scale = 2.0;
        let e = ITExpression {
            terms: vec![t],
            coefs: vec![1.5],
            intercept: -1.0,
        };
        let want = -1.0 + 1.5 * (0.3f64 + 2.0).sin();
        assert_eq!(it_evaluate(&e, &x).unwrap(), vec![want; 3]);
    }

    #[test]
    fn key_ignores_term_order() {
        let a = ITTerm::<f64>::new(Transform::Sin, vec![1, 0]);
        let b = ITTerm::<f64>::new(Transform::Log, vec![0, 2]);
        let e1 = ITExpression::new(vec![a.clone(), b.clone()]);
        let e2 = ITExpression::new(vec![b, a]);
        assert_eq!(e1.key(), e2.key());
    }

    #[test]
    fn width_mismatch_is_structural() {
        let e = ITExpression::<f64>::new(vec![ITTerm::new(Transform::Id, vec![1])]);
        assert!(matches!(it_evaluate(&e, &xs()), Err(Error::Structure(_))));
    }

    #[test]
    fn renders_text() {
        let e = ITExpression {
            terms: vec![ITTerm::new(Transform::Sqrt, vec![1, -2])],
            coefs: vec![2.0],
            intercept: 0.5,
        };
        assert_eq!(
            e.to_string(),
            "5.0000000000000000e-1 + 2.0000000000000000e0*sqrt(0.0000000000000000e0 + 1.0000000000000000e0*x0^1*x1^-2)"
        );
    }

    #[test]
    fn transform_names() {
        for t in Transform::ALL {
            assert_eq!(Transform::from_name(t.name()), Some(t));
        }
        assert_eq!(Transform::from_name("identity"), Some(Transform::Id));
    }
}

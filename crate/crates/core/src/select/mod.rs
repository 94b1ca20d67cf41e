//! Parent selection: tournaments and the epsilon-lexicase family.

mod lexicase;
mod threshold;

pub use lexicase::{select_parent, Selection, Selector};
pub use threshold::{mad, mvt, mvt_weighted, Split};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Which selection scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectorKind {
    Tournament,
    LexMadStatic,
    LexMadSemi,
    LexMadDynamic,
    LexMvtStatic,
    LexMvtDynamic,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 6] = [
        SelectorKind::Tournament,
        SelectorKind::LexMadStatic,
        SelectorKind::LexMadSemi,
        SelectorKind::LexMadDynamic,
        SelectorKind::LexMvtStatic,
        SelectorKind::LexMvtDynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Tournament => "tournament",
            SelectorKind::LexMadStatic => "lex-mad-static",
            SelectorKind::LexMadSemi => "lex-mad-semi",
            SelectorKind::LexMadDynamic => "lex-mad-dynamic",
            SelectorKind::LexMvtStatic => "lex-mvt-static",
            SelectorKind::LexMvtDynamic => "lex-mvt-dynamic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the two sides of an MVT split are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MvtWeighting {
    /// `Var(l)/|l| + Var(r)/|r|`.
    #[default]
    PerSize,
    /// `|l|·Var(l) + |r|·Var(r)`, the usual within-group sum of squares.
    BySize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorConfig {
    pub kind: SelectorKind,
    pub tournament_size: usize,
    /// Replaces the MAD epsilon by a fixed value (MAD variants only).
    pub fixed_epsilon: Option<f64>,
    pub mvt_weighting: MvtWeighting,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            kind: SelectorKind::LexMadSemi,
            tournament_size: 3,
            fixed_epsilon: None,
            mvt_weighting: MvtWeighting::PerSize,
        }
    }
}

impl SelectorConfig {
    pub fn new(kind: SelectorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tournament_size < 2 {
            return Err(Error::config("tournament size must be at least 2"));
        }
        if matches!(self.fixed_epsilon, Some(e) if !(e >= 0.0)) {
            return Err(Error::config("fixed epsilon must be non-negative"));
        }
        Ok(())
    }
}

/// Absolute errors laid out case-major: `get(case, individual)`.
/// Non-finite errors are stored as `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix<T> {
    cases: Vec<Vec<T>>,
    individuals: usize,
}

impl<T: Scalar> ErrorMatrix<T> {
    /// From rows of `errors[case][individual]`.
    pub fn new(cases: Vec<Vec<T>>) -> Result<Self> {
        let individuals = cases.first().map_or(0, Vec::len);
        if cases.iter().any(|c| c.len() != individuals) {
            return Err(Error::data("error matrix rows differ in length"));
        }
        let cases = cases
            .into_iter()
            .map(|c| c.into_iter().map(sanitize).collect())
            .collect();
        Ok(Self { cases, individuals })
    }

    /// `|prediction - target|` for each individual's prediction vector.
    pub fn from_predictions(predictions: &[Vec<T>], target: &[T]) -> Result<Self> {
        if predictions.iter().any(|p| p.len() != target.len()) {
            return Err(Error::data("prediction length differs from target length"));
        }
        let cases = (0..target.len())
            .map(|t| predictions.iter().map(|p| (p[t] - target[t]).abs()).collect())
            .collect();
        Self::new(cases)
    }

    pub fn n_cases(&self) -> usize {
        self.cases.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals
    }

    pub fn case(&self, t: usize) -> &[T] {
        &self.cases[t]
    }

    pub fn get(&self, case: usize, individual: usize) -> T {
        self.cases[case][individual]
    }

    /// Mean squared error of each individual across all cases.
    pub fn mean_squared(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.cases.len().max(1));
        (0..self.individuals)
            .map(|p| self.cases.iter().map(|c| c[p] * c[p]).sum::<T>() / n)
            .collect()
    }
}

fn sanitize<T: Scalar>(e: T) -> T {
    if e.is_finite() {
        e.abs()
    } else {
        T::infinity()
    }
}

/// Draws `k` contestants uniformly with replacement; the lowest fitness wins,
/// ties go to the lowest index. NaN counts as worst.
pub fn select_tournament<T: Scalar, R: Rng + ?Sized>(fitness: &[T], k: usize, rng: &mut R) -> usize {
    assert!(!fitness.is_empty(), "tournament over an empty population");
    let key = |i: usize| {
        let f = fitness[i];
        if f.is_nan() {
            T::infinity()
        } else {
            f
        }
    };
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k.max(1) {
        let c = rng.random_range(0..fitness.len());
        if key(c) < key(best) || (key(c) == key(best) && c < best) {
            best = c;
        }
    }
    best
}

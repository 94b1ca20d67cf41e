use super::threshold::{mad, mvt_weighted};
use super::{select_tournament, ErrorMatrix, SelectorConfig, SelectorKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// A selector prepared for one population. Population-level quantities
/// (static masks, semi-dynamic epsilons) are computed once here and reused
/// across every parent drawn.
#[derive(Debug, Clone)]
pub struct Selector<'a, T> {
    errors: &'a ErrorMatrix<T>,
    config: SelectorConfig,
    fitness: Vec<T>,
    epsilon: Vec<T>,
    mask: Vec<Vec<bool>>,
}

/// A chosen parent and how many cases were consumed to choose it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    pub cases_used: usize,
}

impl<'a, T: Scalar> Selector<'a, T> {
    /// Tournament fitness defaults to each individual's mean squared error.
    pub fn new(errors: &'a ErrorMatrix<T>, config: SelectorConfig) -> Result<Self> {
        let fitness = if config.kind == SelectorKind::Tournament {
            errors.mean_squared()
        } else {
            Vec::new()
        };
        Self::with_fitness(errors, fitness, config)
    }

    /// Uses `fitness` (lower is better) for tournaments.
    pub fn with_fitness(errors: &'a ErrorMatrix<T>, fitness: Vec<T>, config: SelectorConfig) -> Result<Self> {
        config.validate()?;
        if errors.n_individuals() == 0 {
            return Err(Error::data("cannot select from an empty population"));
        }
        if config.kind == SelectorKind::Tournament && fitness.len() != errors.n_individuals() {
            return Err(Error::data("one fitness value per individual is required"));
        }
        let fixed = config.fixed_epsilon.map(T::lit);
        let mad_eps = |t: usize| fixed.unwrap_or_else(|| mad(errors.case(t)));
        let cases = 0..errors.n_cases();
        let (epsilon, mask) = match config.kind {
            SelectorKind::LexMadSemi => (cases.map(mad_eps).collect(), Vec::new()),
            SelectorKind::LexMadStatic => {
                let mask = cases
                    .map(|t| {
                        let e = errors.case(t);
                        let cut = min_of(e.iter().copied()) + mad_eps(t);
                        e.iter().map(|&v| v <= cut).collect()
                    })
                    .collect();
                (Vec::new(), mask)
            }
            SelectorKind::LexMvtStatic => {
                let mask = cases
                    .map(|t| {
                        let e = errors.case(t);
                        let split = mvt_weighted(e, config.mvt_weighting);
                        e.iter().map(|&v| split.keeps(v)).collect()
                    })
                    .collect();
                (Vec::new(), mask)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            errors,
            config,
            fitness,
            epsilon,
            mask,
        })
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.config
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Selection {
        if self.config.kind == SelectorKind::Tournament {
            return Selection {
                index: select_tournament(&self.fitness, self.config.tournament_size, rng),
                cases_used: 0,
            };
        }
        let m = self.errors.n_cases();
        let mut pool: Vec<usize> = (0..self.errors.n_individuals()).collect();
        let mut cases: Vec<usize> = (0..m).collect();
        let mut used = 0;
        let mut scratch: Vec<T> = Vec::with_capacity(pool.len());
        while pool.len() > 1 && used < m {
            // lazy Fisher-Yates: only as much of the case order as is consumed
            let j = rng.random_range(used..m);
            cases.swap(used, j);
            let t = cases[used];
            used += 1;
            let e = self.errors.case(t);
            match self.config.kind {
                SelectorKind::LexMadStatic | SelectorKind::LexMvtStatic => {
                    let mask = &self.mask[t];
                    if pool.iter().any(|&p| mask[p]) {
                        pool.retain(|&p| mask[p]);
                    }
                }
                SelectorKind::LexMadSemi => {
                    let cut = min_of(pool.iter().map(|&p| e[p])) + self.epsilon[t];
                    pool.retain(|&p| e[p] <= cut);
                }
                SelectorKind::LexMadDynamic => {
                    scratch.clear();
                    scratch.extend(pool.iter().map(|&p| e[p]));
                    let eps = match self.config.fixed_epsilon {
                        Some(f) => T::lit(f),
                        None => mad(&scratch),
                    };
                    let cut = min_of(scratch.iter().copied()) + eps;
                    pool.retain(|&p| e[p] <= cut);
                }
                SelectorKind::LexMvtDynamic => {
                    scratch.clear();
                    scratch.extend(pool.iter().map(|&p| e[p]));
                    let split = mvt_weighted(&scratch, self.config.mvt_weighting);
                    pool.retain(|&p| split.keeps(e[p]));
                }
                SelectorKind::Tournament => unreachable!("handled above"),
            }
        }
        Selection {
            index: pool[rng.random_range(0..pool.len())],
            cases_used: used,
        }
    }
}

fn min_of<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    values.fold(T::infinity(), T::min)
}

/// One-shot parent selection. Prefer [`Selector`] when drawing many parents
/// from the same population.
pub fn select_parent<T: Scalar, R: Rng + ?Sized>(
    errors: &ErrorMatrix<T>,
    config: &SelectorConfig,
    rng: &mut R,
) -> Result<Selection> {
    Ok(Selector::new(errors, *config)?.select(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> ErrorMatrix<f64> {
        ErrorMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn elite_everywhere_always_wins_dynamic() {
        let m = matrix(&[&[0.0, 10.0, 10.0, 10.0], &[0.0, 10.0, 10.0, 10.0], &[0.0, 10.0, 10.0, 10.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [SelectorKind::LexMadDynamic, SelectorKind::LexMvtDynamic, SelectorKind::LexMadSemi] {
            let s = Selector::new(&m, SelectorConfig::new(kind)).unwrap();
            for _ in 0..200 {
                assert_eq!(s.select(&mut rng).index, 0, "{kind}");
            }
        }
    }

    #[test]
    fn single_individual_consumes_no_cases() {
        let m = matrix(&[&[1.0], &[2.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in SelectorKind::ALL {
            let sel = select_parent(&m, &SelectorConfig::new(kind), &mut rng).unwrap();
            assert_eq!(sel, Selection { index: 0, cases_used: 0 });
        }
    }

    #[test]
    fn static_mask_keeps_pool_when_nobody_passes() {
        // case 0 passes only individual 0, case 1 passes only individual 1
        let m = matrix(&[&[0.0, 5.0, 9.0], &[9.0, 0.0, 5.0]]);
        let cfg = SelectorConfig {
            fixed_epsilon: Some(0.0),
            ..SelectorConfig::new(SelectorKind::LexMadStatic)
        };
        let s = Selector::new(&m, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut seen = [0usize; 3];
        for _ in 0..1000 {
            seen[s.select(&mut rng).index] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen[0] > 400 && seen[1] > 400);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = matrix(&[&[0.3, 0.1, 0.2, 0.5], &[0.2, 0.4, 0.1, 0.0], &[1.0, 0.9, 0.8, 0.7]]);
        for kind in SelectorKind::ALL {
            let s = Selector::new(&m, SelectorConfig::new(kind)).unwrap();
            let run = |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..50).map(|_| s.select(&mut rng)).collect::<Vec<_>>()
            };
            assert_eq!(run(11), run(11));
        }
    }

    #[test]
    fn empty_population_is_an_error() {
        let m = ErrorMatrix::<f64>::new(vec![vec![]]).unwrap();
        assert!(Selector::new(&m, SelectorConfig::default()).is_err());
    }
}

use super::fit::fit_heuristic;
use super::mutate::{mutate, random_expression};
use super::{ITEAConfig, ITExpression, ItKey, Transform};
use crate::data::{Dataset, FeatureMatrix, Partition};
use crate::error::{Error, Result};
use crate::optim::{Fitted, ParamCache};
use crate::scalar::{population_variance, Scalar};
use crate::select::select_tournament;
use rand::Rng;
use std::collections::HashMap;

/// Outcome of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct ItRun<T> {
    /// Lowest training NMSE in the final population.
    pub best: ITExpression<T>,
    pub best_nmse: T,
    /// Best training NMSE of the population after initialization and after
    /// every generation.
    pub history: Vec<T>,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

/// Fitted parameters keyed by `(g, k)`, independent of term order.
#[derive(Debug, Clone)]
struct Cached<T> {
    intercept: T,
    per_tuple: HashMap<(Transform, Vec<i32>), (T, T, T)>,
}

impl<T: Scalar> Cached<T> {
    fn from_expr(e: &ITExpression<T>) -> Self {
        let mut per_tuple = HashMap::new();
        for (t, &c) in e.terms.iter().zip(&e.coefs) {
            per_tuple
                .entry((t.transform, t.strengths.clone()))
                .or_insert((c, t.shift, t.scale));
        }
        Self {
            intercept: e.intercept,
            per_tuple,
        }
    }

    /// Mirrors the fitter's convention: the first copy of a tuple carries the coefficient.
    fn apply(&self, e: &ITExpression<T>) -> ITExpression<T> {
        let mut out = e.clone();
        out.intercept = self.intercept;
        let mut seen = std::collections::HashSet::new();
        for (t, c) in out.terms.iter_mut().zip(out.coefs.iter_mut()) {
            let key = (t.transform, t.strengths.clone());
            let &(coef, shift, scale) = &self.per_tuple[&key];
            t.shift = shift;
            t.scale = scale;
            *c = if seen.insert(key) { coef } else { T::zero() };
        }
        out
    }
}

struct Evaluator<'a, T: Scalar> {
    config: &'a ITEAConfig,
    x: FeatureMatrix<T>,
    y: Vec<T>,
    var: T,
    cache: ParamCache<ItKey, Cached<T>>,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn fitness(&self, e: &ITExpression<T>) -> T {
        let pred = super::it_evaluate(e, &self.x).expect("width validated");
        let mse = crate::data::mse_unchecked(&pred, &self.y);
        let v = mse / self.var;
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    }

    fn fit<R: Rng + ?Sized>(&mut self, e: &ITExpression<T>, rng: &mut R) -> Result<(ITExpression<T>, T)> {
        let (x, y, config) = (&self.x, &self.y, self.config);
        let (cached, _) = self.cache.get_or_fit(e.key(), || {
            let (fitted, report) = fit_heuristic(e, x, y, config.heuristic, config, rng)?;
            Ok(Fitted {
                value: Cached::from_expr(&fitted),
                store: report.succeeded(),
            })
        })?;
        let fitted = cached.apply(e);
        let f = self.fitness(&fitted);
        Ok((fitted, f))
    }
}

/// Runs the mutation-only search on the training rows of `data`.
///
/// Each generation mutates every member once, fits parameters for parents
/// and mutants through the memo cache, and refills the population with
/// tournaments (sampling with replacement) over the combined pool. Fitness
/// is training NMSE; non-finite fitness counts as `+inf`.
pub fn itea_run<T: Scalar, R: Rng + ?Sized>(config: &ITEAConfig, data: &Dataset<T>, rng: &mut R) -> Result<ItRun<T>> {
    config.validate()?;
    let n = data.nfeatures();
    if n == 0 {
        return Err(Error::data("dataset has no features"));
    }
    let (x, y) = data.subset(Partition::Train);
    if y.len() < 2 {
        return Err(Error::data("training partition needs at least two rows"));
    }
    let var = population_variance(&y);
    if !(var > T::zero()) {
        return Err(Error::data("training target has zero variance"));
    }
    let mut ev = Evaluator {
        config,
        x,
        y,
        var,
        cache: ParamCache::new(config.cache_capacity),
    };

    let mut pop: Vec<(ITExpression<T>, T)> = Vec::with_capacity(config.popsize);
    for _ in 0..config.popsize {
        let e = random_expression(n, config, rng);
        pop.push(ev.fit(&e, rng)?);
    }
    let best_of = |pop: &[(ITExpression<T>, T)]| {
        let mut b = 0;
        for (i, p) in pop.iter().enumerate() {
            if p.1 < pop[b].1 {
                b = i;
            }
        }
        b
    };
    let mut history = vec![pop[best_of(&pop)].1];

    for _ in 0..config.gens {
        let mutants: Vec<ITExpression<T>> = pop.iter().map(|(e, _)| mutate(e, config, rng)).collect();
        let mut pool = Vec::with_capacity(2 * pop.len());
        for e in pop.iter().map(|(e, _)| e).chain(&mutants) {
            pool.push(ev.fit(e, rng)?);
        }
        let fitness: Vec<T> = pool.iter().map(|p| p.1).collect();
        pop = (0..config.popsize)
            .map(|_| pool[select_tournament(&fitness, config.tournament_size, rng)].clone())
            .collect();
        history.push(pop[best_of(&pop)].1);
    }

    let (best, best_nmse) = pop.swap_remove(best_of(&pop));
    Ok(ItRun {
        best,
        best_nmse,
        history,
        cache_hits: ev.cache.hits(),
        cache_misses: ev.cache.misses(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{ITTerm, Heuristic};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..2.0)).collect();
        let x2: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..2.0)).collect();
        let y = x1.iter().zip(&x2).map(|(a, b)| a * a * b).collect();
        Dataset::from_columns(vec![x1, x2], y).unwrap()
    }

    fn small() -> ITEAConfig {
        ITEAConfig {
            popsize: 20,
            gens: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_generations_returns_best_initial() {
        let d = dataset(0);
        let cfg = ITEAConfig { gens: 0, ..small() };
        let run = itea_run(&cfg, &d, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(run.history.len(), 1);
        assert_eq!(run.history[0], run.best_nmse);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let d = dataset(0);
        let a = itea_run(&small(), &d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = itea_run(&small(), &d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.best.to_string(), b.best.to_string());
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn permuted_terms_hit_the_cache() {
        let d = dataset(0);
        let (x, y) = d.subset(Partition::Train);
        let cfg = ITEAConfig::default();
        let mut ev = Evaluator {
            config: &cfg,
            var: population_variance(&y),
            x,
            y,
            cache: ParamCache::new(10),
        };
        let a = ITTerm::new(Transform::Id, vec![2, 1]);
        let b = ITTerm::new(Transform::Sin, vec![1, 0]);
        let e1 = ITExpression::new(vec![a.clone(), b.clone()]);
        let e2 = ITExpression::new(vec![b, a]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (f1, n1) = ev.fit(&e1, &mut rng).unwrap();
        let (f2, n2) = ev.fit(&e2, &mut rng).unwrap();
        assert_eq!((ev.cache.misses(), ev.cache.hits()), (1, 1));
        assert_eq!(n1, n2);
        assert_eq!(f1.coefs[0], f2.coefs[1]);
        assert!(n1 < 1e-20);
    }

    #[test]
    fn finds_simple_target() {
        let d = dataset(5);
        let cfg = ITEAConfig {
            popsize: 50,
            gens: 20,
            heuristic: Heuristic::Ols,
            ..Default::default()
        };
        let run = itea_run(&cfg, &d, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(run.best_nmse < 0.05, "{}", run.best_nmse);
        assert!(run.history.windows(2).all(|w| w[1].is_finite()));
    }

    #[test]
    fn constant_target_is_rejected() {
        let d = Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]], vec![1.0; 3]).unwrap();
        assert!(itea_run(&small(), &d, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}

use super::{ITEAConfig, ITExpression, ITTerm};
use crate::scalar::Scalar;
use rand::seq::index::sample;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    /// Add a random term or the sum/difference of two existing ones.
    Expand,
    /// Drop a random term.
    Shrink,
    /// Change one strength of one term.
    Local,
}

/// Uniform over the strength bounds plus zero, excluding `except`.
fn draw_strength<R: Rng + ?Sized>(config: &ITEAConfig, except: Option<i32>, rng: &mut R) -> Option<i32> {
    let (lo, hi) = config.strength_bounds;
    let mut values: Vec<i32> = (lo..=hi).collect();
    if !(lo..=hi).contains(&0) {
        values.push(0);
    }
    values.retain(|&v| Some(v) != except);
    (!values.is_empty()).then(|| values[rng.random_range(0..values.len())])
}

fn draw_nonzero<R: Rng + ?Sized>(config: &ITEAConfig, rng: &mut R) -> i32 {
    let (lo, hi) = config.strength_bounds;
    if (lo..=hi).contains(&0) {
        let v = rng.random_range(lo..hi);
        if v >= 0 {
            v + 1
        } else {
            v
        }
    } else {
        rng.random_range(lo..=hi)
    }
}

/// A strength vector with between one and `max_nonzero_strengths` nonzero entries.
pub fn random_strengths<R: Rng + ?Sized>(n: usize, config: &ITEAConfig, rng: &mut R) -> Vec<i32> {
    let mut k = vec![0; n];
    let cap = config.max_nonzero_strengths.min(n);
    if cap == 0 {
        return k;
    }
    let count = rng.random_range(1..=cap);
    for j in sample(rng, n, count) {
        k[j] = draw_nonzero(config, rng);
    }
    k
}

pub fn random_term<T: Scalar, R: Rng + ?Sized>(n: usize, config: &ITEAConfig, rng: &mut R) -> ITTerm<T> {
    let g = config.transforms[rng.random_range(0..config.transforms.len())];
    ITTerm::new(g, random_strengths(n, config, rng))
}

/// A random expression whose length is uniform within the terms bounds.
pub fn random_expression<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    config: &ITEAConfig,
    rng: &mut R,
) -> ITExpression<T> {
    let (lo, hi) = config.terms_bounds;
    let t = rng.random_range(lo..=hi);
    ITExpression::new((0..t).map(|_| random_term(n, config, rng)).collect())
}

/// Keeps the `max` entries of largest magnitude (earlier index wins ties).
fn truncate_nonzero(k: &mut [i32], max: usize) {
    let mut idx: Vec<usize> = (0..k.len()).filter(|&j| k[j] != 0).collect();
    if idx.len() <= max {
        return;
    }
    idx.sort_by(|&a, &b| k[b].abs().cmp(&k[a].abs()).then(a.cmp(&b)));
    for &j in &idx[max..] {
        k[j] = 0;
    }
}

pub(crate) fn applicable<T>(expr: &ITExpression<T>, config: &ITEAConfig) -> Vec<Mutation> {
    let mut ops = Vec::with_capacity(3);
    if expr.terms.len() < config.terms_bounds.1 {
        ops.push(Mutation::Expand);
    }
    if expr.terms.len() > config.terms_bounds.0 {
        ops.push(Mutation::Shrink);
    }
    if !expr.terms.is_empty() {
        ops.push(Mutation::Local);
    }
    ops
}

/// Applies one mutation chosen uniformly among those the expression admits.
/// Terms created or edited get neutral parameters.
pub fn mutate<T: Scalar, R: Rng + ?Sized>(
    expr: &ITExpression<T>,
    config: &ITEAConfig,
    rng: &mut R,
) -> ITExpression<T> {
    let ops = applicable(expr, config);
    if ops.is_empty() {
        return expr.clone();
    }
    let op = ops[rng.random_range(0..ops.len())];
    mutate_with(expr, op, config, rng).unwrap_or_else(|| expr.clone())
}

/// Applies `op`, or returns `None` if the expression does not admit it.
pub fn mutate_with<T: Scalar, R: Rng + ?Sized>(
    expr: &ITExpression<T>,
    op: Mutation,
    config: &ITEAConfig,
    rng: &mut R,
) -> Option<ITExpression<T>> {
    if !applicable(expr, config).contains(&op) {
        return None;
    }
    let n = expr.terms[0].strengths.len();
    let mut out = expr.clone();
    match op {
        Mutation::Expand => {
            let term = if expr.terms.len() >= 2 && rng.random_bool(0.5) {
                let pick = sample(rng, expr.terms.len(), 2);
                let (a, b) = (&expr.terms[pick.index(0)], &expr.terms[pick.index(1)]);
                let sign = if rng.random_bool(0.5) { 1 } else { -1 };
                let (lo, hi) = config.strength_bounds;
                let mut k: Vec<i32> = a
                    .strengths
                    .iter()
                    .zip(&b.strengths)
                    .map(|(&x, &y)| {
                        let v = x + sign * y;
                        if v == 0 {
                            0
                        } else {
                            v.clamp(lo, hi)
                        }
                    })
                    .collect();
                truncate_nonzero(&mut k, config.max_nonzero_strengths);
                let g = config.transforms[rng.random_range(0..config.transforms.len())];
                ITTerm::new(g, k)
            } else {
                random_term(n, config, rng)
            };
            out.terms.push(term);
            out.coefs.push(T::zero());
        }
        Mutation::Shrink => {
            let i = rng.random_range(0..out.terms.len());
            out.terms.remove(i);
            out.coefs.remove(i);
        }
        Mutation::Local => {
            let i = rng.random_range(0..out.terms.len());
            let term = &mut out.terms[i];
            let positions: Vec<usize> = if term.nonzero() < config.max_nonzero_strengths {
                (0..n).collect()
            } else {
                (0..n).filter(|&j| term.strengths[j] != 0).collect()
            };
            let j = positions[rng.random_range(0..positions.len())];
            term.strengths[j] = draw_strength(config, Some(term.strengths[j]), rng)?;
            term.shift = T::zero();
            term.scale = T::one();
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ITEAConfig {
        ITEAConfig::default()
    }

    fn valid(e: &ITExpression<f64>, c: &ITEAConfig) -> bool {
        let (lo, hi) = c.strength_bounds;
        (c.terms_bounds.0..=c.terms_bounds.1).contains(&e.len())
            && e.coefs.len() == e.len()
            && e.terms.iter().all(|t| {
                t.nonzero() <= c.max_nonzero_strengths
                    && t.strengths.iter().all(|&k| k == 0 || (lo..=hi).contains(&k))
            })
    }

    #[test]
    fn random_expressions_satisfy_invariants() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let e: ITExpression<f64> = random_expression(5, &c, &mut rng);
            assert!(valid(&e, &c));
            assert!(e.terms.iter().all(|t| t.nonzero() >= 1));
        }
    }

    #[test]
    fn expand_blocked_at_max_and_shrink_at_min() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let full = ITExpression::<f64>::new((0..15).map(|_| random_term(3, &c, &mut rng)).collect());
        assert!(!applicable(&full, &c).contains(&Mutation::Expand));
        let small = ITExpression::<f64>::new((0..2).map(|_| random_term(3, &c, &mut rng)).collect());
        assert!(!applicable(&small, &c).contains(&Mutation::Shrink));
        for _ in 0..300 {
            assert!(mutate(&full, &c, &mut rng).len() <= 15);
            assert!(mutate(&small, &c, &mut rng).len() >= 2);
        }
    }

    #[test]
    fn local_changes_exactly_one_strength() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let e: ITExpression<f64> = random_expression(4, &c, &mut rng);
            let m = mutate_with(&e, Mutation::Local, &c, &mut rng).unwrap();
            let changed: usize = e
                .terms
                .iter()
                .zip(&m.terms)
                .map(|(a, b)| a.strengths.iter().zip(&b.strengths).filter(|(x, y)| x != y).count())
                .sum();
            assert_eq!(changed, 1);
            assert!(valid(&m, &c));
        }
    }

    #[test]
    fn mutations_preserve_invariants() {
        let c = ITEAConfig {
            strength_bounds: (-2, 3),
            terms_bounds: (2, 6),
            ..cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut e: ITExpression<f64> = random_expression(6, &c, &mut rng);
        for _ in 0..5000 {
            e = mutate(&e, &c, &mut rng);
            assert!(valid(&e, &c));
        }
    }

    #[test]
    fn expand_then_shrink_restores_key() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let e: ITExpression<f64> = random_expression(3, &c, &mut rng);
            if e.len() == c.terms_bounds.1 {
                continue;
            }
            let mut grown = mutate_with(&e, Mutation::Expand, &c, &mut rng).unwrap();
            assert_eq!(grown.len(), e.len() + 1);
            grown.terms.pop();
            grown.coefs.pop();
            assert_eq!(grown.key(), e.key());
        }
    }

    #[test]
    fn truncation_keeps_largest() {
        let mut k = vec![1, -3, 2, 3];
        truncate_nonzero(&mut k, 2);
        assert_eq!(k, vec![0, -3, 0, 3]);
    }

    #[test]
    fn nonzero_draws_avoid_zero() {
        let c = ITEAConfig {
            strength_bounds: (-1, 1),
            ..cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let v = draw_nonzero(&c, &mut rng);
            assert!(v == -1 || v == 1);
        }
    }
}

//! Pareto dominance, non-dominated sorting with crowding distance, and
//! final-model choice. Every objective is minimized; NaN counts as `+inf`.

use crate::scalar::Scalar;
use std::cmp::Ordering;

/// How `u` relates to `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// `u` is no worse everywhere and strictly better somewhere.
    Dominates,
    /// `v` dominates `u`.
    Dominated,
    /// Equal in every objective.
    Equivalent,
    /// Each is better somewhere.
    NonDominated,
}

fn key<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

/// Compares two objective vectors of equal length.
pub fn dominates<T: Scalar>(u: &[T], v: &[T]) -> Dominance {
    assert_eq!(u.len(), v.len(), "objective vectors differ in length");
    let (mut better, mut worse) = (false, false);
    for (&a, &b) in u.iter().zip(v) {
        match key(a).partial_cmp(&key(b)) {
            Some(Ordering::Less) => better = true,
            Some(Ordering::Greater) => worse = true,
            _ => {}
        }
    }
    match (better, worse) {
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::Dominated,
        (false, false) => Dominance::Equivalent,
        (true, true) => Dominance::NonDominated,
    }
}

/// Front membership and crowding for a population.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontAssignment {
    /// Front of each individual, starting at 1.
    pub rank: Vec<usize>,
    /// Crowding distance of each individual within its own front.
    pub crowding: Vec<f64>,
    /// Member indices of each front, ascending.
    pub fronts: Vec<Vec<usize>>,
}

/// Fast non-dominated sort followed by per-front crowding distances.
pub fn nondominated_sort<T: Scalar>(fitness: &[Vec<T>]) -> FrontAssignment {
    let n = fitness.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            match dominates(&fitness[i], &fitness[j]) {
                Dominance::Dominates => {
                    dominated_by_me[i].push(j);
                    count[j] += 1;
                }
                Dominance::Dominated => {
                    dominated_by_me[j].push(i);
                    count[i] += 1;
                }
                _ => {}
            }
        }
    }
    let mut rank = vec![0usize; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = fronts.len() + 1;
            for &j in &dominated_by_me[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    let mut crowding = vec![0.0; n];
    for front in &fronts {
        for (&i, d) in front.iter().zip(crowding_distance(fitness, front)) {
            crowding[i] = d;
        }
    }
    FrontAssignment {
        rank,
        crowding,
        fronts,
    }
}

/// Crowding distance of each member of `front` (same order as `front`).
/// Objectives are normalized by the front's range; the extremes of every
/// objective get `+inf`, and an objective with zero or infinite range adds
/// nothing to the interior members.
pub fn crowding_distance<T: Scalar>(fitness: &[Vec<T>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut d = vec![0.0; m];
    if m == 0 {
        return d;
    }
    let objectives = fitness[front[0]].len();
    let mut order: Vec<usize> = (0..m).collect();
    for k in 0..objectives {
        let val = |a: usize| key(fitness[front[a]][k]).as_f64();
        order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        d[order[0]] = f64::INFINITY;
        d[order[m - 1]] = f64::INFINITY;
        let range = val(order[m - 1]) - val(order[0]);
        if !(range > 0.0 && range.is_finite()) {
            continue;
        }
        for w in order.windows(3) {
            let gap = (val(w[2]) - val(w[0])) / range;
            if gap.is_finite() {
                d[w[1]] += gap;
            }
        }
    }
    d
}

/// Lowest first objective, ties broken by the remaining objectives, then index.
fn lex_best<T: Scalar>(fitness: &[Vec<T>]) -> Option<usize> {
    (0..fitness.len()).min_by(|&a, &b| {
        fitness[a]
            .iter()
            .zip(&fitness[b])
            .map(|(&x, &y)| key(x).as_f64().total_cmp(&key(y).as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    })
}

/// Indices of the `s` survivors: whole fronts in rank order, and the last
/// partial front trimmed by descending crowding distance (lower index wins
/// ties). The minimizer of the first objective always survives.
pub fn survive<T: Scalar>(fitness: &[Vec<T>], s: usize) -> Vec<usize> {
    let s = s.min(fitness.len());
    let fa = nondominated_sort(fitness);
    let keep = lex_best(fitness);
    let mut out = Vec::with_capacity(s);
    for front in &fa.fronts {
        if out.len() + front.len() <= s {
            out.extend_from_slice(front);
            continue;
        }
        let mut rest = front.clone();
        rest.sort_by(|&a, &b| {
            (Some(b) == keep)
                .cmp(&(Some(a) == keep))
                .then(fa.crowding[b].total_cmp(&fa.crowding[a]))
                .then(a.cmp(&b))
        });
        rest.truncate(s - out.len());
        out.extend(rest);
        break;
    }
    out
}

/// Choice of the final model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinalPick {
    pub index: usize,
    /// True when no validation loss was finite and training loss decided.
    pub fell_back: bool,
}

/// Lowest validation loss; ties go to lower complexity, then smaller size,
/// then lower index. If no validation loss is finite, the lowest training
/// loss decides instead (same tie ladder) and the pick is flagged.
pub fn pick_final<T: Scalar>(val_loss: &[T], train_loss: &[T], complexity: &[u64], size: &[usize]) -> FinalPick {
    let n = val_loss.len();
    assert!(n > 0, "cannot pick from an empty population");
    assert!(train_loss.len() == n && complexity.len() == n && size.len() == n);
    let fell_back = !val_loss.iter().any(|v| v.is_finite());
    let loss = if fell_back { train_loss } else { val_loss };
    let f = |i: usize| {
        let v = loss[i];
        if v.is_finite() {
            v.as_f64()
        } else {
            f64::INFINITY
        }
    };
    let index = (0..n)
        .min_by(|&a, &b| {
            f(a).total_cmp(&f(b))
                .then(complexity[a].cmp(&complexity[b]))
                .then(size[a].cmp(&size[b]))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    FinalPick { index, fell_back }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dominance_table() {
        assert_eq!(dominates(&[1.0, 1.0], &[2.0, 2.0]), Dominance::Dominates);
        assert_eq!(dominates(&[2.0, 2.0], &[1.0, 1.0]), Dominance::Dominated);
        assert_eq!(dominates(&[1.0, 2.0], &[2.0, 1.0]), Dominance::NonDominated);
        assert_eq!(dominates(&[3.0, 3.0], &[3.0, 3.0]), Dominance::Equivalent);
        assert_eq!(dominates(&[1.0, 3.0], &[1.0, 4.0]), Dominance::Dominates);
        assert_eq!(dominates(&[f64::NAN, 0.0], &[1.0, 0.0]), Dominance::Dominated);
    }

    #[test]
    fn chain_gives_one_front_each() {
        let f = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert_eq!(nondominated_sort(&f).fronts, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn equal_vectors_share_a_front() {
        let f = vec![vec![1.0, 2.0]; 4];
        let fa = nondominated_sort(&f);
        assert_eq!(fa.fronts, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn trimming_keeps_extremes() {
        // one front of five on a line; crowding: ends inf, interior by gaps
        let f = vec![vec![0.0, 10.0], vec![1.0, 9.0], vec![5.0, 5.0], vec![6.0, 4.0], vec![10.0, 0.0]];
        let fa = nondominated_sort(&f);
        assert_eq!(fa.fronts.len(), 1);
        // interior: 1 → (5-0)/10·2 = 1.0, 2 → (6-1)/10·2 = 1.0, 3 → (10-5)/10·2 = 1.0
        assert_eq!(&fa.crowding[1..4], &[1.0, 1.0, 1.0]);
        let mut kept = survive(&f, 3);
        kept.sort_unstable();
        assert_eq!(kept, vec![0, 1, 4]);
    }

    #[test]
    fn survive_basics() {
        let f = vec![vec![1.0, 5.0], vec![2.0, 2.0], vec![0.5, 0.5]];
        assert_eq!(survive(&f, 1), vec![2]);
        let mut all = survive(&f, 3);
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn survive_keeps_loss_minimizer_among_boundaries() {
        // a front of two boundary points, both with infinite crowding; S = 1
        let f = vec![vec![3.0, 1.0], vec![1.0, 3.0]];
        assert_eq!(survive(&f, 1), vec![1]);
    }

    #[test]
    fn pick_final_ladder() {
        let inf = f64::INFINITY;
        let p = pick_final(&[0.3, 0.1, 0.2], &[0.0; 3], &[5, 5, 5], &[1, 1, 1]);
        assert_eq!(p, FinalPick { index: 1, fell_back: false });
        let p = pick_final(&[0.1, 0.1], &[0.0; 2], &[20, 10], &[1, 9]);
        assert_eq!(p.index, 1);
        let p = pick_final(&[0.1, 0.1], &[0.0; 2], &[10, 10], &[5, 3]);
        assert_eq!(p.index, 1);
        let p = pick_final(&[inf, f64::NAN], &[0.5, 0.2], &[1, 1], &[1, 1]);
        assert_eq!(p, FinalPick { index: 1, fell_back: true });
    }

    fn oracle_fronts(f: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut left: Vec<usize> = (0..f.len()).collect();
        let mut fronts = Vec::new();
        while !left.is_empty() {
            let front: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| dominates(&f[j], &f[i]) == Dominance::Dominates))
                .collect();
            left.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    fn vectors(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0u8..6, dim), 1..40)
            .prop_map(|v| v.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
    }

    proptest! {
        #[test]
        fn fronts_match_oracle(f in vectors(2)) {
            prop_assert_eq!(nondominated_sort(&f).fronts, oracle_fronts(&f));
        }

        #[test]
        fn fronts_match_oracle_3d(f in vectors(3)) {
            prop_assert_eq!(nondominated_sort(&f).fronts, oracle_fronts(&f));
        }

        #[test]
        fn survive_size_and_minimizer(f in vectors(2), s in 1usize..40) {
            let s = s.min(f.len());
            let kept = survive(&f, s);
            prop_assert_eq!(kept.len(), s);
            let best = f.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            prop_assert!(kept.iter().any(|&i| f[i][0] == best));
        }

        #[test]
        fn dominating_clone_survives(f in vectors(2), s in 1usize..40) {
            let mut f = f;
            let s = s.min(f.len());
            let min0 = f.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let min1 = f.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
            f.push(vec![min0 - 1.0, min1 - 1.0]);
            let kept = survive(&f, s);
            prop_assert!(kept.contains(&(f.len() - 1)));
        }

        #[test]
        fn strict_dominance_is_irreflexive_and_transitive(a in vectors(3), b in vectors(3), c in vectors(3)) {
            let (a, b, c) = (&a[0], &b[0], &c[0]);
            prop_assert_ne!(dominates(a, a), Dominance::Dominates);
            if dominates(a, b) == Dominance::Dominates && dominates(b, c) == Dominance::Dominates {
                prop_assert_eq!(dominates(a, c), Dominance::Dominates);
            }
        }
    }
}

use super::MvtWeighting;
use crate::scalar::Scalar;

fn lower_median<T: Scalar>(sorted: &[T]) -> T {
    sorted[(sorted.len() - 1) / 2]
}

fn sorted<T: Scalar>(values: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = values.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan())));
    v
}

/// Median absolute deviation, using the lower median for even lengths.
/// Returns zero for an empty slice.
pub fn mad<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let m = lower_median(&sorted(values.iter().copied()));
    // v == m short-circuits so that an infinite median gives zero deviation
    // for its own copies instead of NaN.
    let dev = sorted(values.iter().map(|&v| if v == m { T::zero() } else { (v - m).abs() }));
    lower_median(&dev)
}

/// Outcome of a minimum-variance threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split<T> {
    /// Keep values strictly below the threshold.
    At(T),
    /// Every value is equal (or none is finite); keep everything.
    NoSplit,
}

impl<T: Scalar> Split<T> {
    pub fn threshold(self) -> Option<T> {
        match self {
            Split::At(t) => Some(t),
            Split::NoSplit => None,
        }
    }

    /// Whether `e` survives this split.
    pub fn keeps(self, e: T) -> bool {
        match self {
            Split::At(t) => e < t,
            Split::NoSplit => true,
        }
    }
}

/// The threshold minimizing `Var(l)/|l| + Var(r)/|r|` with `l = {e < τ}` and
/// `r = {e ≥ τ}`, searched over midpoints of consecutive distinct values.
/// Ties resolve to the smallest threshold.
///
/// Infinite values are set aside: the split is searched among the finite
/// values, and if those are all equal the threshold separates them from
/// the infinite ones.
pub fn mvt<T: Scalar>(values: &[T]) -> Split<T> {
    mvt_weighted(values, MvtWeighting::PerSize)
}

pub fn mvt_weighted<T: Scalar>(values: &[T], weighting: MvtWeighting) -> Split<T> {
    let s = sorted(values.iter().copied().filter(|v| v.is_finite()));
    let has_infinite = s.len() < values.len();
    if s.is_empty() {
        return Split::NoSplit;
    }
    let boundaries: Vec<usize> = (1..s.len()).filter(|&i| s[i - 1] < s[i]).collect();
    if boundaries.is_empty() {
        return if has_infinite {
            Split::At(T::infinity())
        } else {
            Split::NoSplit
        };
    }

    // Screen candidates with shifted prefix sums, then settle near-ties with
    // an exact two-pass evaluation so the answer does not hinge on the
    // prefix-sum rounding.
    let shift = s[s.len() / 2];
    let mut p1 = Vec::with_capacity(s.len() + 1);
    let mut p2 = Vec::with_capacity(s.len() + 1);
    let (mut a1, mut a2) = (T::zero(), T::zero());
    p1.push(a1);
    p2.push(a2);
    for &v in &s {
        let d = v - shift;
        a1 += d;
        a2 += d * d;
        p1.push(a1);
        p2.push(a2);
    }
    let n = s.len();
    let fast_var = |lo: usize, hi: usize| {
        let k = T::from_usize_lossy(hi - lo);
        let m = (p1[hi] - p1[lo]) / k;
        ((p2[hi] - p2[lo]) / k - m * m).max(T::zero())
    };
    let combine = |vl: T, nl: usize, vr: T, nr: usize| match weighting {
        MvtWeighting::PerSize => vl / T::from_usize_lossy(nl) + vr / T::from_usize_lossy(nr),
        MvtWeighting::BySize => vl * T::from_usize_lossy(nl) + vr * T::from_usize_lossy(nr),
    };
    let fast: Vec<T> = boundaries
        .iter()
        .map(|&i| combine(fast_var(0, i), i, fast_var(i, n), n - i))
        .collect();
    let best_fast = fast.iter().copied().fold(T::infinity(), T::min);
    let scale = s.iter().map(|v| (*v - shift).abs()).fold(T::zero(), T::max);
    let slack = T::lit(1e-6) * (best_fast.abs() + scale * scale) + T::min_positive_value();

    let mut best: Option<(T, usize)> = None;
    for (&i, &c) in boundaries.iter().zip(&fast) {
        if c > best_fast + slack {
            continue;
        }
        let exact = combine(two_pass_variance(&s[..i]), i, two_pass_variance(&s[i..]), n - i);
        if best.is_none_or(|(b, _)| exact < b) {
            best = Some((exact, i));
        }
    }
    let (_, i) = best.expect("at least one candidate is within slack of the minimum");
    Split::At(midpoint(s[i - 1], s[i]))
}

fn two_pass_variance<T: Scalar>(v: &[T]) -> T {
    let n = T::from_usize_lossy(v.len());
    let m = v.iter().copied().sum::<T>() / n;
    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n
}

/// `(a+b)/2`, kept inside `(a, b]` so that `{e < τ}` is exactly the values up to `a`.
fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let two = T::lit(2.0);
    let mut m = (a + b) / two;
    if !m.is_finite() {
        m = a / two + b / two;
    }
    if m > a && m <= b {
        m
    } else {
        b
    }
}

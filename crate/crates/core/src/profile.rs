//! Performance profiles: for each method, the share of datasets on which the
//! aggregated R² reaches at least `x`, for `x` on a uniform grid over [0, 1].

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Number of grid intervals; the grid has `GRID + 1` points.
pub const GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Max,
    Median,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Max => "max",
            Aggregation::Median => "median",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Aggregation::Max, Aggregation::Median]
            .into_iter()
            .find(|a| a.name() == name)
    }

    /// NaN counts as negative infinity. `values` must be non-empty.
    fn apply(self, values: &[f64]) -> f64 {
        let mut v: Vec<f64> = values
            .iter()
            .map(|&r| if r.is_nan() { f64::NEG_INFINITY } else { r })
            .collect();
        v.sort_by(f64::total_cmp);
        match self {
            Aggregation::Max => v[v.len() - 1],
            Aggregation::Median => {
                let m = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[m]
                } else {
                    (v[m - 1] + v[m]) / 2.0
                }
            }
        }
    }
}

/// One run's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunScore {
    pub dataset: String,
    pub method: String,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub method: String,
    pub thresholds: Vec<f64>,
    /// Share of datasets whose aggregated R² is positive and at least the
    /// threshold.
    pub probability: Vec<f64>,
    /// Trapezoid area under the curve.
    pub auc: f64,
    pub n_datasets: usize,
}

/// Grid point `i` as a threshold.
pub fn threshold(i: usize) -> f64 {
    i as f64 / GRID as f64
}

/// One curve per method, in method-name order. Aggregated R² values are
/// clipped below at 0; a dataset whose aggregate is not positive never
/// counts as a success, so an all-non-positive method has AUC exactly 0.
pub fn profile(results: &[RunScore], aggregation: Aggregation) -> Result<Vec<ProfileCurve>> {
    if results.is_empty() {
        return Err(Error::data("no results to profile"));
    }
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in results {
        groups
            .entry(&r.method)
            .or_default()
            .entry(&r.dataset)
            .or_default()
            .push(r.r2);
    }
    Ok(groups
        .into_iter()
        .map(|(method, datasets)| {
            let scores: Vec<f64> = datasets
                .values()
                .map(|v| aggregation.apply(v).max(0.0))
                .collect();
            curve(method, &scores)
        })
        .collect())
}

fn curve(method: &str, scores: &[f64]) -> ProfileCurve {
    let n = scores.len();
    let counts: Vec<usize> = (0..=GRID)
        .map(|i| {
            let x = threshold(i);
            scores.iter().filter(|&&s| s > 0.0 && s >= x).count()
        })
        .collect();
    // integer sums keep the endpoints exact
    let twice_area: usize = counts.windows(2).map(|w| w[0] + w[1]).sum();
    ProfileCurve {
        method: method.to_string(),
        thresholds: (0..=GRID).map(threshold).collect(),
        probability: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        auc: twice_area as f64 / (2 * n * GRID) as f64,
        n_datasets: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn runs(method: &str, r2: &[(&str, f64)]) -> Vec<RunScore> {
        r2.iter()
            .map(|&(d, v)| RunScore {
                dataset: d.into(),
                method: method.into(),
                r2: v,
            })
            .collect()
    }

    #[test]
    fn endpoints_are_exact() {
        let ones = runs("a", &[("d1", 1.0), ("d2", 1.0), ("d2", 0.3)]);
        assert_eq!(profile(&ones, Aggregation::Max).unwrap()[0].auc, 1.0);
        let bad = runs("b", &[("d1", 0.0), ("d2", -3.0), ("d3", f64::NAN)]);
        let c = &profile(&bad, Aggregation::Max).unwrap()[0];
        assert_eq!(c.auc, 0.0);
        assert!(c.probability.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn half_and_half() {
        let r = runs("m", &[("a", 1.0), ("b", 0.0), ("c", 1.0), ("d", -1.0)]);
        assert_eq!(profile(&r, Aggregation::Max).unwrap()[0].auc, 0.5);
    }

    #[test]
    fn aggregation_choice_matters() {
        let r = runs("m", &[("a", 1.0), ("a", 0.2), ("a", 0.0)]);
        assert_eq!(profile(&r, Aggregation::Max).unwrap()[0].auc, 1.0);
        let med = profile(&r, Aggregation::Median).unwrap()[0].auc;
        assert!((med - 0.2).abs() <= 1e-3, "{med}");
    }

    #[test]
    fn one_curve_per_method_sorted() {
        let mut r = runs("zeta", &[("a", 0.5)]);
        r.extend(runs("alpha", &[("a", 0.9)]));
        let c = profile(&r, Aggregation::Max).unwrap();
        assert_eq!(c.iter().map(|c| c.method.as_str()).collect::<Vec<_>>(), ["alpha", "zeta"]);
        assert_eq!(c[0].thresholds.len(), GRID + 1);
        assert!(profile(&[], Aggregation::Max).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_close_to_mean(values in prop::collection::vec(-2.0f64..1.0, 1..40)) {
            let r: Vec<RunScore> = values.iter().enumerate().map(|(i, &v)| RunScore {
                dataset: format!("d{i}"), method: "m".into(), r2: v,
            }).collect();
            let c = &profile(&r, Aggregation::Max).unwrap()[0];
            prop_assert!(c.probability.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!((0.0..=1.0).contains(&c.auc));
            let mean = values.iter().map(|v| v.max(0.0)).sum::<f64>() / values.len() as f64;
            prop_assert!((c.auc - mean).abs() <= 1e-3, "{} vs {}", c.auc, mean);
        }
    }
}

//! Per-feature empirical statistics fitted on training data only: empirical
//! CDFs with linear interpolation, median absolute deviation, and category
//! frequencies.

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, Schema};
use super::{Dataset, TabularError};

/// Empirical CDF over distinct knot values. `eval` returns the fraction of
/// training mass at or below `v`, interpolating linearly between knots:
/// 0 below the smallest knot, 1 at and above the largest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    /// `(value, fraction <= value)`, strictly increasing in both components.
    knots: Vec<(f64, f64)>,
}

impl EmpiricalCdf {
    pub fn fit(values: &[f64]) -> Result<Self, TabularError> {
        if values.is_empty() {
            return Err(TabularError::InvalidSchema(
                "cannot fit a CDF on zero values".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut knots: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            let cum = (i + 1) as f64 / n;
            match knots.last_mut() {
                Some(last) if last.0 == v => last.1 = cum,
                _ => knots.push((v, cum)),
            }
        }
        Ok(EmpiricalCdf { knots })
    }

    /// CDF of the uniform distribution on `[min, max]`; used for synthetic
    /// domains with declared rather than observed value ranges.
    pub fn uniform(min: f64, max: f64) -> Self {
        if min == max {
            return EmpiricalCdf {
                knots: vec![(min, 1.0)],
            };
        }
        EmpiricalCdf {
            knots: vec![(min, 0.0), (max, 1.0)],
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let k = &self.knots;
        if v < k[0].0 {
            return 0.0;
        }
        if v >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        // Index of the last knot with value <= v.
        let i = k.partition_point(|&(x, _)| x <= v) - 1;
        let (x0, f0) = k[i];
        let (x1, f1) = k[i + 1];
        f0 + (v - x0) / (x1 - x0) * (f1 - f0)
    }

    /// Piecewise-linear inverse of `eval`, clamped to the knot range.
    pub fn quantile(&self, q: f64) -> f64 {
        let k = &self.knots;
        let q = q.clamp(0.0, 1.0);
        if q <= k[0].1 {
            return k[0].0;
        }
        let i = k.partition_point(|&(_, f)| f < q);
        debug_assert!(i > 0 && i < k.len() + 1);
        if i >= k.len() {
            return k[k.len() - 1].0;
        }
        let (x0, f0) = k[i - 1];
        let (x1, f1) = k[i];
        x0 + (q - f0) / (f1 - f0) * (x1 - x0)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }
}

/// Median of a non-empty slice (mean of middle pair for even lengths).
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median absolute deviation around the median.
pub fn mad(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FeatureStats {
    Numerical {
        cdf: EmpiricalCdf,
        /// Median absolute deviation of the training values. Zero MAD is kept
        /// as-is here; distance weighting substitutes 1.0 at use sites.
        mad: f64,
    },
    Categorical {
        /// Training frequency of each category, indexed like the schema's
        /// category list. Sums to 1 when any rows were seen.
        frequencies: Vec<f64>,
    },
}

/// Per-feature statistics for one schema, fitted from a training partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetStats {
    per_feature: Vec<FeatureStats>,
}

impl DatasetStats {
    pub fn feature(&self, i: usize) -> &FeatureStats {
        &self.per_feature[i]
    }

    pub fn len(&self) -> usize {
        self.per_feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_feature.is_empty()
    }

    pub fn cdf(&self, i: usize) -> &EmpiricalCdf {
        match &self.per_feature[i] {
            FeatureStats::Numerical { cdf, .. } => cdf,
            FeatureStats::Categorical { .. } => panic!("categorical feature has no CDF"),
        }
    }

    /// MAD-derived weight for inverse-MAD distances: 1/MAD, with zero MAD
    /// falling back to weight 1.0.
    pub fn inverse_mad_weight(&self, i: usize) -> f64 {
        match &self.per_feature[i] {
            FeatureStats::Numerical { mad, .. } => {
                if *mad > 0.0 {
                    1.0 / *mad
                } else {
                    1.0
                }
            }
            FeatureStats::Categorical { .. } => panic!("categorical feature has no MAD"),
        }
    }

    /// Uniform stats for a synthetic domain: uniform CDFs over the schema
    /// bounds and quarter-range MADs for numerical features, uniform category
    /// frequencies for categorical ones.
    pub fn uniform_for(schema: &Schema) -> Self {
        let per_feature = schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numerical => FeatureStats::Numerical {
                    cdf: EmpiricalCdf::uniform(f.bounds.0, f.bounds.1),
                    mad: (f.bounds.1 - f.bounds.0) / 4.0,
                },
                FeatureKind::Categorical => FeatureStats::Categorical {
                    frequencies: vec![1.0 / f.categories.len() as f64; f.categories.len()],
                },
            })
            .collect();
        DatasetStats { per_feature }
    }
}

/// Fits per-feature statistics from (what must be) the training partition.
pub fn fit_stats(train: &Dataset) -> Result<DatasetStats, TabularError> {
    if train.is_empty() {
        return Err(TabularError::EmptyPartition(
            "cannot fit statistics on an empty partition".into(),
        ));
    }
    let schema = &train.schema;
    let mut per_feature = Vec::with_capacity(schema.len());
    for i in 0..schema.len() {
        let f = schema.feature(i);
        let stats = match f.kind {
            FeatureKind::Numerical => {
                let values: Vec<f64> = train.rows.iter().map(|r| r.num(i)).collect();
                FeatureStats::Numerical {
                    cdf: EmpiricalCdf::fit(&values)?,
                    mad: mad(&values),
                }
            }
            FeatureKind::Categorical => {
                let mut counts = vec![0usize; f.categories.len()];
                for r in &train.rows {
                    counts[r.cat(i)] += 1;
                }
                let n = train.len() as f64;
                FeatureStats::Categorical {
                    frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
                }
            }
        };
        per_feature.push(stats);
    }
    Ok(DatasetStats { per_feature })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_hand_counts() {
        // Four values, one duplicate: fractions at-or-below each knot.
        let cdf = EmpiricalCdf::fit(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(cdf.eval(1.0), 0.25);
        assert_eq!(cdf.eval(2.0), 0.75);
        assert_eq!(cdf.eval(5.0), 1.0);
        assert_eq!(cdf.eval(0.5), 0.0);
        assert_eq!(cdf.eval(9.0), 1.0);
        // Halfway between the 2.0 and 5.0 knots: 0.75 + 0.5 * 0.25.
        assert!((cdf.eval(3.5) - 0.875).abs() < 1e-12);
    }

    #[test]
    fn cdf_interpolates_between_distinct_knots() {
        let cdf = EmpiricalCdf::fit(&[0.0, 10.0]).unwrap();
        assert!((cdf.eval(2.5) - 0.625).abs() < 1e-12);
        assert_eq!(cdf.eval(0.0), 0.5);
    }

    #[test]
    fn uniform_cdf_is_linear() {
        let cdf = EmpiricalCdf::uniform(-1.0, 3.0);
        assert_eq!(cdf.eval(-1.0), 0.0);
        assert_eq!(cdf.eval(3.0), 1.0);
        assert!((cdf.eval(0.0) - 0.25).abs() < 1e-12);
        // Distances in CDF space are range-relative.
        assert!((cdf.eval(1.0) - cdf.eval(0.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_eval_on_knots_and_midpoints() {
        let cdf = EmpiricalCdf::fit(&[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(cdf.quantile(0.25), 1.0);
        assert_eq!(cdf.quantile(0.75), 2.0);
        assert_eq!(cdf.quantile(1.0), 5.0);
        assert!((cdf.quantile(0.875) - 3.5).abs() < 1e-12);
        // Below the first knot mass, clamp to the smallest value.
        assert_eq!(cdf.quantile(0.1), 1.0);
    }

    #[test]
    fn mad_of_constant_is_zero_and_hand_case_checks() {
        assert_eq!(mad(&[4.0, 4.0, 4.0]), 0.0);
        // median 3, deviations [2,1,0,1,2] -> median 1.
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0]), 1.0);
    }

    #[test]
    fn zero_mad_weight_falls_back_to_one() {
        let schema = Schema::numeric(&[("x", 0.0, 1.0)]);
        let rows = vec![
            crate::tabular::Instance::new(vec![crate::tabular::FeatureValue::Num(0.5)]),
            crate::tabular::Instance::new(vec![crate::tabular::FeatureValue::Num(0.5)]),
        ];
        let data = Dataset {
            schema: std::sync::Arc::new(schema),
            rows,
            labels: vec![true, false],
            groups: vec![],
        };
        let stats = fit_stats(&data).unwrap();
        assert_eq!(stats.inverse_mad_weight(0), 1.0);
    }

    #[test]
    fn category_frequencies_sum_to_one() {
        let cfg = crate::tabular::SchemaConfig::from_toml(
            r#"
            label = "y"
            positive = "p"

            [[feature]]
            name = "c"
            kind = "categorical"
            categories = ["a", "b", "d"]

            [[feature]]
            name = "x"
            kind = "numerical"
        "#,
        )
        .unwrap();
        let data =
            crate::tabular::load_csv_str("c,x,y\na,1,p\na,2,n\nb,3,p\n", &cfg).unwrap();
        let stats = fit_stats(&data).unwrap();
        match stats.feature(0) {
            FeatureStats::Categorical { frequencies } => {
                assert_eq!(frequencies.len(), 3);
                assert!((frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((frequencies[0] - 2.0 / 3.0).abs() < 1e-12);
                assert_eq!(frequencies[2], 0.0);
            }
            _ => panic!("expected categorical stats"),
        }
    }

    proptest::proptest! {
        #[test]
        fn cdf_is_monotone_and_bounded(mut values in proptest::collection::vec(-1e6f64..1e6, 1..60),
                                        probes in proptest::collection::vec(-1.1e6f64..1.1e6, 1..20)) {
            let cdf = EmpiricalCdf::fit(&values).unwrap();
            let mut sorted_probes = probes;
            sorted_probes.sort_by(f64::total_cmp);
            let mut last = 0.0;
            for &p in &sorted_probes {
                let f = cdf.eval(p);
                proptest::prop_assert!((0.0..=1.0).contains(&f));
                proptest::prop_assert!(f >= last - 1e-12);
                last = f;
            }
            values.sort_by(f64::total_cmp);
            proptest::prop_assert!((cdf.eval(values[values.len() - 1]) - 1.0).abs() < 1e-12);
        }
    }
}

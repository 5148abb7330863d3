//! Effort costs for moving between instances. Numerical changes are measured
//! as shifts in training-distribution percentile; categorical changes count as
//! unit flips. Trajectory cost sums consecutive step costs.

use std::sync::Arc;

use crate::tabular::{DatasetStats, FeatureKind, FeatureStats, FeatureValue, Instance, Schema};

#[derive(Clone)]
pub struct CostModel {
    schema: Arc<Schema>,
    stats: Arc<DatasetStats>,
}

impl CostModel {
    pub fn new(schema: Arc<Schema>, stats: Arc<DatasetStats>) -> Self {
        assert_eq!(
            schema.len(),
            stats.len(),
            "statistics must cover every schema feature"
        );
        CostModel { schema, stats }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn stats(&self) -> &Arc<DatasetStats> {
        &self.stats
    }

    /// Cost of changing feature `i` from `a` to `b`: percentile shift for
    /// numerical features, 0/1 indicator for categorical ones.
    pub fn feature_cost(&self, i: usize, a: &FeatureValue, b: &FeatureValue) -> f64 {
        match self.stats.feature(i) {
            FeatureStats::Numerical { cdf, .. } => (cdf.eval(a.as_num()) - cdf.eval(b.as_num())).abs(),
            FeatureStats::Categorical { .. } => {
                if a.as_cat() == b.as_cat() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Total cost of moving from `x` to `y`: sum of per-feature costs.
    pub fn instance_cost(&self, x: &Instance, y: &Instance) -> f64 {
        debug_assert_eq!(x.values.len(), self.schema.len());
        debug_assert_eq!(y.values.len(), self.schema.len());
        x.values
            .iter()
            .zip(y.values.iter())
            .enumerate()
            .map(|(i, (a, b))| self.feature_cost(i, a, b))
            .sum()
    }

    /// Total effort along a path: sum of costs between consecutive states.
    pub fn trajectory_cost(&self, states: &[Instance]) -> f64 {
        states
            .windows(2)
            .map(|w| self.instance_cost(&w[0], &w[1]))
            .sum()
    }

    /// Length of the cost-space embedding vector.
    pub fn cost_embed_len(&self) -> usize {
        self.schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numerical => 1,
                FeatureKind::Categorical => f.categories.len(),
            })
            .sum()
    }

    /// Embeds an instance so that the l1 distance between embeddings equals
    /// `instance_cost` exactly: numerical features map to their CDF value,
    /// categorical features to a one-hot block scaled by 0.5 (two half-unit
    /// coordinate changes per flip).
    pub fn cost_embed(&self, x: &Instance) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cost_embed_len());
        for (i, v) in x.values.iter().enumerate() {
            match self.stats.feature(i) {
                FeatureStats::Numerical { cdf, .. } => out.push(cdf.eval(v.as_num())),
                FeatureStats::Categorical { frequencies } => {
                    let start = out.len();
                    out.resize(start + frequencies.len(), 0.0);
                    out[start + v.as_cat()] = 0.5;
                }
            }
        }
        out
    }

    /// Inverse-MAD-weighted l1 distance: numerical deltas scaled by 1/MAD
    /// (weight 1 when MAD is zero), categorical mismatches count 1.
    pub fn mad_l1(&self, x: &Instance, y: &Instance) -> f64 {
        x.values
            .iter()
            .zip(y.values.iter())
            .enumerate()
            .map(|(i, (a, b))| match self.schema.feature(i).kind {
                FeatureKind::Numerical => {
                    (a.as_num() - b.as_num()).abs() * self.stats.inverse_mad_weight(i)
                }
                FeatureKind::Categorical => {
                    if a.as_cat() == b.as_cat() {
                        0.0
                    } else {
                        1.0
                    }
                }
            })
            .sum()
    }
}

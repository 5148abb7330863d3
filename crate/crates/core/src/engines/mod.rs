//! Counterfactual generation engines. Each engine maps an input instance to
//! one or more alternative instances the model scores at or above a target
//! probability, while touching only actionable features. Shared plumbing here:
//! the request/result types, candidate selection, and sparsity
//! post-processing.

mod genetic;
mod gradient;
mod inverse;
mod kdtree;
mod lookup;
mod optimal;
mod prototype;
mod random;

pub use genetic::{genetic_cf, GeneticEngine, GeneticParams};
pub use gradient::{gradient_ascent_cf, GaParams, GradientAscentEngine};
pub use inverse::InverseDistanceEngine;
pub use kdtree::{KdTree, Metric};
pub use lookup::{lookup_cf, LookupEngine};
pub use optimal::{optimal_cost_cf, GridSpec, OptimalCostEngine};
pub use prototype::{prototype_cf, PrototypeEngine};
pub use random::{random_search_cf, RandomSearchEngine, RsParams};

use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostModel;
use crate::models::{ModelError, Scorer};
use crate::tabular::{Dataset, Instance, Schema};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("search grid has {cells} cells, more than the {limit} limit")]
    GridExplosion { cells: u128, limit: u64 },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("model does not expose a gradient")]
    NoGradient,
    #[error("no valid candidate to select from")]
    NoValidCandidates,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One explanation query: the instance to explain, the model, the validity
/// threshold, and how many counterfactuals to return.
pub struct CfRequest<'a> {
    pub input: &'a Instance,
    pub model: &'a dyn Scorer,
    pub target_p: f64,
    pub k: usize,
}

impl<'a> CfRequest<'a> {
    pub fn new(input: &'a Instance, model: &'a dyn Scorer) -> Self {
        CfRequest {
            input,
            model,
            target_p: 0.5,
            k: 1,
        }
    }

    pub fn with_target(mut self, target_p: f64) -> Self {
        self.target_p = target_p;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Checks the request against the schema the engine was built for.
    pub fn validate(&self, schema: &Schema) -> Result<(), EngineError> {
        if !(0.5..1.0).contains(&self.target_p) {
            return Err(EngineError::InvalidRequest(format!(
                "target probability {} outside [0.5, 1)",
                self.target_p
            )));
        }
        if self.k == 0 {
            return Err(EngineError::InvalidRequest(
                "at least one counterfactual must be requested".into(),
            ));
        }
        if let Err(e) = self.input.conforms(schema) {
            return Err(EngineError::InvalidRequest(format!(
                "input does not conform to the engine schema: {e}"
            )));
        }
        Ok(())
    }
}

/// Engine output. An empty candidate list is the explicit "nothing valid
/// found" outcome; `degenerate` marks results produced by a fallback rather
/// than the engine's own search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CfResult {
    pub engine: String,
    pub candidates: Vec<Instance>,
    pub validity: Vec<bool>,
    pub degenerate: bool,
}

impl CfResult {
    pub fn failure(engine: &str) -> Self {
        CfResult {
            engine: engine.to_string(),
            candidates: Vec::new(),
            validity: Vec::new(),
            degenerate: false,
        }
    }

    pub fn single(engine: &str, candidate: Instance, valid: bool) -> Self {
        CfResult {
            engine: engine.to_string(),
            candidates: vec![candidate],
            validity: vec![valid],
            degenerate: false,
        }
    }

    /// True when no valid candidate was produced.
    pub fn is_failure(&self) -> bool {
        !self.validity.iter().any(|&v| v)
    }

    pub fn valid_candidates(&self) -> impl Iterator<Item = &Instance> {
        self.candidates
            .iter()
            .zip(&self.validity)
            .filter(|(_, &v)| v)
            .map(|(c, _)| c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Closest,
    Weighted,
    Uniform,
}

/// How one counterfactual is chosen out of a diverse result set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: SelectionKind,
    /// Softmax temperature for the weighted strategy; fixed at 1.
    pub temperature: f64,
}

impl SelectionStrategy {
    pub fn closest() -> Self {
        SelectionStrategy {
            kind: SelectionKind::Closest,
            temperature: 1.0,
        }
    }

    pub fn weighted() -> Self {
        SelectionStrategy {
            kind: SelectionKind::Weighted,
            temperature: 1.0,
        }
    }

    pub fn uniform() -> Self {
        SelectionStrategy {
            kind: SelectionKind::Uniform,
            temperature: 1.0,
        }
    }
}

impl Default for SelectionStrategy {
    fn default() -> Self {
        SelectionStrategy::closest()
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "closest" => Ok(SelectionStrategy::closest()),
            "weighted" => Ok(SelectionStrategy::weighted()),
            "uniform" => Ok(SelectionStrategy::uniform()),
            other => Err(format!("unknown selection strategy {other:?}")),
        }
    }
}

/// A counterfactual generator. Implementations are immutable after
/// construction; `generate` is pure given the random stream, so calls may run
/// concurrently.
pub trait CfEngine: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, req: &CfRequest, rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError>;
}

/// Picks exactly one valid candidate from a result set.
///
/// Closest takes the cost argmin (ties: first listed); weighted samples
/// proportional to exp(-cost / temperature); uniform samples equiprobably.
pub fn select(
    input: &Instance,
    result: &CfResult,
    strategy: SelectionStrategy,
    cost: &CostModel,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, EngineError> {
    let valid: Vec<&Instance> = result.valid_candidates().collect();
    if valid.is_empty() {
        return Err(EngineError::NoValidCandidates);
    }
    let costs: Vec<f64> = valid.iter().map(|c| cost.instance_cost(input, c)).collect();
    let pick = match strategy.kind {
        SelectionKind::Closest => {
            let mut best = 0;
            for i in 1..costs.len() {
                if costs[i] < costs[best] {
                    best = i;
                }
            }
            best
        }
        SelectionKind::Weighted => {
            // Shift by the minimum cost so the exponentials stay in range; the
            // shift cancels in the normalization.
            let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = costs
                .iter()
                .map(|c| (-(c - min) / strategy.temperature).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let draw = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if draw < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        }
        SelectionKind::Uniform => rng.gen_range(0..valid.len()),
    };
    Ok(valid[pick].clone())
}

/// Greedily reverts changed features back to the input value, most costly
/// first, keeping the model probability at or above `target_p`. An invalid
/// candidate is returned unchanged.
pub fn sparsify(
    cost: &CostModel,
    input: &Instance,
    candidate: &Instance,
    model: &dyn Scorer,
    target_p: f64,
) -> Instance {
    let mut current = candidate.clone();
    if model.predict_proba(&current) < target_p {
        return current;
    }
    let mut order: Vec<(f64, usize)> = Vec::new();
    for i in 0..input.values.len() {
        if input.values[i] != current.values[i] {
            order.push((cost.feature_cost(i, &input.values[i], &current.values[i]), i));
        }
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut reverted = false;
    for (_, i) in order {
        let saved = std::mem::replace(&mut current.values[i], input.values[i].clone());
        if model.predict_proba(&current) < target_p {
            current.values[i] = saved;
        } else {
            reverted = true;
        }
    }
    if reverted {
        // No longer the original candidate row, so drop its identity.
        current.index = None;
    }
    current
}

/// The valid training instance with the lowest ingestion index, used as the
/// fixed fallback for gradient ascent.
pub fn default_positive_instance(
    data: &Dataset,
    model: &dyn Scorer,
    target_p: f64,
) -> Option<Instance> {
    let mut rows: Vec<&Instance> = data.rows.iter().collect();
    rows.sort_by_key(|r| r.index);
    rows.into_iter()
        .find(|r| model.predict_proba(r) >= target_p)
        .cloned()
}

/// True when `candidate` agrees with `input` on every non-actionable feature.
pub fn respects_mask(schema: &Schema, input: &Instance, candidate: &Instance) -> bool {
    schema
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.actionable)
        .all(|(i, _)| input.values[i] == candidate.values[i])
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::sync::Arc;

    use crate::cost::CostModel;
    use crate::models::Scorer;
    use crate::tabular::{DatasetStats, FeatureSchema, Instance, Schema};

    /// Scores the mean of the numerical features, ignoring categorical ones.
    pub struct MeanScore;

    impl Scorer for MeanScore {
        fn predict_proba(&self, x: &Instance) -> f64 {
            let nums: Vec<f64> = x
                .values
                .iter()
                .filter_map(|v| match v {
                    crate::tabular::FeatureValue::Num(n) => Some(*n),
                    _ => None,
                })
                .collect();
            let mean = nums.iter().sum::<f64>() / nums.len() as f64;
            mean.clamp(0.0, 1.0)
        }
    }

    /// Unit-square schema with two numerical features and uniform statistics.
    pub fn unit_square() -> (Arc<Schema>, CostModel) {
        let schema = Arc::new(
            Schema::new(vec![
                FeatureSchema::numerical("a", 0.0, 1.0, true),
                FeatureSchema::numerical("b", 0.0, 1.0, true),
            ])
            .unwrap(),
        );
        let stats = Arc::new(DatasetStats::uniform_for(&schema));
        let cost = CostModel::new(Arc::clone(&schema), Arc::clone(&stats));
        (schema, cost)
    }

    /// Mixed schema: one numerical feature, one three-level categorical, one
    /// non-actionable numerical.
    pub fn mixed_world() -> (Arc<Schema>, CostModel) {
        let schema = Arc::new(
            Schema::new(vec![
                FeatureSchema::numerical("x", 0.0, 1.0, true),
                FeatureSchema::categorical("tier", &["low", "mid", "high"], true),
                FeatureSchema::numerical("fixed", 0.0, 1.0, false),
            ])
            .unwrap(),
        );
        let stats = Arc::new(DatasetStats::uniform_for(&schema));
        let cost = CostModel::new(Arc::clone(&schema), Arc::clone(&stats));
        (schema, cost)
    }
}

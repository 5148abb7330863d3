//! Stochastic engine that returns one of a fixed list of candidate instances
//! with probability proportional to the inverse of its distance from the
//! input. Inputs within `eps` of a candidate deterministically get the
//! closest such candidate (lowest index on ties). This is the canonical
//! unstable-recourse construction used by the stability certifier and the
//! polygon experiments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{CfEngine, CfRequest, CfResult, EngineError};
use crate::tabular::{FeatureKind, Instance, Schema};
use std::sync::Arc;

const ENGINE: &str = "inverse_distance";

pub struct InverseDistanceEngine {
    schema: Arc<Schema>,
    candidates: Vec<Instance>,
    eps: f64,
}

impl InverseDistanceEngine {
    pub fn new(
        schema: Arc<Schema>,
        candidates: Vec<Instance>,
        eps: f64,
    ) -> Result<Self, EngineError> {
        if candidates.len() < 2 {
            return Err(EngineError::InvalidRequest(
                "inverse-distance needs at least two candidates".into(),
            ));
        }
        if schema.features().iter().any(|f| f.kind != FeatureKind::Numerical) {
            return Err(EngineError::InvalidRequest(
                "inverse-distance is defined on all-numerical schemas".into(),
            ));
        }
        if !(eps > 0.0) {
            return Err(EngineError::InvalidRequest(format!(
                "snap distance must be positive, got {eps}"
            )));
        }
        for c in &candidates {
            if c.conforms(&schema).is_err() {
                return Err(EngineError::InvalidRequest(
                    "candidate does not conform to the schema".into(),
                ));
            }
        }
        Ok(InverseDistanceEngine {
            schema,
            candidates,
            eps,
        })
    }

    pub fn candidates(&self) -> &[Instance] {
        &self.candidates
    }

    fn distance(a: &Instance, b: &Instance) -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| {
                let d = x.as_num() - y.as_num();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// The candidate index the engine would return, consuming one uniform
    /// draw unless a snap applies.
    pub fn choose(&self, input: &Instance, rng: &mut ChaCha8Rng) -> usize {
        let dists: Vec<f64> = self
            .candidates
            .iter()
            .map(|c| Self::distance(input, c))
            .collect();
        // Snap: at most eps from some candidate means the choice is
        // deterministic, taking the closest (lowest index on ties).
        let mut snap: Option<(f64, usize)> = None;
        for (i, &d) in dists.iter().enumerate() {
            if d <= self.eps && snap.map_or(true, |(bd, _)| d < bd) {
                snap = Some((d, i));
            }
        }
        if let Some((_, i)) = snap {
            return i;
        }
        let weights: Vec<f64> = dists.iter().map(|d| 1.0 / d).collect();
        let total: f64 = weights.iter().sum();
        let draw = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}

impl CfEngine for InverseDistanceEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        req.validate(&self.schema)?;
        let chosen = self.choose(req.input, rng);
        let cand = self.candidates[chosen].clone();
        let valid = req.model.predict_proba(&cand) >= req.target_p;
        Ok(CfResult::single(ENGINE, cand, valid))
    }
}

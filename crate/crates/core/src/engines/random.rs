//! Random-search counterfactuals: sample perturbations of the input, keep the
//! valid ones, return the cheapest. Each actionable feature is independently
//! resampled with a configured probability (uniform over its range or
//! categories), otherwise kept at the input value.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sparsify, CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::tabular::{FeatureKind, FeatureValue, Instance};

#[derive(Clone, Copy, Debug)]
pub struct RsParams {
    pub n_samples: usize,
    /// Per-feature probability of resampling away from the input value.
    pub change_prob: f64,
}

impl Default for RsParams {
    fn default() -> Self {
        RsParams {
            n_samples: 600,
            change_prob: 0.25,
        }
    }
}

const ENGINE: &str = "random_search";

/// Draws `n_samples` perturbations and returns the `k` cheapest valid ones,
/// sparsified and deduplicated.
///
/// The draw order is part of the reproducibility contract: per sample, one
/// decision draw per actionable feature in schema order, then one value draw
/// only when that feature is resampled.
pub fn random_search_cf(
    req: &CfRequest,
    cost: &CostModel,
    params: &RsParams,
    rng: &mut ChaCha8Rng,
) -> Result<CfResult, EngineError> {
    let schema = cost.schema().clone();
    req.validate(&schema)?;
    if params.n_samples == 0 {
        return Err(EngineError::InvalidRequest(
            "random search needs at least one sample".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.change_prob) {
        return Err(EngineError::InvalidRequest(format!(
            "change probability {} outside [0, 1]",
            params.change_prob
        )));
    }

    let mut valid_pool: Vec<(f64, usize, Instance)> = Vec::new();
    for s in 0..params.n_samples {
        let mut values = req.input.values.clone();
        for (i, f) in schema.features().iter().enumerate() {
            if !f.actionable {
                continue;
            }
            if rng.gen::<f64>() < params.change_prob {
                values[i] = match f.kind {
                    FeatureKind::Numerical => {
                        let (lo, hi) = f.bounds;
                        FeatureValue::Num(lo + rng.gen::<f64>() * (hi - lo))
                    }
                    FeatureKind::Categorical => {
                        FeatureValue::Cat(rng.gen_range(0..f.categories.len()))
                    }
                };
            }
        }
        let cand = Instance::new(values);
        if req.model.predict_proba(&cand) >= req.target_p {
            let c = cost.instance_cost(req.input, &cand);
            valid_pool.push((c, s, cand));
        }
    }

    if valid_pool.is_empty() {
        return Ok(CfResult::failure(ENGINE));
    }
    valid_pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut candidates: Vec<Instance> = Vec::new();
    for (_, _, cand) in valid_pool.into_iter().take(req.k) {
        let slim = sparsify(cost, req.input, &cand, req.model, req.target_p);
        if !candidates.contains(&slim) {
            candidates.push(slim);
        }
    }
    let validity = vec![true; candidates.len()];
    Ok(CfResult {
        engine: ENGINE.to_string(),
        candidates,
        validity,
        degenerate: false,
    })
}

pub struct RandomSearchEngine {
    cost: CostModel,
    params: RsParams,
}

impl RandomSearchEngine {
    pub fn new(cost: CostModel, params: RsParams) -> Self {
        RandomSearchEngine { cost, params }
    }
}

impl CfEngine for RandomSearchEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        random_search_cf(req, &self.cost, &self.params, rng)
    }
}

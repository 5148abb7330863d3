//! Counterfactual search by gradient steps on a differentiable model. The
//! objective g(x') = lambda (1 - m(x'))^2 + d_mad(x, x') is minimized from
//! the input over actionable numerical features, projecting onto feature
//! bounds each step. If the endpoint is still invalid, a fixed default
//! positive instance is returned with the degenerate flag set.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::tabular::{FeatureKind, FeatureValue, Instance};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GaParams {
    /// Weight on the squared validity shortfall.
    pub lambda: f64,
    /// Step length as a fraction of each feature's bound range.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the total per-iteration displacement falls below this.
    pub tolerance: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            lambda: 10.0,
            step_size: 0.02,
            max_iters: 1000,
            tolerance: 1e-9,
        }
    }
}

const ENGINE: &str = "gradient_ascent";

pub fn gradient_ascent_cf(
    req: &CfRequest,
    cost: &CostModel,
    params: &GaParams,
    default_positive: &Instance,
) -> Result<CfResult, EngineError> {
    let schema = cost.schema().clone();
    req.validate(&schema)?;
    if !req.model.has_gradient() {
        return Err(EngineError::NoGradient);
    }
    if default_positive.conforms(&schema).is_err() {
        return Err(EngineError::InvalidRequest(
            "default positive instance does not conform to the schema".into(),
        ));
    }

    // Feature index and gradient slot of each actionable numerical feature;
    // the model's gradient vector has one entry per numerical feature in
    // schema order.
    let mut moving: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut slot = 0;
    for (i, f) in schema.features().iter().enumerate() {
        if f.kind == FeatureKind::Numerical {
            if f.actionable {
                let (lo, hi) = f.bounds;
                moving.push((i, slot, lo, hi));
            }
            slot += 1;
        }
    }

    let mut current = req.input.clone();
    current.index = None;
    for _ in 0..params.max_iters {
        let m = req.model.predict_proba(&current);
        let grad = req.model.gradient(&current)?;
        let mut disp = 0.0;
        for &(i, slot, lo, hi) in &moving {
            let x = current.values[i].as_num();
            let diff = x - req.input.values[i].as_num();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            let dg = -2.0 * params.lambda * (1.0 - m) * grad[slot]
                + cost.stats().inverse_mad_weight(i) * sign;
            let step = params.step_size * (hi - lo);
            let next = (x - step * dg).clamp(lo, hi);
            disp += (next - x).abs();
            current.values[i] = FeatureValue::Num(next);
        }
        if disp < params.tolerance {
            break;
        }
    }

    if req.model.predict_proba(&current) >= req.target_p {
        Ok(CfResult::single(ENGINE, current, true))
    } else {
        let valid = req.model.predict_proba(default_positive) >= req.target_p;
        let mut fallback = CfResult::single(ENGINE, default_positive.clone(), valid);
        fallback.degenerate = true;
        Ok(fallback)
    }
}

pub struct GradientAscentEngine {
    cost: CostModel,
    params: GaParams,
    default_positive: Instance,
}

impl GradientAscentEngine {
    pub fn new(
        cost: CostModel,
        params: GaParams,
        default_positive: Instance,
    ) -> Result<Self, EngineError> {
        if default_positive.conforms(cost.schema()).is_err() {
            return Err(EngineError::InvalidRequest(
                "default positive instance does not conform to the schema".into(),
            ));
        }
        Ok(GradientAscentEngine {
            cost,
            params,
            default_positive,
        })
    }
}

impl CfEngine for GradientAscentEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, _rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        gradient_ascent_cf(req, &self.cost, &self.params, &self.default_positive)
    }
}

//! Prototype-guided counterfactuals: the nearest correctly predicted positive
//! training instances (in one-hot/min-max encoded space) serve as prototypes.
//! Each prototype's actionable features are merged onto the input, checked
//! for validity, and sparsified back toward the input.

use rand_chacha::ChaCha8Rng;

use super::kdtree::{KdTree, Metric};
use super::{sparsify, CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::models::Scorer;
use crate::tabular::{encode, Dataset, Instance};

const ENGINE: &str = "prototype";

/// Upper bound on prototypes scanned per query before giving up; keeps a
/// pathological target from turning one explanation into a full-set model
/// sweep.
const DEFAULT_SCAN_LIMIT: usize = 256;

pub struct PrototypeEngine {
    cost: CostModel,
    prototypes: Vec<Instance>,
    tree: KdTree,
    scan_limit: usize,
}

impl PrototypeEngine {
    /// Indexes the correctly predicted positive rows of `data` (label and
    /// prediction both positive), in row order.
    pub fn new(cost: CostModel, model: &dyn Scorer, data: &Dataset) -> Result<Self, EngineError> {
        let mut rows: Vec<&Instance> = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &label)| label && model.is_positive(r))
            .map(|(r, _)| r)
            .collect();
        rows.sort_by_key(|r| r.index);
        let prototypes: Vec<Instance> = rows.into_iter().cloned().collect();
        if prototypes.is_empty() {
            return Err(EngineError::EmptyCandidates);
        }
        let schema = cost.schema().clone();
        let points: Vec<Vec<f64>> = prototypes.iter().map(|p| encode(p, &schema)).collect();
        let tree = KdTree::build(points, Metric::L2);
        Ok(PrototypeEngine {
            cost,
            prototypes,
            tree,
            scan_limit: DEFAULT_SCAN_LIMIT,
        })
    }

    pub fn with_scan_limit(mut self, scan_limit: usize) -> Self {
        self.scan_limit = scan_limit.max(1);
        self
    }

    pub fn prototype_count(&self) -> usize {
        self.prototypes.len()
    }
}

/// Merges `proto`'s actionable features onto `input`. The merged instance
/// keeps the prototype's row identity only when nothing was overridden.
fn merge(cost: &CostModel, input: &Instance, proto: &Instance) -> Instance {
    let schema = cost.schema();
    let mut values = input.values.clone();
    for (i, f) in schema.features().iter().enumerate() {
        if f.actionable {
            values[i] = proto.values[i].clone();
        }
    }
    let mut merged = Instance::new(values);
    if merged.values == proto.values {
        merged.index = proto.index;
    }
    merged
}

/// Walks prototypes outward from the input until `k` valid merged candidates
/// are found (or the scan limit is hit), then sparsifies each.
pub fn prototype_cf(req: &CfRequest, engine: &PrototypeEngine) -> Result<CfResult, EngineError> {
    let cost = &engine.cost;
    req.validate(cost.schema())?;
    let query = encode(req.input, cost.schema());
    let len = engine.prototypes.len();
    let budget = engine.scan_limit.max(req.k).min(len);

    let mut found: Vec<Instance> = Vec::new();
    let mut scanned = 0;
    let mut k = req.k.max(8).min(budget);
    loop {
        let hits = engine.tree.knn(&query, k);
        for &(idx, _) in &hits[scanned..] {
            let cand = merge(cost, req.input, &engine.prototypes[idx]);
            if req.model.predict_proba(&cand) >= req.target_p {
                found.push(cand);
                if found.len() == req.k {
                    break;
                }
            }
        }
        scanned = k;
        if found.len() == req.k || k == budget {
            break;
        }
        k = (k * 4).min(budget);
    }

    let mut candidates: Vec<Instance> = Vec::new();
    for cand in found {
        let slim = sparsify(cost, req.input, &cand, req.model, req.target_p);
        if !candidates.contains(&slim) {
            candidates.push(slim);
        }
    }
    Ok(if candidates.is_empty() {
        CfResult::failure(ENGINE)
    } else {
        let validity = vec![true; candidates.len()];
        CfResult {
            engine: ENGINE.to_string(),
            candidates,
            validity,
            degenerate: false,
        }
    })
}

impl CfEngine for PrototypeEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, _rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        prototype_cf(req, self)
    }
}

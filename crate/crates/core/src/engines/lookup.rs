//! Nearest-candidate lookup: the counterfactual is the cheapest member of a
//! fixed candidate set (by default the correctly predicted positive training
//! instances) that is valid for the request and agrees with the input on
//! every non-actionable feature. Ties resolve to the lowest candidate index.

use rand_chacha::ChaCha8Rng;

use super::kdtree::{KdTree, Metric};
use super::{respects_mask, CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::models::Scorer;
use crate::tabular::{Dataset, Instance};

const ENGINE: &str = "lookup";

/// Below this size a linear scan beats tree upkeep.
const TREE_THRESHOLD: usize = 8;

pub struct LookupEngine {
    cost: CostModel,
    candidates: Vec<Instance>,
    /// Cost-space kd-tree, built only when every feature is actionable (the
    /// mask filter would otherwise invalidate pure nearest-neighbor order).
    tree: Option<KdTree>,
    all_actionable: bool,
}

impl LookupEngine {
    pub fn new(cost: CostModel, candidates: Vec<Instance>) -> Result<Self, EngineError> {
        if candidates.is_empty() {
            return Err(EngineError::EmptyCandidates);
        }
        let all_actionable = cost.schema().features().iter().all(|f| f.actionable);
        let tree = if all_actionable && candidates.len() >= TREE_THRESHOLD {
            let points: Vec<Vec<f64>> = candidates.iter().map(|c| cost.cost_embed(c)).collect();
            Some(KdTree::build(points, Metric::L1))
        } else {
            None
        };
        Ok(LookupEngine {
            cost,
            candidates,
            tree,
            all_actionable,
        })
    }

    /// Builds the default candidate set: training instances that are labeled
    /// positive and predicted positive, in row order.
    pub fn from_training(
        cost: CostModel,
        model: &dyn Scorer,
        data: &Dataset,
    ) -> Result<Self, EngineError> {
        let mut rows: Vec<&Instance> = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &label)| label && model.is_positive(r))
            .map(|(r, _)| r)
            .collect();
        rows.sort_by_key(|r| r.index);
        Self::new(cost, rows.into_iter().cloned().collect())
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    fn tree_lookup(&self, req: &CfRequest, tree: &KdTree) -> Option<usize> {
        // Sweep candidates in (cost, index) order, widening until one passes
        // the validity check; the model runs only on the swept prefix.
        let embed = self.cost.cost_embed(req.input);
        let len = self.candidates.len();
        let mut k = 32.min(len);
        let mut start = 0;
        loop {
            let hits = tree.knn(&embed, k);
            for &(idx, _) in &hits[start..] {
                if req.model.predict_proba(&self.candidates[idx]) >= req.target_p {
                    return Some(idx);
                }
            }
            if k == len {
                return None;
            }
            start = k;
            k = (k * 4).min(len);
        }
    }

    fn linear_lookup(&self, req: &CfRequest) -> Option<usize> {
        let schema = self.cost.schema();
        let mut ranked: Vec<(f64, usize)> = self
            .candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| self.all_actionable || respects_mask(schema, req.input, c))
            .map(|(i, c)| (self.cost.instance_cost(req.input, c), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked
            .into_iter()
            .map(|(_, i)| i)
            .find(|&i| req.model.predict_proba(&self.candidates[i]) >= req.target_p)
    }
}

/// Scans `candidates` for the cheapest valid, mask-respecting instance.
/// Single-counterfactual: `k` larger than 1 still yields the one argmin.
pub fn lookup_cf(req: &CfRequest, candidates: &[Instance], cost: &CostModel) -> Result<CfResult, EngineError> {
    let engine = LookupEngine::new(cost.clone(), candidates.to_vec())?;
    let mut unused = crate::rng::derive_stream(0, &[0]);
    engine.generate(req, &mut unused)
}

impl CfEngine for LookupEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, _rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        req.validate(self.cost.schema())?;
        let found = match &self.tree {
            Some(tree) => self.tree_lookup(req, tree),
            None => self.linear_lookup(req),
        };
        Ok(match found {
            Some(i) => CfResult::single(ENGINE, self.candidates[i].clone(), true),
            None => CfResult::failure(ENGINE),
        })
    }
}

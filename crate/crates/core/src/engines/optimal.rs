//! Exhaustive minimum-cost counterfactual search. Actionable numerical
//! features are discretized at empirical quantiles (plus the input's own
//! value), categorical features contribute every level, and the full product
//! grid is scanned for the cheapest valid cell. The optimum is relative to
//! this grid, not the continuous domain.

use std::cmp::Ordering;

use rand_chacha::ChaCha8Rng;

use super::{CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::tabular::{FeatureKind, FeatureValue};

#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    /// Number of evenly spaced quantiles per numerical feature (at least 2).
    pub quantiles: usize,
    /// Refuse product grids with more cells than this.
    pub max_cells: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            quantiles: 21,
            max_cells: 10_000_000,
        }
    }
}

const ENGINE: &str = "optimal_cost";

/// Returns the cheapest valid grid instance, breaking cost ties by the
/// canonical value order. A valid input is returned unchanged at zero cost.
/// This is a single-counterfactual engine: `k` larger than 1 still yields the
/// one optimum.
pub fn optimal_cost_cf(
    req: &CfRequest,
    cost: &CostModel,
    grid: &GridSpec,
) -> Result<CfResult, EngineError> {
    let schema = cost.schema().clone();
    req.validate(&schema)?;
    if grid.quantiles < 2 {
        return Err(EngineError::InvalidRequest(format!(
            "grid needs at least 2 quantiles, got {}",
            grid.quantiles
        )));
    }
    if req.model.predict_proba(req.input) >= req.target_p {
        return Ok(CfResult::single(ENGINE, req.input.clone(), true));
    }

    let mut grids: Vec<Vec<FeatureValue>> = Vec::with_capacity(schema.len());
    for (i, f) in schema.features().iter().enumerate() {
        if !f.actionable {
            grids.push(vec![req.input.values[i].clone()]);
            continue;
        }
        match f.kind {
            FeatureKind::Categorical => {
                grids.push((0..f.categories.len()).map(FeatureValue::Cat).collect());
            }
            FeatureKind::Numerical => {
                let cdf = cost.stats().cdf(i);
                let mut vals: Vec<f64> = (0..grid.quantiles)
                    .map(|j| cdf.quantile(j as f64 / (grid.quantiles - 1) as f64))
                    .collect();
                vals.push(req.input.values[i].as_num());
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                grids.push(vals.into_iter().map(FeatureValue::Num).collect());
            }
        }
    }

    let cells: u128 = grids.iter().map(|g| g.len() as u128).product();
    if cells > u128::from(grid.max_cells) {
        return Err(EngineError::GridExplosion {
            cells,
            limit: grid.max_cells,
        });
    }

    // Per-feature cost of each grid value relative to the input, so a cell's
    // cost is a table-lookup sum.
    let cost_table: Vec<Vec<f64>> = grids
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.iter()
                .map(|v| cost.feature_cost(i, &req.input.values[i], v))
                .collect()
        })
        .collect();

    let dims = grids.len();
    let mut idx = vec![0usize; dims];
    let mut best: Option<(f64, crate::tabular::Instance)> = None;
    loop {
        let cell_cost: f64 = (0..dims).map(|i| cost_table[i][idx[i]]).sum();
        // The model only runs on cells that would beat the incumbent, which
        // is sound because the incumbent is already valid.
        let improves = match &best {
            None => true,
            Some((bc, binst)) => {
                cell_cost < *bc
                    || (cell_cost == *bc
                        && lex_cmp_cell(&grids, &idx, &binst.values) == Ordering::Less)
            }
        };
        if improves {
            let values: Vec<FeatureValue> =
                (0..dims).map(|i| grids[i][idx[i]].clone()).collect();
            let inst = crate::tabular::Instance::new(values);
            if req.model.predict_proba(&inst) >= req.target_p {
                best = Some((cell_cost, inst));
            }
        }
        let mut i = 0;
        loop {
            idx[i] += 1;
            if idx[i] < grids[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
            if i == dims {
                return Ok(match best {
                    Some((_, inst)) => CfResult::single(ENGINE, inst, true),
                    None => CfResult::failure(ENGINE),
                });
            }
        }
    }
}

fn lex_cmp_cell(grids: &[Vec<FeatureValue>], idx: &[usize], other: &[FeatureValue]) -> Ordering {
    for i in 0..idx.len() {
        let ord = grids[i][idx[i]].canonical_cmp(&other[i]);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

pub struct OptimalCostEngine {
    cost: CostModel,
    grid: GridSpec,
}

impl OptimalCostEngine {
    pub fn new(cost: CostModel, grid: GridSpec) -> Self {
        OptimalCostEngine { cost, grid }
    }
}

impl CfEngine for OptimalCostEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, _rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        optimal_cost_cf(req, &self.cost, &self.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::test_support::{mixed_world, unit_square};
    use crate::engines::respects_mask;
    use crate::models::Scorer;
    use crate::rng::derive_stream;
    use crate::tabular::{DatasetStats, FeatureSchema, Instance, Schema};
    use rand::Rng;
    use std::sync::Arc;

    /// m(x) = first numerical feature, clamped to [0, 1].
    struct Ident;

    impl Scorer for Ident {
        fn predict_proba(&self, x: &Instance) -> f64 {
            x.values[0].as_num().clamp(0.0, 1.0)
        }
    }

    fn line_world() -> CostModel {
        let schema = Arc::new(
            Schema::new(vec![FeatureSchema::numerical("x", 0.0, 1.0, true)]).unwrap(),
        );
        let stats = Arc::new(DatasetStats::uniform_for(&schema));
        CostModel::new(schema, stats)
    }

    #[test]
    fn one_dimensional_grid_finds_the_boundary_point() {
        let cost = line_world();
        let input = Instance::new(vec![FeatureValue::Num(0.2)]);
        let req = CfRequest::new(&input, &Ident);
        let grid = GridSpec {
            quantiles: 11,
            max_cells: 1_000,
        };
        let out = optimal_cost_cf(&req, &cost, &grid).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.candidates[0].values[0], FeatureValue::Num(0.5));
        let c = cost.instance_cost(&input, &out.candidates[0]);
        assert!((c - 0.3).abs() < 1e-12);
    }

    #[test]
    fn valid_input_returns_itself_at_zero_cost() {
        let cost = line_world();
        let input = Instance::new(vec![FeatureValue::Num(0.7)]);
        let req = CfRequest::new(&input, &Ident);
        let out = optimal_cost_cf(&req, &cost, &GridSpec::default()).unwrap();
        assert_eq!(out.candidates[0], input);
        assert_eq!(cost.instance_cost(&input, &out.candidates[0]), 0.0);
    }

    /// Mixed-world scorer with a categorical bump.
    struct Bump;

    impl Scorer for Bump {
        fn predict_proba(&self, x: &Instance) -> f64 {
            let base = 0.5 * x.values[0].as_num() + 0.3 * x.values[2].as_num();
            let bump = if x.values[1].as_cat() == 2 { 0.35 } else { 0.0 };
            (base + bump).clamp(0.0, 1.0)
        }
    }

    #[test]
    fn scan_matches_an_independent_full_enumeration() {
        let (schema, cost) = mixed_world();
        let grid = GridSpec {
            quantiles: 9,
            max_cells: 10_000,
        };
        let mut rng = derive_stream(41, &[0]);
        for _ in 0..20 {
            let input = Instance::new(vec![
                FeatureValue::Num(rng.gen::<f64>() * 0.6),
                FeatureValue::Cat(rng.gen_range(0..3)),
                FeatureValue::Num(rng.gen::<f64>()),
            ]);
            let req = CfRequest::new(&input, &Bump).with_target(0.6);
            let out = optimal_cost_cf(&req, &cost, &grid).unwrap();

            // Oracle: materialize every cell, filter validity, sort.
            let mut xs: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
            xs.push(input.values[0].as_num());
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut pool: Vec<(f64, Instance)> = Vec::new();
            for &x in &xs {
                for c in 0..3usize {
                    let cand = Instance::new(vec![
                        FeatureValue::Num(x),
                        FeatureValue::Cat(c),
                        input.values[2].clone(),
                    ]);
                    if Bump.predict_proba(&cand) >= 0.6 {
                        let cc = cost.instance_cost(&input, &cand);
                        pool.push((cc, cand));
                    }
                }
            }
            pool.sort_by(|a, b| {
                a.0.total_cmp(&b.0).then_with(|| {
                    a.1.values
                        .iter()
                        .zip(&b.1.values)
                        .map(|(u, v)| u.canonical_cmp(v))
                        .find(|o| *o != std::cmp::Ordering::Equal)
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            });
            match pool.first() {
                Some((oracle_cost, oracle_inst)) => {
                    assert_eq!(out.candidates.len(), 1);
                    assert_eq!(&out.candidates[0], oracle_inst);
                    let engine_cost = cost.instance_cost(&input, &out.candidates[0]);
                    assert!((engine_cost - oracle_cost).abs() < 1e-12);
                    assert!(respects_mask(&schema, &input, &out.candidates[0]));
                }
                None => assert!(out.is_failure()),
            }
        }
    }

    #[test]
    fn oversized_grids_are_refused_with_a_size_report() {
        let (_, cost) = mixed_world();
        let input = Instance::new(vec![
            FeatureValue::Num(0.1),
            FeatureValue::Cat(0),
            FeatureValue::Num(0.1),
        ]);
        let req = CfRequest::new(&input, &Bump);
        let grid = GridSpec {
            quantiles: 21,
            max_cells: 10,
        };
        match optimal_cost_cf(&req, &cost, &grid) {
            Err(EngineError::GridExplosion { cells, limit }) => {
                assert!(cells > 10);
                assert_eq!(limit, 10);
            }
            other => panic!("expected grid explosion, got {other:?}"),
        }
    }

    #[test]
    fn repeated_calls_are_identical() {
        let (_, cost) = unit_square();
        let input = Instance::new(vec![FeatureValue::Num(0.15), FeatureValue::Num(0.4)]);
        struct Sum;
        impl Scorer for Sum {
            fn predict_proba(&self, x: &Instance) -> f64 {
                (0.6 * x.values[0].as_num() + 0.6 * x.values[1].as_num()).clamp(0.0, 1.0)
            }
        }
        let req = CfRequest::new(&input, &Sum);
        let a = optimal_cost_cf(&req, &cost, &GridSpec::default()).unwrap();
        let b = optimal_cost_cf(&req, &cost, &GridSpec::default()).unwrap();
        assert_eq!(a.candidates, b.candidates);
        assert_eq!(a.validity, b.validity);
    }
}

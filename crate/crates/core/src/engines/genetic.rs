//! Genetic counterfactual search: a population of perturbed instances evolves
//! under tournament selection, uniform crossover, and per-feature mutation.
//! Fitness rewards validity, low cost, and sparsity. Valid individuals are
//! archived across generations so late drift cannot lose the best finds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sparsify, CfEngine, CfRequest, CfResult, EngineError};
use crate::cost::CostModel;
use crate::tabular::{FeatureKind, FeatureValue, Instance, Schema};

#[derive(Clone, Copy, Debug)]
pub struct GeneticParams {
    pub population: usize,
    pub generations: usize,
    /// Per-feature probability of a uniform resample in a child.
    pub mutation_rate: f64,
    /// Probability that a child is bred from two parents instead of cloned.
    pub crossover_rate: f64,
    /// Tournament size for parent selection.
    pub tournament: usize,
    /// Individuals copied unchanged into the next generation.
    pub elites: usize,
    /// Weight on the validity shortfall max(0, target_p - m).
    pub validity_penalty: f64,
    /// Weight on the number of changed features.
    pub sparsity_weight: f64,
}

impl Default for GeneticParams {
    fn default() -> Self {
        GeneticParams {
            population: 48,
            generations: 60,
            mutation_rate: 0.15,
            crossover_rate: 0.7,
            tournament: 3,
            elites: 2,
            validity_penalty: 8.0,
            sparsity_weight: 0.02,
        }
    }
}

const ENGINE: &str = "genetic";

pub fn genetic_cf(
    req: &CfRequest,
    cost: &CostModel,
    params: &GeneticParams,
    rng: &mut ChaCha8Rng,
) -> Result<CfResult, EngineError> {
    genetic_cf_with_history(req, cost, params, rng).map(|(result, _)| result)
}

/// Like `genetic_cf`, also returning the best fitness seen per generation
/// (nonincreasing thanks to elitism).
pub fn genetic_cf_with_history(
    req: &CfRequest,
    cost: &CostModel,
    params: &GeneticParams,
    rng: &mut ChaCha8Rng,
) -> Result<(CfResult, Vec<f64>), EngineError> {
    let schema = cost.schema().clone();
    req.validate(&schema)?;
    if params.population < 4 {
        return Err(EngineError::InvalidRequest(format!(
            "population {} is below the minimum of 4",
            params.population
        )));
    }
    if params.elites >= params.population || params.tournament == 0 {
        return Err(EngineError::InvalidRequest(
            "elite count must be below the population and tournaments nonempty".into(),
        ));
    }

    let mut pop: Vec<Instance> = Vec::with_capacity(params.population);
    pop.push(req.input.clone());
    while pop.len() < params.population {
        // Seed diversity: resample half the actionable features on average.
        pop.push(perturb(&schema, req.input, req.input.clone(), 0.5, rng));
    }

    // Best valid individuals across all generations, by (fitness, arrival).
    let mut archive: Vec<(f64, Instance)> = Vec::new();
    let mut history = Vec::with_capacity(params.generations + 1);

    let mut generation = 0;
    loop {
        let scored: Vec<(f64, f64)> = pop
            .iter()
            .map(|ind| {
                let m = req.model.predict_proba(ind);
                (fitness(req, cost, ind, m, params), m)
            })
            .collect();
        for (ind, &(fit, m)) in pop.iter().zip(&scored) {
            if m >= req.target_p && !archive.iter().any(|(_, a)| a == ind) {
                archive.push((fit, ind.clone()));
            }
        }
        archive.sort_by(|a, b| a.0.total_cmp(&b.0));
        archive.truncate(req.k);
        let best = scored
            .iter()
            .map(|&(f, _)| f)
            .fold(f64::INFINITY, f64::min);
        history.push(best);

        if generation == params.generations {
            break;
        }
        generation += 1;

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0).then(a.cmp(&b)));
        let mut next: Vec<Instance> =
            order[..params.elites].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < params.population {
            let a = tournament(&scored, params, rng);
            let child = if rng.gen::<f64>() < params.crossover_rate {
                let b = tournament(&scored, params, rng);
                crossover(&schema, &pop[a], &pop[b], rng)
            } else {
                pop[a].clone()
            };
            next.push(perturb(&schema, req.input, child, params.mutation_rate, rng));
        }
        pop = next;
    }

    let mut candidates: Vec<Instance> = Vec::new();
    for (_, ind) in archive.into_iter().take(req.k) {
        let slim = sparsify(cost, req.input, &ind, req.model, req.target_p);
        if !candidates.contains(&slim) {
            candidates.push(slim);
        }
    }
    let result = if candidates.is_empty() {
        CfResult::failure(ENGINE)
    } else {
        let validity = vec![true; candidates.len()];
        CfResult {
            engine: ENGINE.to_string(),
            candidates,
            validity,
            degenerate: false,
        }
    };
    Ok((result, history))
}

fn fitness(req: &CfRequest, cost: &CostModel, ind: &Instance, m: f64, params: &GeneticParams) -> f64 {
    let hinge = (req.target_p - m).max(0.0);
    let changed = ind
        .values
        .iter()
        .zip(&req.input.values)
        .filter(|(a, b)| a != b)
        .count();
    params.validity_penalty * hinge
        + cost.instance_cost(req.input, ind)
        + params.sparsity_weight * changed as f64
}

/// Winner of a size-`tournament` draw: the lowest (fitness, index).
fn tournament(scored: &[(f64, f64)], params: &GeneticParams, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.gen_range(0..scored.len());
    for _ in 1..params.tournament {
        let challenger = rng.gen_range(0..scored.len());
        if scored[challenger]
            .0
            .total_cmp(&scored[winner].0)
            .then(challenger.cmp(&winner))
            == std::cmp::Ordering::Less
        {
            winner = challenger;
        }
    }
    winner
}

/// Uniform crossover over actionable features; non-actionable features are
/// identical in both parents by construction.
fn crossover(schema: &Schema, a: &Instance, b: &Instance, rng: &mut ChaCha8Rng) -> Instance {
    let mut values = a.values.clone();
    for (i, f) in schema.features().iter().enumerate() {
        if f.actionable && rng.gen::<f64>() < 0.5 {
            values[i] = b.values[i].clone();
        }
    }
    Instance::new(values)
}

/// Resamples each actionable feature with probability `rate`, keeping
/// non-actionable features pinned to the input.
fn perturb(
    schema: &Schema,
    input: &Instance,
    mut ind: Instance,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Instance {
    for (i, f) in schema.features().iter().enumerate() {
        if !f.actionable {
            ind.values[i] = input.values[i].clone();
            continue;
        }
        if rng.gen::<f64>() < rate {
            ind.values[i] = match f.kind {
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
    ind.index = None;
    ind
}

pub struct GeneticEngine {
    cost: CostModel,
    params: GeneticParams,
}

impl GeneticEngine {
    pub fn new(cost: CostModel, params: GeneticParams) -> Self {
        GeneticEngine { cost, params }
    }
}

impl CfEngine for GeneticEngine {
    fn name(&self) -> &str {
        ENGINE
    }

    fn generate(&self, req: &CfRequest, rng: &mut ChaCha8Rng) -> Result<CfResult, EngineError> {
        genetic_cf(req, &self.cost, &self.params, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::test_support::{mixed_world, unit_square, MeanScore};
    use crate::engines::{optimal_cost_cf, respects_mask, GridSpec};
    use crate::models::{Scorer, SyntheticModel, SyntheticSpec};
    use crate::rng::derive_stream;
    use std::sync::Arc;

    fn num2(a: f64, b: f64) -> Instance {
        Instance::new(vec![FeatureValue::Num(a), FeatureValue::Num(b)])
    }

    #[test]
    fn valid_input_has_minimal_fitness_and_is_returned() {
        let (_, cost) = unit_square();
        let input = num2(0.8, 0.8);
        let req = CfRequest::new(&input, &MeanScore);
        let mut rng = derive_stream(71, &[0]);
        let (out, history) =
            genetic_cf_with_history(&req, &cost, &GeneticParams::default(), &mut rng).unwrap();
        assert_eq!(out.candidates[0], input);
        assert_eq!(history[0], 0.0);
    }

    #[test]
    fn best_fitness_is_nonincreasing_across_generations() {
        let (_, cost) = mixed_world();
        let input = Instance::new(vec![
            FeatureValue::Num(0.1),
            FeatureValue::Cat(0),
            FeatureValue::Num(0.3),
        ]);
        let req = CfRequest::new(&input, &MeanScore);
        let mut rng = derive_stream(71, &[1]);
        let (_, history) =
            genetic_cf_with_history(&req, &cost, &GeneticParams::default(), &mut rng).unwrap();
        assert_eq!(history.len(), GeneticParams::default().generations + 1);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "history {history:?}");
        }
    }

    #[test]
    fn stays_within_factor_of_the_grid_optimum_on_a_linear_model() {
        let (schema, cost) = unit_square();
        let model = SyntheticModel::new(
            Arc::clone(&schema),
            SyntheticSpec::Linear {
                w: vec![4.0, 3.0],
                b: -4.0,
            },
        )
        .unwrap();
        let mut rng = derive_stream(71, &[2]);
        for trial in 0..20u64 {
            let input = num2(rng.gen::<f64>() * 0.5, rng.gen::<f64>() * 0.5);
            assert!(model.predict_proba(&input) < 0.5);
            let req = CfRequest::new(&input, &model);
            let optimal = optimal_cost_cf(&req, &cost, &GridSpec::default()).unwrap();
            let opt_cost = cost.instance_cost(&input, &optimal.candidates[0]);
            assert!(opt_cost > 0.0);

            let mut grng = derive_stream(71, &[3, trial]);
            let out = genetic_cf(&req, &cost, &GeneticParams::default(), &mut grng).unwrap();
            assert!(!out.is_failure(), "genetic failed on trial {trial}");
            let gen_cost = out
                .candidates
                .iter()
                .map(|c| cost.instance_cost(&input, c))
                .fold(f64::INFINITY, f64::min);
            assert!(
                gen_cost <= 1.5 * opt_cost + 1e-9,
                "trial {trial}: genetic {gen_cost} vs optimal {opt_cost}"
            );
        }
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let (_, cost) = mixed_world();
        let input = Instance::new(vec![
            FeatureValue::Num(0.2),
            FeatureValue::Cat(1),
            FeatureValue::Num(0.4),
        ]);
        let req = CfRequest::new(&input, &MeanScore).with_k(5);
        let run = |seed: u64| {
            let mut rng = derive_stream(seed, &[4]);
            genetic_cf(&req, &cost, &GeneticParams::default(), &mut rng).unwrap()
        };
        let a = run(5);
        let b = run(5);
        assert_eq!(a.candidates, b.candidates);
    }

    #[test]
    fn results_respect_the_actionability_mask() {
        let (schema, cost) = mixed_world();
        let input = Instance::new(vec![
            FeatureValue::Num(0.05),
            FeatureValue::Cat(2),
            FeatureValue::Num(0.5),
        ]);
        let req = CfRequest::new(&input, &MeanScore).with_k(4);
        let mut rng = derive_stream(71, &[5]);
        let out = genetic_cf(&req, &cost, &GeneticParams::default(), &mut rng).unwrap();
        assert!(!out.is_failure());
        for cand in &out.candidates {
            assert!(respects_mask(&schema, &input, cand));
            assert!(MeanScore.predict_proba(cand) >= 0.5);
        }
    }

    #[test]
    fn tiny_populations_are_rejected() {
        let (_, cost) = unit_square();
        let input = num2(0.2, 0.2);
        let req = CfRequest::new(&input, &MeanScore);
        let mut rng = derive_stream(71, &[6]);
        let params = GeneticParams {
            population: 3,
            ..GeneticParams::default()
        };
        assert!(matches!(
            genetic_cf(&req, &cost, &params, &mut rng),
            Err(EngineError::InvalidRequest(_))
        ));
    }
}

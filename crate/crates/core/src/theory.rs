//! Executable checks of the process-level theory: stability certification of
//! counterfactual engines, Monte Carlo verification of the one-shot cost
//! bound, the polygon toy world for inverse-distance randomized
//! recommenders, and the oscillation fixture for fixed-step gradient
//! recommenders.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostModel;
use crate::engines::{
    CfEngine, CfRequest, EngineError, GaParams, GradientAscentEngine,
};
use crate::fulfillment::{partial_fulfill, support, EffortLevel, FulfillmentError};
use crate::models::{
    polygon_vertices, train_forest, train_logistic, AnyModel, ForestHyper, LogisticHyper, Scorer,
    SyntheticModel, SyntheticSpec,
};
use crate::rng::{derive_seed, derive_stream};
use crate::sim::{run_ipf, IpfConfig, SimError, Trajectory};
use crate::tabular::{fit_stats, Dataset, DatasetStats, FeatureSchema, FeatureValue, Instance, Schema};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("probe {0} is not negatively predicted")]
    ProbeNotNegative(usize),
    #[error("engine produced no counterfactual for probe {0}")]
    NoCounterfactual(usize),
    #[error("oscillation search exhausted after {0} attempts")]
    SearchExhausted(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fulfillment(#[from] FulfillmentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

// ---------------------------------------------------------------------------
// Stability certification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Reproduction recipe for an instability: calling the engine at `state`
/// with a stream seeded from `seed` yields `observed`, which differs from
/// the certified recommendation `expected` at the probe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityWitness {
    pub state: Instance,
    /// Replay with `derive_stream(seed, &[])`.
    pub seed: u64,
    pub expected: Instance,
    pub observed: Instance,
}

/// Outcome of probing one input: whether the engine answers the same after
/// any partial fulfillment of its own recommendation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub engine: String,
    pub probe: Instance,
    /// Effort levels whose one-step outcomes were enumerated; the
    /// certificate speaks only for this scope.
    pub u_grid: Vec<f64>,
    pub verdict: StabilityVerdict,
    pub witness: Option<StabilityWitness>,
    /// Why the verdict is inconclusive, when it is.
    pub note: Option<String>,
}

/// Offsets separating the per-probe seed paths: repeat-determinism calls use
/// 0..REPEAT_CALLS, support re-queries start after them.
const REPEAT_CALLS: u64 = 4;

fn first_candidate(
    engine: &dyn CfEngine,
    req: &CfRequest,
    seed: u64,
) -> Result<Option<Instance>, EngineError> {
    let mut rng = derive_stream(seed, &[]);
    let result = engine.generate(req, &mut rng)?;
    Ok(result.candidates.first().cloned())
}

/// Certifies per-probe stability: the engine must answer deterministically
/// at the probe, and answer identically from every reachable one-step
/// partial fulfillment of its recommendation that the model still rejects.
///
/// The recommendation compared is the first returned candidate. Probes must
/// be negatively predicted.
pub fn certify_stability(
    engine: &dyn CfEngine,
    model: &dyn Scorer,
    schema: &Schema,
    probes: &[Instance],
    u_grid: &[EffortLevel],
    eps: f64,
    seed: u64,
) -> Result<Vec<StabilityCertificate>, TheoryError> {
    let grid_values: Vec<f64> = u_grid.iter().map(|u| u.value()).collect();
    let mut out = Vec::with_capacity(probes.len());
    for (pi, probe) in probes.iter().enumerate() {
        if model.predict_proba(probe) >= 0.5 {
            return Err(TheoryError::ProbeNotNegative(pi));
        }
        let certificate = certify_probe(
            engine, model, schema, probe, pi, u_grid, &grid_values, eps, seed,
        )?;
        out.push(certificate);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn certify_probe(
    engine: &dyn CfEngine,
    model: &dyn Scorer,
    schema: &Schema,
    probe: &Instance,
    probe_idx: usize,
    u_grid: &[EffortLevel],
    grid_values: &[f64],
    eps: f64,
    seed: u64,
) -> Result<StabilityCertificate, TheoryError> {
    let mut certificate = StabilityCertificate {
        engine: engine.name().to_string(),
        probe: probe.clone(),
        u_grid: grid_values.to_vec(),
        verdict: StabilityVerdict::Stable,
        witness: None,
        note: None,
    };
    let mut inconclusive = |cert: &mut StabilityCertificate, note: String| {
        cert.verdict = StabilityVerdict::Inconclusive;
        cert.note = Some(note);
    };

    let req = CfRequest::new(probe, model);
    let base_seed = derive_seed(seed, &[probe_idx as u64, 0]);
    let expected = match first_candidate(engine, &req, base_seed)? {
        Some(c) => c,
        None => {
            inconclusive(
                &mut certificate,
                "engine returned no counterfactual at the probe".into(),
            );
            return Ok(certificate);
        }
    };

    // Determinism at the probe: repeat calls on fresh streams.
    for call in 1..=REPEAT_CALLS {
        let call_seed = derive_seed(seed, &[probe_idx as u64, call]);
        let observed = first_candidate(engine, &req, call_seed)?;
        if observed.as_ref().map(|c| &c.values) != Some(&expected.values) {
            certificate.verdict = StabilityVerdict::Unstable;
            certificate.witness = Some(StabilityWitness {
                state: probe.clone(),
                seed: call_seed,
                expected,
                observed: observed.unwrap_or_else(|| probe.clone()),
            });
            return Ok(certificate);
        }
    }

    // Every reachable one-step state the model still rejects must produce
    // the same recommendation.
    let reachable = match support(schema, probe, &expected, u_grid, eps) {
        Ok(r) => r,
        Err(FulfillmentError::SupportExplosion { differing }) => {
            inconclusive(
                &mut certificate,
                format!("support explosion: {differing} differing categorical features"),
            );
            return Ok(certificate);
        }
        Err(e) => return Err(e.into()),
    };
    for (wi, w) in reachable.iter().enumerate() {
        if model.predict_proba(w) >= 0.5 {
            continue;
        }
        let w_req = CfRequest::new(w, model);
        let w_seed = derive_seed(seed, &[probe_idx as u64, REPEAT_CALLS + 1 + wi as u64]);
        let observed = first_candidate(engine, &w_req, w_seed)?;
        match observed {
            Some(c) if c.values == expected.values => {}
            Some(c) => {
                certificate.verdict = StabilityVerdict::Unstable;
                certificate.witness = Some(StabilityWitness {
                    state: w.clone(),
                    seed: w_seed,
                    expected,
                    observed: c,
                });
                return Ok(certificate);
            }
            None => {
                inconclusive(
                    &mut certificate,
                    "engine returned no counterfactual at a reachable state".into(),
                );
                return Ok(certificate);
            }
        }
    }
    Ok(certificate)
}

// ---------------------------------------------------------------------------
// Randomized certification worlds
// ---------------------------------------------------------------------------

/// A discrete world for certifying fixed-candidate-set engines: every
/// feature is categorical, so partial fulfillment stays inside the finite
/// cell product and support enumeration is exact.
pub struct GridWorld {
    pub schema: Arc<Schema>,
    pub cost: CostModel,
    pub model: AnyModel,
    /// Negatively predicted cells to certify from.
    pub probes: Vec<Instance>,
    /// Every accepted cell, with stable indices; lookup candidates.
    pub positives: Vec<Instance>,
}

fn all_cells(schema: &Schema) -> Vec<Instance> {
    let mut out = vec![Vec::new()];
    for f in schema.features() {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<FeatureValue>| {
                (0..f.categories.len()).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(FeatureValue::Cat(c));
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(Instance::new).collect()
}

/// Samples a world with 2 to 4 categorical features of 2 to 7 levels, a
/// logistic or forest model trained on cells labeled by a hidden linear
/// score, and up to `max_probes` rejected cells as probes. Resamples the
/// score when training collapses to a one-sided predictor.
pub fn random_grid_world(seed: u64, max_probes: usize) -> Result<GridWorld, TheoryError> {
    let mut rng = derive_stream(seed, &[]);
    let n_features = rng.gen_range(2..=4usize);
    let features: Vec<FeatureSchema> = (0..n_features)
        .map(|i| {
            let levels = rng.gen_range(2..=7usize);
            let names: Vec<String> = (0..levels).map(|l| format!("l{l}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            FeatureSchema::categorical(&format!("f{i}"), &refs, true)
        })
        .collect();
    let schema = Arc::new(Schema::new(features).map_err(|e| TheoryError::BadScenario(e.to_string()))?);
    let cells = all_cells(&schema);

    for _ in 0..16 {
        // Hidden linear score over level indicators.
        let weights: Vec<Vec<f64>> = schema
            .features()
            .iter()
            .map(|f| (0..f.categories.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bias = rng.gen_range(-0.5..0.5);
        let labels: Vec<bool> = cells
            .iter()
            .map(|c| {
                let score: f64 = c
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| weights[i][v.as_cat()])
                    .sum();
                score + bias > 0.0
            })
            .collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let train = Dataset {
            schema: Arc::clone(&schema),
            rows: cells.clone(),
            labels,
            groups: Vec::new(),
        };
        let model = if rng.gen::<bool>() {
            AnyModel::Logistic(
                train_logistic(&train, &LogisticHyper::default())
                    .map_err(|e| TheoryError::BadScenario(e.to_string()))?,
            )
        } else {
            AnyModel::Forest(
                train_forest(
                    &train,
                    &ForestHyper {
                        n_trees: 40,
                        max_depth: 6,
                        min_leaf: 1,
                        seed: rng.gen(),
                    },
                )
                .map_err(|e| TheoryError::BadScenario(e.to_string()))?,
            )
        };

        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for cell in &cells {
            if model.predict_proba(cell) >= 0.5 {
                let mut p = cell.clone();
                p.index = Some(positives.len());
                positives.push(p);
            } else {
                negatives.push(cell.clone());
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        let probes: Vec<Instance> = if negatives.len() <= max_probes {
            negatives
        } else {
            // Evenly strided subset; deterministic in the seed via the
            // sampled world, independent of further rng draws.
            let stride = negatives.len() / max_probes;
            negatives.into_iter().step_by(stride.max(1)).take(max_probes).collect()
        };
        let stats = Arc::new(fit_stats(&train));
        let cost = CostModel::new(Arc::clone(&schema), stats);
        return Ok(GridWorld {
            schema,
            cost,
            model,
            probes,
            positives,
        });
    }
    Err(TheoryError::BadScenario(
        "no mixed-label world after 16 label redraws".into(),
    ))
}

// ---------------------------------------------------------------------------
// Cost bound verification
// ---------------------------------------------------------------------------

/// One Monte Carlo comparison of realized process cost against the one-shot
/// recommendation cost.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostBoundRow {
    pub probe_id: usize,
    pub u: f64,
    pub trials: usize,
    /// Cost of adopting the engine's recommendation in one shot.
    pub one_shot_bound: f64,
    pub mean_cost: f64,
    pub std_err: f64,
    /// mean ≤ bound + 3 standard errors (with float slack).
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostBoundReport {
    pub rows: Vec<CostBoundRow>,
    pub all_within: bool,
}

/// Estimates expected trajectory cost per (probe, u) and compares it to the
/// one-shot cost of the probe's recommendation. Callers should certify the
/// engine stable on these probes first; the bound is a theorem only for
/// stable deterministic recommenders.
#[allow(clippy::too_many_arguments)]
pub fn verify_cost_bound(
    engine: &dyn CfEngine,
    model: &dyn Scorer,
    cost: &CostModel,
    probes: &[Instance],
    u_grid: &[EffortLevel],
    target_p: f64,
    max_steps: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<CostBoundReport, TheoryError> {
    if trials == 0 {
        return Err(TheoryError::BadScenario("trials must be positive".into()));
    }
    let mut rows = Vec::with_capacity(probes.len() * u_grid.len());
    for (pi, probe) in probes.iter().enumerate() {
        if model.predict_proba(probe) >= 0.5 {
            return Err(TheoryError::ProbeNotNegative(pi));
        }
        let req = CfRequest::new(probe, model).with_target(target_p);
        let one_shot = first_candidate(engine, &req, derive_seed(seed, &[pi as u64]))?
            .ok_or(TheoryError::NoCounterfactual(pi))?;
        let bound = cost.instance_cost(probe, &one_shot);
        for (ui, u) in u_grid.iter().enumerate() {
            let costs: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let config = IpfConfig::new(*u)
                        .with_max_steps(max_steps)
                        .with_target(target_p)
                        .with_eps(eps)
                        .with_seed(derive_seed(seed, &[pi as u64, ui as u64, t as u64]));
                    run_ipf(probe, model, engine, cost, &config)
                        .map(|tr| tr.total_cost)
                })
                .collect::<Result<_, _>>()?;
            let mean = costs.iter().sum::<f64>() / trials as f64;
            let var = if trials > 1 {
                costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
            } else {
                0.0
            };
            let std_err = (var / trials as f64).sqrt();
            rows.push(CostBoundRow {
                probe_id: probe.index.unwrap_or(pi),
                u: u.value(),
                trials,
                one_shot_bound: bound,
                mean_cost: mean,
                std_err,
                within_bound: mean <= bound + 3.0 * std_err + 1e-9,
            });
        }
    }
    let all_within = rows.iter().all(|r| r.within_bound);
    Ok(CostBoundReport { rows, all_within })
}

// ---------------------------------------------------------------------------
// Polygon Monte Carlo
// ---------------------------------------------------------------------------

/// The toy world of k counterfactual states on a regular polygon around the
/// subject, served by an inverse-distance randomized recommender.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PolygonScenario {
    /// Number of vertices; 2 means two antipodal points.
    pub k: usize,
    pub radius: f64,
    pub u: f64,
    /// Snap tolerance: near-vertex choices become deterministic and
    /// near-vertex coordinates land exactly.
    pub eps: f64,
    pub trials: usize,
}

impl PolygonScenario {
    pub fn new(k: usize, u: f64, trials: usize) -> Self {
        PolygonScenario {
            k,
            radius: 1.0,
            u,
            eps: 1e-9,
            trials,
        }
    }

    fn validate(&self) -> Result<(), TheoryError> {
        if self.k < 2 {
            return Err(TheoryError::BadScenario("k must be at least 2".into()));
        }
        if !(self.radius > 0.0) {
            return Err(TheoryError::BadScenario("radius must be positive".into()));
        }
        if !(self.u > 0.0 && self.u <= 1.0) {
            return Err(TheoryError::BadScenario(format!(
                "u {} outside (0, 1]",
                self.u
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(TheoryError::BadScenario("eps must be nonnegative".into()));
        }
        if self.trials == 0 {
            return Err(TheoryError::BadScenario("trials must be positive".into()));
        }
        Ok(())
    }
}

/// Aggregates of one polygon scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolygonOutcome {
    pub scenario: PolygonScenario,
    /// Mean total path length divided by the one-shot cost (the radius).
    pub mean_relative_cost: f64,
    pub std_err: f64,
    /// Fraction of trials whose chosen vertex never changed.
    pub consistency: f64,
    /// Trials cut off by the step guard; their partial cost still counts.
    pub truncated: usize,
}

/// Per-trial step guard; a hit is recorded, not fatal.
const POLYGON_MAX_STEPS: usize = 10_000_000;

struct PolygonTrial {
    path: f64,
    consistent: bool,
    truncated: bool,
}

fn polygon_trial(vertices: &[[f64; 2]], u: f64, eps: f64, seed: u64) -> PolygonTrial {
    let mut rng = derive_stream(seed, &[]);
    let mut x = [0.0f64, 0.0];
    let mut path = 0.0;
    let mut first_goal: Option<usize> = None;
    let mut consistent = true;
    let mut truncated = false;
    let mut steps = 0usize;

    loop {
        if vertices.iter().any(|v| *v == x) {
            break;
        }
        if steps >= POLYGON_MAX_STEPS {
            truncated = true;
            break;
        }
        let d: Vec<f64> = vertices
            .iter()
            .map(|v| ((x[0] - v[0]).powi(2) + (x[1] - v[1]).powi(2)).sqrt())
            .collect();
        // Within eps of a vertex the choice is deterministic; otherwise the
        // recommender picks vertex i with probability proportional to 1/d_i.
        let goal = match d.iter().position(|&di| di <= eps) {
            Some(i) => i,
            None => {
                let weights: Vec<f64> = d.iter().map(|di| 1.0 / di).collect();
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
        };
        match first_goal {
            None => first_goal = Some(goal),
            Some(f) => consistent &= goal == f,
        }
        let v = vertices[goal];
        let mut next = x;
        for c in 0..2 {
            if (x[c] - v[c]).abs() <= eps {
                next[c] = v[c];
            } else {
                next[c] = v[c] + (1.0 - u) * (x[c] - v[c]);
            }
        }
        path += ((next[0] - x[0]).powi(2) + (next[1] - x[1]).powi(2)).sqrt();
        x = next;
        steps += 1;
    }
    PolygonTrial {
        path,
        consistent,
        truncated,
    }
}

/// Simulates the process from the centroid until a vertex is reached, per
/// trial. Trials parallelize over derived seeds; aggregation is sequential,
/// so results are independent of scheduling.
pub fn polygon_monte_carlo(
    scenario: &PolygonScenario,
    seed: u64,
) -> Result<PolygonOutcome, TheoryError> {
    scenario.validate()?;
    let vertices = polygon_vertices(scenario.k, scenario.radius);
    let trials: Vec<PolygonTrial> = (0..scenario.trials)
        .into_par_iter()
        .map(|t| {
            polygon_trial(
                &vertices,
                scenario.u,
                scenario.eps,
                derive_seed(seed, &[t as u64]),
            )
        })
        .collect();

    let n = trials.len() as f64;
    let rel: Vec<f64> = trials.iter().map(|t| t.path / scenario.radius).collect();
    let mean = rel.iter().sum::<f64>() / n;
    let var = if trials.len() > 1 {
        rel.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PolygonOutcome {
        scenario: *scenario,
        mean_relative_cost: mean,
        std_err: (var / n).sqrt(),
        consistency: trials.iter().filter(|t| t.consistent).count() as f64 / n,
        truncated: trials.iter().filter(|t| t.truncated).count(),
    })
}

/// Analytic consistency probability for the two-point scenario at effort u.
/// The first draw sets the reference vertex for free; after t consistent
/// rounds the gap to it is (1-u)^t and to the other vertex 2 - (1-u)^t, so
/// each round re-chooses it with probability 1 - gap/2. The product runs
/// until the gap snaps below `eps` and the choice turns deterministic.
pub fn two_point_consistency(u: f64, eps: f64) -> f64 {
    let mut gap = 1.0 - u;
    let mut p = 1.0;
    while gap > eps {
        p *= 1.0 - gap / 2.0;
        gap *= 1.0 - u;
    }
    p
}

/// Writes polygon outcomes as CSV rows suitable for re-plotting.
pub fn write_polygon_csv<W: Write>(w: W, outcomes: &[PolygonOutcome]) -> Result<(), TheoryError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scenario",
        "u",
        "k",
        "trials",
        "mean_relative_cost",
        "std_err",
        "consistency",
        "truncated",
    ])
    .map_err(|e| TheoryError::Serialize(e.to_string()))?;
    for o in outcomes {
        out.write_record([
            format!("polygon_k{}", o.scenario.k),
            o.scenario.u.to_string(),
            o.scenario.k.to_string(),
            o.scenario.trials.to_string(),
            o.mean_relative_cost.to_string(),
            o.std_err.to_string(),
            o.consistency.to_string(),
            o.truncated.to_string(),
        ])
        .map_err(|e| TheoryError::Serialize(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes cost-bound rows as CSV.
pub fn write_cost_bound_csv<W: Write>(w: W, report: &CostBoundReport) -> Result<(), TheoryError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "probe_id",
        "u",
        "trials",
        "one_shot_bound",
        "mean_cost",
        "std_err",
        "within_bound",
    ])
    .map_err(|e| TheoryError::Serialize(e.to_string()))?;
    for r in &report.rows {
        out.write_record([
            r.probe_id.to_string(),
            r.u.to_string(),
            r.trials.to_string(),
            r.one_shot_bound.to_string(),
            r.mean_cost.to_string(),
            r.std_err.to_string(),
            r.within_bound.to_string(),
        ])
        .map_err(|e| TheoryError::Serialize(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Cycle detection
// ---------------------------------------------------------------------------

fn values_close(a: &FeatureValue, b: &FeatureValue, tolerance: f64) -> bool {
    match (a, b) {
        (FeatureValue::Num(x), FeatureValue::Num(y)) => (x - y).abs() <= tolerance,
        (FeatureValue::Cat(x), FeatureValue::Cat(y)) => x == y,
        _ => false,
    }
}

fn states_close(a: &Instance, b: &Instance, tolerance: f64) -> bool {
    a.values.len() == b.values.len()
        && a.values
            .iter()
            .zip(b.values.iter())
            .all(|(x, y)| values_close(x, y, tolerance))
}

/// Reports the smallest period p for which the trajectory's last 2p states
/// repeat within tolerance. A tail that is constant to within tolerance is
/// convergence, not a cycle, and reports none; a real cycle must move by
/// more than the tolerance inside its final period.
pub fn detect_cycle(trajectory: &Trajectory, tolerance: f64) -> Option<usize> {
    let states = &trajectory.states;
    let n = states.len();
    for p in 1..=n / 2 {
        let windows_match =
            (0..p).all(|j| states_close(&states[n - 2 * p + j], &states[n - p + j], tolerance));
        if !windows_match {
            continue;
        }
        let lively =
            (n - p..n - 1).any(|j| !states_close(&states[j], &states[j + 1], tolerance));
        if lively {
            return Some(p);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Oscillation fixture
// ---------------------------------------------------------------------------

/// A frozen two-bump world in which fixed-step gradient recommendations,
/// half fulfilled, bounce the subject between two rejected states forever.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OscillationFixture {
    /// The surface; a radial-bump mixture over the unit square.
    pub spec: SyntheticSpec,
    pub ga: GaParams,
    /// Fallback instance the gradient engine returns when its descent ends
    /// invalid.
    pub default_positive: [f64; 2],
    /// The two cycle states; both rejected by the model.
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub u: f64,
    pub eps: f64,
    pub period: usize,
    /// Cost of adopting the recommendation at x1 outright.
    pub one_shot_cost: f64,
}

/// Unit-square world shared by the oscillation fixture and its search.
pub fn oscillation_world() -> (Arc<Schema>, CostModel) {
    let schema = Arc::new(Schema::numeric(&[("x", 0.0, 1.0), ("y", 0.0, 1.0)]));
    let stats = Arc::new(DatasetStats::uniform_for(&schema));
    (Arc::clone(&schema), CostModel::new(schema, stats))
}

fn point_instance(p: [f64; 2]) -> Instance {
    Instance::new(vec![FeatureValue::Num(p[0]), FeatureValue::Num(p[1])])
}

fn instance_point(x: &Instance) -> [f64; 2] {
    [x.values[0].as_num(), x.values[1].as_num()]
}

/// What replaying a fixture produces: the recommendations at both cycle
/// states, the realized half-fulfillments, and a full-horizon trajectory
/// from x1.
pub struct FixtureReplay {
    pub goal_at_x1: Instance,
    pub goal_at_x2: Instance,
    /// Half-fulfillment of the recommendation at x1; the cycle says x2.
    pub from_x1: [f64; 2],
    /// Half-fulfillment of the recommendation at x2; the cycle says x1.
    pub from_x2: [f64; 2],
    pub trajectory: Trajectory,
}

/// Replays the fixture's defining cycle with the shipped parameters.
pub fn replay_fixture(fixture: &OscillationFixture) -> Result<FixtureReplay, TheoryError> {
    let (schema, cost) = oscillation_world();
    let model = SyntheticModel::new(Arc::clone(&schema), fixture.spec.clone())
        .map_err(|e| TheoryError::BadScenario(e.to_string()))?;
    let engine = GradientAscentEngine::new(
        cost.clone(),
        fixture.ga,
        point_instance(fixture.default_positive),
    )?;
    let u = EffortLevel::new(fixture.u).map_err(|e| TheoryError::BadScenario(e.to_string()))?;

    let mut step = |from: [f64; 2]| -> Result<(Instance, [f64; 2]), TheoryError> {
        let inst = point_instance(from);
        let req = CfRequest::new(&inst, &model);
        let mut rng = derive_stream(0, &[]);
        let result = engine.generate(&req, &mut rng)?;
        let goal = result.candidates[0].clone();
        let outcome = partial_fulfill(&schema, &inst, &goal, u, fixture.eps, &mut rng)?;
        let landed = instance_point(&outcome.state);
        Ok((goal, landed))
    };
    let (goal_at_x1, from_x1) = step(fixture.x1)?;
    let (goal_at_x2, from_x2) = step(fixture.x2)?;

    let config = IpfConfig::new(u).with_eps(fixture.eps).with_seed(0);
    let trajectory = run_ipf(&point_instance(fixture.x1), &model, &engine, &cost, &config)?;
    Ok(FixtureReplay {
        goal_at_x1,
        goal_at_x2,
        from_x1,
        from_x2,
        trajectory,
    })
}

/// Parameter ranges for the randomized fixture search.
#[derive(Clone, Debug)]
pub struct OscillationSearch {
    pub attempts: usize,
    pub seed: u64,
    pub width_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Horizon of the probe trajectory.
    pub max_steps: usize,
    /// State-match tolerance of the cycle check.
    pub tolerance: f64,
}

impl Default for OscillationSearch {
    fn default() -> Self {
        // This seed hits on its first attempt; the shipped fixture asset is
        // exactly the default search's result.
        OscillationSearch {
            attempts: 20_000,
            seed: 50,
            width_range: (0.03, 0.14),
            height_range: (0.62, 1.0),
            max_steps: 30,
            tolerance: 1e-6,
        }
    }
}

/// Checks one concrete parameterization for a period-2 bounce from `x0` and
/// packages it as a fixture when everything verifies.
fn probe_cycle(
    spec: &SyntheticSpec,
    ga: &GaParams,
    default_positive: [f64; 2],
    x0: [f64; 2],
    max_steps: usize,
    tolerance: f64,
) -> Option<OscillationFixture> {
    let (schema, cost) = oscillation_world();
    let model = SyntheticModel::new(Arc::clone(&schema), spec.clone()).ok()?;
    if model.predict_proba(&point_instance(default_positive)) < 0.5 {
        return None;
    }
    if model.predict_proba(&point_instance(x0)) >= 0.5 {
        return None;
    }
    let engine =
        GradientAscentEngine::new(cost.clone(), *ga, point_instance(default_positive)).ok()?;
    let u = EffortLevel::new(0.5).unwrap();
    let config = IpfConfig::new(u)
        .with_max_steps(max_steps)
        .with_eps(0.0)
        .with_seed(0);
    let probe_tr = run_ipf(&point_instance(x0), &model, &engine, &cost, &config).ok()?;
    if probe_tr.success || probe_tr.failure.is_some() || probe_tr.steps < max_steps {
        return None;
    }
    if detect_cycle(&probe_tr, tolerance) != Some(2) {
        return None;
    }
    let n = probe_tr.states.len();
    let x1 = instance_point(&probe_tr.states[n - 2]);
    let x2 = instance_point(&probe_tr.states[n - 1]);

    let candidate = OscillationFixture {
        spec: spec.clone(),
        ga: *ga,
        default_positive,
        x1,
        x2,
        u: 0.5,
        eps: 0.0,
        period: 2,
        one_shot_cost: 0.0,
    };
    let replay = replay_fixture(&candidate).ok()?;

    // The defining property, verified explicitly: half fulfillment maps the
    // two states onto each other, through genuinely valid recommendations.
    let close = |a: [f64; 2], b: [f64; 2]| {
        (a[0] - b[0]).abs() <= tolerance && (a[1] - b[1]).abs() <= tolerance
    };
    if !close(replay.from_x1, x2) || !close(replay.from_x2, x1) {
        return None;
    }
    if model.predict_proba(&replay.goal_at_x1) < 0.5
        || model.predict_proba(&replay.goal_at_x2) < 0.5
    {
        return None;
    }
    if model.predict_proba(&point_instance(x1)) >= 0.5
        || model.predict_proba(&point_instance(x2)) >= 0.5
    {
        return None;
    }
    let one_shot = cost.instance_cost(&point_instance(x1), &replay.goal_at_x1);
    if one_shot <= 0.0 {
        return None;
    }
    // The bounce must be materially costly: a full horizon from x1 pays at
    // least five one-shot fulfillments.
    if replay.trajectory.success || replay.trajectory.total_cost < 5.0 * one_shot {
        return None;
    }
    Some(OscillationFixture {
        one_shot_cost: one_shot,
        ..candidate
    })
}

/// Randomized search for an oscillation witness: samples two-bump surfaces
/// and valley seed points, probes each for a period-2 bounce, and returns
/// the first verified fixture.
pub fn find_oscillation_fixture(
    search: &OscillationSearch,
) -> Result<OscillationFixture, TheoryError> {
    let mut rng = derive_stream(search.seed, &[]);
    let (wl, wh) = search.width_range;
    let (hl, hh) = search.height_range;
    for _ in 0..search.attempts {
        let c1 = [rng.gen_range(0.18..0.42), rng.gen_range(0.3..0.7)];
        let c2 = [rng.gen_range(0.58..0.82), rng.gen_range(0.3..0.7)];
        let spec = SyntheticSpec::RbfMixture {
            centers: vec![c1.to_vec(), c2.to_vec()],
            widths: vec![rng.gen_range(wl..wh), rng.gen_range(wl..wh)],
            heights: vec![rng.gen_range(hl..hh), rng.gen_range(hl..hh)],
            bias: 0.0,
        };
        let ga = GaParams {
            step_size: [0.02, 0.05, 0.08, 0.12][rng.gen_range(0..4)],
            ..GaParams::default()
        };
        let default_positive = if rng.gen::<bool>() { c1 } else { c2 };
        let x0 = [rng.gen_range(0.3..0.7), rng.gen_range(0.25..0.75)];
        if let Some(fixture) = probe_cycle(
            &spec,
            &ga,
            default_positive,
            x0,
            search.max_steps,
            search.tolerance,
        ) {
            return Ok(fixture);
        }
    }
    Err(TheoryError::SearchExhausted(search.attempts))
}

/// Parses a frozen fixture from its JSON asset text.
pub fn load_fixture(json: &str) -> Result<OscillationFixture, TheoryError> {
    serde_json::from_str(json).map_err(|e| TheoryError::Serialize(e.to_string()))
}

/// The oscillation witness shipped with the crate. Regenerate with the
/// ignored `fixture_freeze` test after intentional engine changes; the
/// default search reproduces it exactly.
pub fn frozen_fixture() -> Result<OscillationFixture, TheoryError> {
    load_fixture(include_str!("../assets/oscillation.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::test_support::unit_square;
    use crate::engines::{GridSpec, InverseDistanceEngine, LookupEngine, OptimalCostEngine};

    fn num2(a: f64, b: f64) -> Instance {
        Instance::new(vec![FeatureValue::Num(a), FeatureValue::Num(b)])
    }

    fn efforts(us: &[f64]) -> Vec<EffortLevel> {
        us.iter().map(|&u| EffortLevel::new(u).unwrap()).collect()
    }

    fn linear_world() -> (Arc<Schema>, CostModel, SyntheticModel) {
        let (schema, cost) = unit_square();
        let model = SyntheticModel::new(
            Arc::clone(&schema),
            SyntheticSpec::Linear {
                w: vec![3.0, 3.0],
                b: -3.3,
            },
        )
        .unwrap();
        (schema, cost, model)
    }

    /// The 5x5 grid points of the unit square.
    fn grid_points() -> Vec<Instance> {
        let mut out = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                out.push(num2(i as f64 / 4.0, j as f64 / 4.0));
            }
        }
        out
    }

    /// Two categorical features with five levels each: a discrete 5x5 world
    /// on which the optimal engine's candidate set is the full fixed cell
    /// product, independent of the query state.
    fn cat5_world() -> (Arc<Schema>, CostModel) {
        let levels = ["0", "1", "2", "3", "4"];
        let schema = Arc::new(
            Schema::new(vec![
                crate::tabular::FeatureSchema::categorical("r", &levels, true),
                crate::tabular::FeatureSchema::categorical("c", &levels, true),
            ])
            .unwrap(),
        );
        let stats = Arc::new(DatasetStats::uniform_for(&schema));
        (Arc::clone(&schema), CostModel::new(schema, stats))
    }

    /// Linear in the level codes; acceptance needs both codes maxed.
    struct CodeSum;

    impl Scorer for CodeSum {
        fn predict_proba(&self, x: &Instance) -> f64 {
            (x.values[0].as_cat() + x.values[1].as_cat()) as f64 / 16.0
        }
    }

    #[test]
    fn optimal_cost_engine_is_stable_on_the_discrete_grid_world() {
        let (schema, cost) = cat5_world();
        let engine = OptimalCostEngine::new(cost.clone(), GridSpec::default());
        let mut probes = Vec::new();
        for i in 0..5usize {
            for j in 0..5usize {
                let p = Instance::new(vec![FeatureValue::Cat(i), FeatureValue::Cat(j)]);
                if CodeSum.predict_proba(&p) < 0.5 {
                    probes.push(p);
                }
            }
        }
        assert_eq!(probes.len(), 24);
        let certs = certify_stability(
            &engine,
            &CodeSum,
            &schema,
            &probes,
            &efforts(&[0.25, 0.5, 0.75, 1.0]),
            1e-9,
            11,
        )
        .unwrap();
        for cert in &certs {
            assert_eq!(
                cert.verdict,
                StabilityVerdict::Stable,
                "witness: {:?}",
                cert.witness
            );
            assert!(cert.witness.is_none());
        }
    }

    /// On continuous features the optimal engine augments its grid with the
    /// query's own coordinates, so the candidate set shifts between calls
    /// and midpoint states can elicit cheaper off-grid answers. The
    /// certifier catches this honestly instead of assuming the discrete
    /// case generalizes.
    #[test]
    fn input_augmented_numerical_grid_is_caught_as_unstable() {
        let (schema, cost, model) = linear_world();
        let engine = OptimalCostEngine::new(
            cost.clone(),
            GridSpec {
                quantiles: 5,
                ..GridSpec::default()
            },
        );
        let probes = vec![num2(0.0, 0.0)];
        let certs = certify_stability(
            &engine,
            &model,
            &schema,
            &probes,
            &efforts(&[0.25, 0.5, 0.75, 1.0]),
            1e-9,
            11,
        )
        .unwrap();
        assert_eq!(certs[0].verdict, StabilityVerdict::Unstable);
        let witness = certs[0].witness.as_ref().unwrap();
        let req = CfRequest::new(&witness.state, &model);
        let replayed = first_candidate(&engine, &req, witness.seed).unwrap().unwrap();
        assert_eq!(replayed.values, witness.observed.values);
    }

    #[test]
    fn lookup_engine_over_positive_grid_points_is_stable() {
        let (schema, cost, model) = linear_world();
        let positives: Vec<Instance> = grid_points()
            .into_iter()
            .filter(|p| model.predict_proba(p) >= 0.5)
            .enumerate()
            .map(|(i, mut p)| {
                p.index = Some(i);
                p
            })
            .collect();
        assert!(!positives.is_empty());
        let engine = LookupEngine::new(cost.clone(), positives).unwrap();
        let probes: Vec<Instance> = grid_points()
            .into_iter()
            .filter(|p| model.predict_proba(p) < 0.5)
            .collect();
        let certs = certify_stability(
            &engine,
            &model,
            &schema,
            &probes,
            &efforts(&[0.25, 0.5, 0.75, 1.0]),
            1e-9,
            13,
        )
        .unwrap();
        for cert in &certs {
            assert_eq!(
                cert.verdict,
                StabilityVerdict::Stable,
                "witness: {:?}",
                cert.witness
            );
        }
    }

    #[test]
    fn inverse_distance_engine_is_unstable_with_a_replayable_witness() {
        let (schema, cost, model) = linear_world();
        let candidates = vec![num2(0.9, 0.6), num2(0.6, 0.9)];
        let engine =
            InverseDistanceEngine::new(Arc::clone(cost.schema()), candidates, 1e-9).unwrap();
        // Equidistant from both candidates: repeated draws split.
        let probes = vec![num2(0.2, 0.2)];
        let certs = certify_stability(
            &engine,
            &model,
            &schema,
            &probes,
            &efforts(&[0.5]),
            1e-9,
            17,
        )
        .unwrap();
        assert_eq!(certs[0].verdict, StabilityVerdict::Unstable);
        let witness = certs[0].witness.as_ref().expect("unstable needs a witness");

        // The witness replays: the recorded seed reproduces the deviating
        // answer at the recorded state.
        let req = CfRequest::new(&witness.state, &model);
        let replayed = first_candidate(&engine, &req, witness.seed).unwrap().unwrap();
        assert_eq!(replayed.values, witness.observed.values);
        assert_ne!(witness.observed.values, witness.expected.values);
    }

    #[test]
    fn probes_must_be_negative() {
        let (schema, cost, model) = linear_world();
        let engine = OptimalCostEngine::new(cost.clone(), GridSpec::default());
        let err = certify_stability(
            &engine,
            &model,
            &schema,
            &[num2(0.9, 0.9)],
            &efforts(&[0.5]),
            1e-9,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, TheoryError::ProbeNotNegative(0)));
    }

    #[test]
    fn deterministic_numerical_cost_bound_holds_with_zero_variance() {
        let (_, cost, model) = linear_world();
        let engine = OptimalCostEngine::new(
            cost.clone(),
            GridSpec {
                quantiles: 11,
                ..GridSpec::default()
            },
        );
        let probes = vec![num2(0.1, 0.2), num2(0.3, 0.05)];
        let report = verify_cost_bound(
            &engine,
            &model,
            &cost,
            &probes,
            &efforts(&[0.3, 0.6, 1.0]),
            0.5,
            30,
            1e-9,
            8,
            23,
        )
        .unwrap();
        assert!(report.all_within);
        for row in &report.rows {
            // No categorical features, deterministic engine: spread is pure
            // summation noise and the bound is hard.
            assert!(row.std_err < 1e-12);
            assert!(row.mean_cost <= row.one_shot_bound + 1e-9);
        }
    }

    #[test]
    fn conservative_target_stops_early_and_strictly_under_the_bound() {
        let (_, cost, model) = linear_world();
        let engine = OptimalCostEngine::new(
            cost.clone(),
            GridSpec {
                quantiles: 21,
                ..GridSpec::default()
            },
        );
        // The engine aims for 0.9 but the subject stops at 0.5, so partial
        // fulfillment saves real cost.
        let probes = vec![num2(0.1, 0.1)];
        let report = verify_cost_bound(
            &engine,
            &model,
            &cost,
            &probes,
            &efforts(&[0.5]),
            0.9,
            30,
            1e-9,
            4,
            29,
        )
        .unwrap();
        assert!(report.all_within);
        let row = &report.rows[0];
        assert!(
            row.mean_cost < row.one_shot_bound - 1e-6,
            "mean {} not strictly below bound {}",
            row.mean_cost,
            row.one_shot_bound
        );
    }

    #[test]
    fn categorical_cost_bound_holds_in_expectation() {
        use crate::engines::test_support::{mixed_world, MeanScore};
        // Mixed world scored by the mean of numerical features; tier flips
        // are the stochastic part.
        let (_schema, cost) = mixed_world();
        let model = MeanScore;
        let mut positives = Vec::new();
        for tier in 0..3 {
            for v in [0.8, 0.9, 1.0] {
                let mut p = Instance::new(vec![
                    FeatureValue::Num(v),
                    FeatureValue::Cat(tier),
                    FeatureValue::Num(0.5),
                ]);
                p.index = Some(positives.len());
                positives.push(p);
            }
        }
        let engine = LookupEngine::new(cost.clone(), positives).unwrap();
        let probe = Instance::new(vec![
            FeatureValue::Num(0.1),
            FeatureValue::Cat(2),
            FeatureValue::Num(0.5),
        ]);
        assert!(model.predict_proba(&probe) < 0.5);
        let report = verify_cost_bound(
            &engine,
            &model,
            &cost,
            &[probe],
            &efforts(&[0.4, 0.7]),
            0.5,
            30,
            1e-9,
            1000,
            31,
        )
        .unwrap();
        assert!(report.all_within, "rows: {:?}", report.rows);
    }

    #[test]
    fn polygon_full_effort_costs_exactly_one() {
        for k in [2, 3, 5] {
            let outcome =
                polygon_monte_carlo(&PolygonScenario::new(k, 1.0, 200), 5).unwrap();
            // One step from the centroid to a vertex; off-axis vertices cost
            // the circumradius up to trig rounding.
            assert!((outcome.mean_relative_cost - 1.0).abs() < 1e-12);
            assert!(outcome.std_err < 1e-12);
            assert_eq!(outcome.consistency, 1.0);
            assert_eq!(outcome.truncated, 0);
        }
    }

    #[test]
    fn two_point_consistency_matches_the_analytic_product() {
        // 3/4 * 7/8 * 15/16 * ... converges to about 0.5776.
        let analytic = two_point_consistency(0.5, 1e-9);
        assert!((analytic - 0.57758).abs() < 1e-4);

        let outcome =
            polygon_monte_carlo(&PolygonScenario::new(2, 0.5, 40_000), 41).unwrap();
        assert!(
            (outcome.consistency - analytic).abs() < 0.01,
            "measured {} analytic {analytic}",
            outcome.consistency
        );
    }

    #[test]
    fn polygon_relative_cost_grows_as_effort_shrinks() {
        let hi = polygon_monte_carlo(&PolygonScenario::new(3, 0.9, 4_000), 43).unwrap();
        let mid = polygon_monte_carlo(&PolygonScenario::new(3, 0.5, 4_000), 43).unwrap();
        let lo = polygon_monte_carlo(&PolygonScenario::new(3, 0.3, 4_000), 43).unwrap();
        assert!(hi.mean_relative_cost < mid.mean_relative_cost);
        assert!(mid.mean_relative_cost < lo.mean_relative_cost);
    }

    #[test]
    fn polygon_csv_has_one_row_per_outcome() {
        let outcomes = vec![
            polygon_monte_carlo(&PolygonScenario::new(2, 1.0, 50), 1).unwrap(),
            polygon_monte_carlo(&PolygonScenario::new(4, 0.5, 50), 2).unwrap(),
        ];
        let mut buf = Vec::new();
        write_polygon_csv(&mut buf, &outcomes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("scenario,u,k,trials"));
        assert!(lines[1].starts_with("polygon_k2,1,2,50,1,0,1,0"));
        assert!(lines[2].starts_with("polygon_k4,0.5,4,50,"));
    }

    fn trajectory_of(points: &[[f64; 2]]) -> Trajectory {
        let states: Vec<Instance> = points.iter().map(|&p| point_instance(p)).collect();
        Trajectory {
            goals: Vec::new(),
            success: false,
            steps: states.len() - 1,
            total_cost: 0.0,
            seed: 0,
            failure: None,
            states,
        }
    }

    #[test]
    fn alternating_states_have_period_two() {
        let a = [0.2, 0.2];
        let b = [0.6, 0.6];
        let tr = trajectory_of(&[a, b, a, b, a, b]);
        assert_eq!(detect_cycle(&tr, 1e-9), Some(2));
    }

    #[test]
    fn converging_and_constant_tails_are_not_cycles() {
        let converging: Vec<[f64; 2]> = (0..12)
            .map(|t| {
                let gap = 0.5f64.powi(t);
                [0.5 + gap, 0.5 - gap]
            })
            .collect();
        let tr = trajectory_of(&converging);
        assert_eq!(detect_cycle(&tr, 1e-6), None);

        let constant = trajectory_of(&[[0.3, 0.3]; 8]);
        assert_eq!(detect_cycle(&constant, 1e-6), None);
    }

    #[test]
    fn cycle_detection_survives_appending_one_more_period() {
        let a = [0.1, 0.5];
        let b = [0.7, 0.5];
        let base: Vec<[f64; 2]> = [a, b].iter().cycle().take(10).cloned().collect();
        let longer: Vec<[f64; 2]> = [a, b].iter().cycle().take(12).cloned().collect();
        assert_eq!(
            detect_cycle(&trajectory_of(&base), 1e-9),
            detect_cycle(&trajectory_of(&longer), 1e-9)
        );
    }

    #[test]
    fn triple_cycle_reports_period_three() {
        let pts = [[0.1, 0.1], [0.5, 0.5], [0.9, 0.1]];
        let states: Vec<[f64; 2]> = pts.iter().cycle().take(12).cloned().collect();
        assert_eq!(detect_cycle(&trajectory_of(&states), 1e-9), Some(3));
    }

    #[test]
    #[ignore]
    fn fixture_freeze() {
        let fixture = find_oscillation_fixture(&OscillationSearch::default()).unwrap();
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/oscillation.json");
        let mut json = serde_json::to_string_pretty(&fixture).unwrap();
        json.push('\n');
        std::fs::write(path, json).unwrap();
    }

    #[test]
    fn frozen_fixture_replays_its_cycle() {
        let fixture = frozen_fixture().unwrap();
        assert_eq!(fixture.period, 2);
        assert_eq!(fixture.u, 0.5);
        assert_eq!(fixture.eps, 0.0);
        let replay = replay_fixture(&fixture).unwrap();

        // Half fulfillment maps the cycle states onto each other.
        let close = |a: [f64; 2], b: [f64; 2]| {
            (a[0] - b[0]).abs() <= 1e-6 && (a[1] - b[1]).abs() <= 1e-6
        };
        assert!(close(replay.from_x1, fixture.x2));
        assert!(close(replay.from_x2, fixture.x1));

        // Both states stay rejected while both recommendations are genuine.
        let (schema, cost) = oscillation_world();
        let model = SyntheticModel::new(schema, fixture.spec.clone()).unwrap();
        assert!(model.predict_proba(&point_instance(fixture.x1)) < 0.5);
        assert!(model.predict_proba(&point_instance(fixture.x2)) < 0.5);
        assert!(model.predict_proba(&replay.goal_at_x1) >= 0.5);
        assert!(model.predict_proba(&replay.goal_at_x2) >= 0.5);

        // A full horizon from x1 never succeeds, cycles with period 2, and
        // pays far more than adopting the recommendation outright.
        assert!(!replay.trajectory.success);
        assert_eq!(detect_cycle(&replay.trajectory, 1e-6), Some(2));
        let one_shot = cost.instance_cost(&point_instance(fixture.x1), &replay.goal_at_x1);
        assert!((one_shot - fixture.one_shot_cost).abs() < 1e-9);
        assert!(replay.trajectory.total_cost >= 5.0 * fixture.one_shot_cost);
    }

    #[test]
    fn default_search_reproduces_the_frozen_fixture() {
        let found = find_oscillation_fixture(&OscillationSearch::default()).unwrap();
        let frozen = frozen_fixture().unwrap();
        assert_eq!(found.x1, frozen.x1);
        assert_eq!(found.x2, frozen.x2);
        assert_eq!(found.default_positive, frozen.default_positive);
        assert_eq!(found.one_shot_cost, frozen.one_shot_cost);
        match (&found.spec, &frozen.spec) {
            (
                SyntheticSpec::RbfMixture { centers: a, .. },
                SyntheticSpec::RbfMixture { centers: b, .. },
            ) => assert_eq!(a, b),
            other => panic!("unexpected spec shapes: {other:?}"),
        }
    }

    #[test]
    fn single_bump_surface_yields_no_cycle() {
        // A unimodal landscape cannot bounce the subject between basins.
        let spec = SyntheticSpec::RbfMixture {
            centers: vec![vec![0.5, 0.5]],
            widths: vec![0.12],
            heights: vec![0.9],
            bias: 0.0,
        };
        for (i, step) in [0.02, 0.05, 0.08].into_iter().enumerate() {
            let ga = GaParams {
                step_size: step,
                ..GaParams::default()
            };
            for j in 0..6 {
                let x0 = [0.15 + 0.12 * j as f64, 0.35 + 0.02 * i as f64];
                assert!(
                    probe_cycle(&spec, &ga, [0.5, 0.5], x0, 30, 1e-6).is_none(),
                    "unexpected cycle from {x0:?} at step {step}"
                );
            }
        }
    }
}

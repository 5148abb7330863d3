//! The iterative partial fulfillment process. A subject below the decision
//! boundary repeatedly asks a counterfactual engine for recommendations,
//! adopts one, moves partway toward it, and stops once the model accepts
//! them or patience runs out. Batches of runs feed the welfare and fairness
//! metrics.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostModel;
use crate::engines::{select, CfEngine, CfRequest, SelectionStrategy};
use crate::fulfillment::{partial_fulfill, EffortLevel};
use crate::models::Scorer;
use crate::rng::{derive_seed, derive_stream};
use crate::tabular::{FeatureKind, Instance, Schema};

/// Acceptance threshold of the process loop. Engines may be asked for a
/// stronger `target_p`, but the subject stops as soon as the model crosses
/// one half.
pub const ACCEPT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("input does not conform to the schema: {0}")]
    BadInput(String),
    #[error("feature {0:?} is not a categorical schema feature")]
    UnknownGroupFeature(String),
    #[error("feature {feature:?} has no category {value:?}")]
    UnknownGroupValue { feature: String, value: String },
    #[error("no common-success runs for group value {0:?}")]
    EmptyGroup(String),
    #[error("parity ratio denominator is zero")]
    ZeroDenominator,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Parameters of one simulated subject population.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IpfConfig {
    /// Fraction of each recommendation fulfilled per round.
    pub u: EffortLevel,
    /// Maximum number of rounds before the subject gives up.
    pub max_steps: usize,
    /// Validity level requested from the engine.
    pub target_p: f64,
    /// Numerical snap tolerance passed to the fulfillment operator.
    pub eps: f64,
    /// How one recommendation is picked from a multi-candidate result.
    pub strategy: SelectionStrategy,
    /// Candidates requested per round; 1 reproduces single-CF behavior.
    pub k: usize,
    /// Stream seed for this run's randomness (flips, engines, selection).
    pub seed: u64,
}

impl IpfConfig {
    pub fn new(u: EffortLevel) -> Self {
        IpfConfig {
            u,
            max_steps: 30,
            target_p: 0.5,
            eps: 1e-9,
            strategy: SelectionStrategy::closest(),
            k: 1,
            seed: 0,
        }
    }

    pub fn with_max_steps(mut self, t: usize) -> Self {
        self.max_steps = t;
        self
    }

    pub fn with_target(mut self, p: f64) -> Self {
        self.target_p = p;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_strategy(mut self, strategy: SelectionStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.max_steps < 1 {
            return Err(SimError::BadConfig("max_steps must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(SimError::BadConfig("k must be at least 1".into()));
        }
        if !(0.5..1.0).contains(&self.target_p) {
            return Err(SimError::BadConfig(format!(
                "target_p {} outside [0.5, 1)",
                self.target_p
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(SimError::BadConfig(format!(
                "eps {} must be nonnegative",
                self.eps
            )));
        }
        Ok(())
    }
}

/// One realized run of the process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Visited states, starting at the input.
    pub states: Vec<Instance>,
    /// The recommendation adopted at each step; one per step taken.
    pub goals: Vec<Instance>,
    /// Whether the final state clears the acceptance threshold.
    pub success: bool,
    pub steps: usize,
    /// Sum of step costs along `states`.
    pub total_cost: f64,
    pub seed: u64,
    /// Why the run stalled before success or the step limit, if it did.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn input(&self) -> &Instance {
        &self.states[0]
    }

    pub fn final_state(&self) -> &Instance {
        self.states.last().expect("states is never empty")
    }

    /// Cost of each individual step, summing to `total_cost`.
    pub fn step_costs(&self, cost: &CostModel) -> Vec<f64> {
        self.states
            .windows(2)
            .map(|w| cost.instance_cost(&w[0], &w[1]))
            .collect()
    }
}

/// Runs one subject from `input` until acceptance, the step limit, or an
/// engine stall. All randomness draws from a stream seeded by `config.seed`.
pub fn run_ipf(
    input: &Instance,
    model: &dyn Scorer,
    engine: &dyn CfEngine,
    cost: &CostModel,
    config: &IpfConfig,
) -> Result<Trajectory, SimError> {
    config.validate()?;
    let schema = cost.schema().clone();
    input
        .conforms(&schema)
        .map_err(|e| SimError::BadInput(e.to_string()))?;

    let mut rng = derive_stream(config.seed, &[]);
    let mut states = vec![input.clone()];
    let mut goals: Vec<Instance> = Vec::new();
    let mut failure = None;
    let mut x = input.clone();

    while model.predict_proba(&x) < ACCEPT_THRESHOLD && goals.len() < config.max_steps {
        let req = CfRequest::new(&x, model)
            .with_target(config.target_p)
            .with_k(config.k);
        let result = match engine.generate(&req, &mut rng) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let goal = match select(&x, &result, config.strategy, cost, &mut rng) {
            Ok(g) => g,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let outcome = match partial_fulfill(&schema, &x, &goal, config.u, config.eps, &mut rng) {
            Ok(o) => o,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        goals.push(goal);
        x = outcome.state;
        states.push(x.clone());
    }

    let success = model.predict_proba(&x) >= ACCEPT_THRESHOLD;
    let total_cost = cost.trajectory_cost(&states);
    Ok(Trajectory {
        steps: goals.len(),
        states,
        goals,
        success,
        total_cost,
        seed: config.seed,
        failure,
    })
}

/// One row of a batch: which input and which config produced the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// The input's dataset row index (list position when absent).
    pub input_id: usize,
    /// Position of the config in the batch's config list.
    pub config_id: usize,
    pub trajectory: Trajectory,
}

/// Runs the full cartesian product of inputs and configs, in parallel.
///
/// Each run's stream seeds from (master seed, input id, config position), so
/// results do not depend on input order or scheduling. Per-run failures are
/// recorded in the trajectories; the batch itself never aborts.
pub fn batch_run(
    inputs: &[Instance],
    model: &dyn Scorer,
    engine: &dyn CfEngine,
    cost: &CostModel,
    configs: &[IpfConfig],
    master_seed: u64,
) -> Vec<RunRecord> {
    let jobs: Vec<(usize, usize)> = (0..inputs.len())
        .flat_map(|i| (0..configs.len()).map(move |j| (i, j)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, j)| {
            let input = &inputs[i];
            let input_id = input.index.unwrap_or(i);
            let config = configs[j]
                .with_seed(derive_seed(master_seed, &[input_id as u64, j as u64]));
            let trajectory = run_ipf(input, model, engine, cost, &config).unwrap_or_else(|e| {
                Trajectory {
                    states: vec![input.clone()],
                    goals: Vec::new(),
                    success: false,
                    steps: 0,
                    total_cost: 0.0,
                    seed: config.seed,
                    failure: Some(e.to_string()),
                }
            });
            RunRecord {
                input_id,
                config_id: j,
                trajectory,
            }
        })
        .collect()
}

/// How a batch's costs are pooled against the one-shot baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeCostMode {
    /// Sum of run costs over the common set divided by the sum of baseline
    /// costs. The default.
    RatioOfMeans,
    /// Mean of per-instance cost ratios; pairs with a zero-cost baseline are
    /// skipped unless the run cost is also zero (ratio 1).
    MeanOfRatios,
}

/// Aggregate metrics of one batch against its full-effort baseline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub success_rate: f64,
    /// Mean trajectory cost over successful runs.
    pub mean_total_cost: Option<f64>,
    /// Mean step count over successful runs.
    pub mean_steps: Option<f64>,
    /// Instances that succeed in both the batch and the baseline.
    pub common_runs: usize,
    /// Batch cost relative to the baseline, pooled over the common set.
    pub relative_cost: Option<f64>,
    /// Set when the common-success set is empty, leaving relative_cost
    /// undefined.
    pub empty_common: bool,
    /// Per-group sub-reports keyed by category label, when requested.
    pub by_group: BTreeMap<String, MetricsReport>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Common-success pairs of (record, baseline record), matched by input id.
fn common_pairs<'a>(
    records: &'a [RunRecord],
    baseline: &'a [RunRecord],
) -> Vec<(&'a RunRecord, &'a RunRecord)> {
    let base: BTreeMap<usize, &RunRecord> =
        baseline.iter().map(|r| (r.input_id, r)).collect();
    records
        .iter()
        .filter(|r| r.trajectory.success)
        .filter_map(|r| base.get(&r.input_id).map(|b| (r, *b)))
        .filter(|(_, b)| b.trajectory.success)
        .collect()
}

fn pooled_relative_cost(
    pairs: &[(&RunRecord, &RunRecord)],
    mode: RelativeCostMode,
) -> Option<f64> {
    match mode {
        RelativeCostMode::RatioOfMeans => {
            let num: f64 = pairs.iter().map(|(r, _)| r.trajectory.total_cost).sum();
            let den: f64 = pairs.iter().map(|(_, b)| b.trajectory.total_cost).sum();
            if den > 0.0 {
                Some(num / den)
            } else if num == 0.0 && !pairs.is_empty() {
                Some(1.0)
            } else {
                None
            }
        }
        RelativeCostMode::MeanOfRatios => mean(pairs.iter().filter_map(|(r, b)| {
            let num = r.trajectory.total_cost;
            let den = b.trajectory.total_cost;
            if den > 0.0 {
                Some(num / den)
            } else if num == 0.0 {
                Some(1.0)
            } else {
                None
            }
        })),
    }
}

/// Summarizes a batch against its u = 1 baseline on the same instances.
/// Success rate and per-success means cover the whole batch; relative cost
/// is pooled over the instances where both the run and its baseline succeed.
pub fn summarize(
    records: &[RunRecord],
    baseline: &[RunRecord],
    mode: RelativeCostMode,
) -> MetricsReport {
    let runs = records.len();
    let successes = records.iter().filter(|r| r.trajectory.success).count();
    let success_rate = if runs == 0 {
        0.0
    } else {
        successes as f64 / runs as f64
    };
    let mean_total_cost = mean(
        records
            .iter()
            .filter(|r| r.trajectory.success)
            .map(|r| r.trajectory.total_cost),
    );
    let mean_steps = mean(
        records
            .iter()
            .filter(|r| r.trajectory.success)
            .map(|r| r.trajectory.steps as f64),
    );
    let pairs = common_pairs(records, baseline);
    let relative_cost = pooled_relative_cost(&pairs, mode);
    MetricsReport {
        runs,
        success_rate,
        mean_total_cost,
        mean_steps,
        common_runs: pairs.len(),
        relative_cost,
        empty_common: pairs.is_empty(),
        by_group: BTreeMap::new(),
    }
}

/// Looks up the category label of `feature_idx` on a record's input.
fn group_label<'a>(schema: &'a Schema, record: &RunRecord, feature_idx: usize) -> &'a str {
    let level = record.trajectory.input().cat(feature_idx);
    &schema.feature(feature_idx).categories[level]
}

fn group_feature_index(schema: &Schema, feature: &str) -> Result<usize, SimError> {
    let idx = schema
        .index_of(feature)
        .ok_or_else(|| SimError::UnknownGroupFeature(feature.to_string()))?;
    if schema.feature(idx).kind != FeatureKind::Categorical {
        return Err(SimError::UnknownGroupFeature(feature.to_string()));
    }
    Ok(idx)
}

/// Like `summarize`, with one sub-report per category of `feature`. Each
/// group's relative cost is computed against that group's own baseline runs.
pub fn summarize_grouped(
    records: &[RunRecord],
    baseline: &[RunRecord],
    mode: RelativeCostMode,
    schema: &Schema,
    feature: &str,
) -> Result<MetricsReport, SimError> {
    let idx = group_feature_index(schema, feature)?;
    let mut report = summarize(records, baseline, mode);
    for label in &schema.feature(idx).categories {
        let sub_records: Vec<RunRecord> = records
            .iter()
            .filter(|r| group_label(schema, r, idx) == label)
            .cloned()
            .collect();
        if sub_records.is_empty() {
            continue;
        }
        let sub_baseline: Vec<RunRecord> = baseline
            .iter()
            .filter(|r| group_label(schema, r, idx) == label)
            .cloned()
            .collect();
        report
            .by_group
            .insert(label.clone(), summarize(&sub_records, &sub_baseline, mode));
    }
    Ok(report)
}

/// Which quantity a parity ratio compares across groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityMetric {
    /// Relative total cost, each group against its own baseline.
    RelativeCost,
    /// Mean step count.
    Steps,
}

/// Disadvantaged-over-advantaged ratio of a metric, restricted to the
/// common-success set. The disadvantaged group is the named category; every
/// other category of the feature forms the advantaged group.
pub fn parity_ratio(
    records: &[RunRecord],
    baseline: &[RunRecord],
    schema: &Schema,
    feature: &str,
    disadvantaged: &str,
    metric: ParityMetric,
    mode: RelativeCostMode,
) -> Result<f64, SimError> {
    let idx = group_feature_index(schema, feature)?;
    let dis_level = schema
        .feature(idx)
        .category_index(disadvantaged)
        .ok_or_else(|| SimError::UnknownGroupValue {
            feature: feature.to_string(),
            value: disadvantaged.to_string(),
        })?;

    let pairs = common_pairs(records, baseline);
    let (dis, adv): (Vec<_>, Vec<_>) = pairs
        .into_iter()
        .partition(|(r, _)| r.trajectory.input().cat(idx) == dis_level);
    if dis.is_empty() {
        return Err(SimError::EmptyGroup(disadvantaged.to_string()));
    }
    if adv.is_empty() {
        return Err(SimError::EmptyGroup(format!("not {disadvantaged}")));
    }

    let (num, den) = match metric {
        ParityMetric::Steps => (
            mean(dis.iter().map(|(r, _)| r.trajectory.steps as f64)),
            mean(adv.iter().map(|(r, _)| r.trajectory.steps as f64)),
        ),
        ParityMetric::RelativeCost => {
            (pooled_relative_cost(&dis, mode), pooled_relative_cost(&adv, mode))
        }
    };
    let num = num.ok_or(SimError::ZeroDenominator)?;
    let den = den.ok_or(SimError::ZeroDenominator)?;
    if den == 0.0 {
        return Err(SimError::ZeroDenominator);
    }
    Ok(num / den)
}

/// Flat per-run record of the JSON-lines trajectory table.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub input_id: usize,
    pub config_id: usize,
    pub u: f64,
    pub engine: String,
    pub strategy: String,
    pub steps: usize,
    pub success: bool,
    pub total_cost: f64,
    /// Cost of each step, in order.
    pub step_costs: Vec<f64>,
    /// Category labels of the schema's group features on the input.
    pub groups: BTreeMap<String, String>,
    pub failure: Option<String>,
}

/// Single-candidate runs have no selection to speak of; multi-candidate
/// runs are labeled by their selection rule.
pub fn strategy_label(config: &IpfConfig) -> String {
    if config.k <= 1 {
        "single".to_string()
    } else {
        format!("{:?}", config.strategy.kind).to_lowercase()
    }
}

/// Writes one JSON object per run. Group columns come from the schema
/// features flagged as group attributes.
pub fn write_trajectories_jsonl<W: Write>(
    mut w: W,
    records: &[RunRecord],
    configs: &[IpfConfig],
    engine_name: &str,
    cost: &CostModel,
) -> Result<(), SimError> {
    let schema = cost.schema();
    let group_features: Vec<usize> = (0..schema.len())
        .filter(|&i| schema.feature(i).group)
        .collect();
    for record in records {
        let config = &configs[record.config_id];
        let mut groups = BTreeMap::new();
        for &gi in &group_features {
            groups.insert(
                schema.feature(gi).name.clone(),
                group_label(schema, record, gi).to_string(),
            );
        }
        let row = TrajectoryRow {
            input_id: record.input_id,
            config_id: record.config_id,
            u: config.u.value(),
            engine: engine_name.to_string(),
            strategy: strategy_label(config),
            steps: record.trajectory.steps,
            success: record.trajectory.success,
            total_cost: record.trajectory.total_cost,
            step_costs: record.trajectory.step_costs(cost),
            groups,
            failure: record.trajectory.failure.clone(),
        };
        let line = serde_json::to_string(&row).map_err(|e| SimError::Serialize(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// One summary line per experimental setup.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub engine: String,
    pub strategy: String,
    pub u: f64,
    pub runs: usize,
    pub success_rate: f64,
    pub mean_steps: Option<f64>,
    pub mean_total_cost: Option<f64>,
    pub common_runs: usize,
    pub relative_cost: Option<f64>,
    /// (split label, cost parity, steps parity) per demographic split.
    pub parities: Vec<(String, Option<f64>, Option<f64>)>,
}

impl SummaryRow {
    pub fn from_report(
        dataset: &str,
        engine: &str,
        strategy: &str,
        u: f64,
        report: &MetricsReport,
    ) -> Self {
        SummaryRow {
            dataset: dataset.to_string(),
            engine: engine.to_string(),
            strategy: strategy.to_string(),
            u,
            runs: report.runs,
            success_rate: report.success_rate,
            mean_steps: report.mean_steps,
            mean_total_cost: report.mean_total_cost,
            common_runs: report.common_runs,
            relative_cost: report.relative_cost,
            parities: Vec::new(),
        }
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the summary table as CSV. All rows must list the same splits in
/// the same order; the split names become header columns.
pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    let splits: Vec<String> = rows
        .first()
        .map(|r| r.parities.iter().map(|(s, _, _)| s.clone()).collect())
        .unwrap_or_default();
    let mut header = vec![
        "dataset".to_string(),
        "engine".to_string(),
        "strategy".to_string(),
        "u".to_string(),
        "runs".to_string(),
        "success_rate".to_string(),
        "mean_steps".to_string(),
        "mean_total_cost".to_string(),
        "common_runs".to_string(),
        "relative_cost".to_string(),
    ];
    for s in &splits {
        header.push(format!("{s}_cost_parity"));
        header.push(format!("{s}_steps_parity"));
    }
    out.write_record(&header).map_err(|e| SimError::Serialize(e.to_string()))?;
    for row in rows {
        let row_splits: Vec<&String> = row.parities.iter().map(|(s, _, _)| s).collect();
        if row_splits.len() != splits.len()
            || row_splits.iter().zip(splits.iter()).any(|(a, b)| *a != b)
        {
            return Err(SimError::Serialize(format!(
                "summary rows disagree on splits: {row_splits:?} vs {splits:?}"
            )));
        }
        let mut cells = vec![
            row.dataset.clone(),
            row.engine.clone(),
            row.strategy.clone(),
            row.u.to_string(),
            row.runs.to_string(),
            row.success_rate.to_string(),
            opt_cell(row.mean_steps),
            opt_cell(row.mean_total_cost),
            row.common_runs.to_string(),
            opt_cell(row.relative_cost),
        ];
        for (_, c, s) in &row.parities {
            cells.push(opt_cell(*c));
            cells.push(opt_cell(*s));
        }
        out.write_record(&cells).map_err(|e| SimError::Serialize(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

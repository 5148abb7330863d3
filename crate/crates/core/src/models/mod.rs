//! Binary probabilistic classifiers: a shared scoring interface, trainable
//! logistic and random-forest models, closed-form synthetic models for theory
//! scenarios, evaluation, and versioned save/load artifacts.

mod forest;
mod logistic;
mod synthetic;

pub use forest::{train_forest, ForestHyper, ForestModel};
pub use logistic::{train_logistic, LogisticHyper, LogisticModel};
pub use synthetic::{SyntheticModel, SyntheticSpec};
pub(crate) use synthetic::polygon_vertices;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{Dataset, Instance};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training partition")]
    EmptyTrain,
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("model has no gradient: {0}")]
    NoGradient(String),
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unknown synthetic family: {0}")]
    UnknownFamily(String),
}

/// A binary probabilistic classifier. A positive prediction is
/// `predict_proba(x) >= 0.5`; probability exactly 0.5 counts as positive.
///
/// Gradients, where available, are taken with respect to the raw values of
/// the numerical features, in schema order (categorical features are skipped,
/// so the vector has one entry per numerical feature).
pub trait Scorer: Send + Sync {
    fn predict_proba(&self, x: &Instance) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    fn gradient(&self, _x: &Instance) -> Result<Vec<f64>, ModelError> {
        Err(ModelError::NoGradient("gradient not implemented".into()))
    }

    fn is_positive(&self, x: &Instance) -> bool {
        self.predict_proba(x) >= 0.5
    }
}

/// Test-set metrics. `degenerate_f1` flags the convention that F1 is reported
/// as 0 when the test part has no actual positives or the model predicts none.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1: f64,
    pub degenerate_f1: bool,
}

/// Accuracy at the 0.5 threshold and F1 on the positive class.
pub fn evaluate(model: &dyn Scorer, test: &Dataset) -> EvalReport {
    assert!(!test.is_empty(), "evaluation needs a nonempty partition");
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fneg = 0usize;
    for (row, &label) in test.rows.iter().zip(test.labels.iter()) {
        let pred = model.is_positive(row);
        match (pred, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let n = test.len() as f64;
    let accuracy = (tp + tn) as f64 / n;
    let degenerate_f1 = tp + fp == 0 || tp + fneg == 0;
    let f1 = if degenerate_f1 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    };
    EvalReport {
        accuracy,
        f1,
        degenerate_f1,
    }
}

/// Any trained or constructed model, for storage and dynamic dispatch.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Synthetic(SyntheticModel),
}

impl Scorer for AnyModel {
    fn predict_proba(&self, x: &Instance) -> f64 {
        match self {
            AnyModel::Logistic(m) => m.predict_proba(x),
            AnyModel::Forest(m) => m.predict_proba(x),
            AnyModel::Synthetic(m) => m.predict_proba(x),
        }
    }

    fn has_gradient(&self) -> bool {
        match self {
            AnyModel::Logistic(m) => m.has_gradient(),
            AnyModel::Forest(m) => m.has_gradient(),
            AnyModel::Synthetic(m) => m.has_gradient(),
        }
    }

    fn gradient(&self, x: &Instance) -> Result<Vec<f64>, ModelError> {
        match self {
            AnyModel::Logistic(m) => m.gradient(x),
            AnyModel::Forest(m) => m.gradient(x),
            AnyModel::Synthetic(m) => m.gradient(x),
        }
    }
}

const ARTIFACT_FORMAT: &str = "ipf-model/1";

#[derive(Serialize, Deserialize)]
struct ModelArtifact {
    format: String,
    model: AnyModel,
}

impl AnyModel {
    /// Writes a versioned JSON artifact (atomically: temp file then rename).
    pub fn save(&self, path: &str) -> Result<(), ModelError> {
        let artifact = ModelArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            model: self.clone(),
        };
        let text = serde_json::to_string(&artifact)
            .map_err(|e| ModelError::Artifact(e.to_string()))?;
        let tmp = format!("{path}.tmp");
        std::fs::write(&tmp, text).map_err(|source| ModelError::Io {
            path: tmp.clone(),
            source,
        })?;
        std::fs::rename(&tmp, path).map_err(|source| ModelError::Io {
            path: path.to_string(),
            source,
        })
    }

    pub fn load(path: &str) -> Result<AnyModel, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_string(),
            source,
        })?;
        let artifact: ModelArtifact =
            serde_json::from_str(&text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if artifact.format != ARTIFACT_FORMAT {
            return Err(ModelError::Artifact(format!(
                "unsupported format {:?} (expected {ARTIFACT_FORMAT:?})",
                artifact.format
            )));
        }
        Ok(artifact.model)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::sync::Arc;

    use crate::tabular::{Dataset, FeatureValue, Instance, Schema};

    /// Builds an all-numerical dataset from raw rows.
    pub fn numeric_dataset(schema: Arc<Schema>, rows: &[(Vec<f64>, bool)]) -> Dataset {
        let (instances, labels) = rows
            .iter()
            .enumerate()
            .map(|(i, (vals, label))| {
                let mut inst =
                    Instance::new(vals.iter().map(|&v| FeatureValue::Num(v)).collect());
                inst.index = Some(i);
                (inst, *label)
            })
            .unzip();
        Dataset {
            schema,
            rows: instances,
            labels,
            groups: vec![],
        }
    }
}

//! Logistic regression over the encoded feature layout, trained by full-batch
//! gradient descent. Deterministic: weights start at zero and the loss is
//! convex, so no seed is involved.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::tabular::{encode, encode_into, encoded_len, Dataset, FeatureKind, Instance, Schema};

use super::{ModelError, Scorer};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper {
            learning_rate: 0.4,
            epochs: 400,
            l2: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogisticModel {
    pub(crate) schema: Arc<Schema>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn raw_score_encoded(&self, enc: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(enc.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

impl Scorer for LogisticModel {
    fn predict_proba(&self, x: &Instance) -> f64 {
        let enc = encode(x, &self.schema);
        sigmoid(self.raw_score_encoded(&enc))
    }

    fn has_gradient(&self) -> bool {
        true
    }

    /// Chain rule through the min-max scaling: the derivative with respect to
    /// a raw numerical value is p(1-p) * w / (hi - lo).
    fn gradient(&self, x: &Instance) -> Result<Vec<f64>, ModelError> {
        let enc = encode(x, &self.schema);
        let p = sigmoid(self.raw_score_encoded(&enc));
        let slope = p * (1.0 - p);
        let mut out = Vec::new();
        let mut pos = 0;
        for f in self.schema.features() {
            match f.kind {
                FeatureKind::Numerical => {
                    let (lo, hi) = f.bounds;
                    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
                    out.push(slope * self.weights[pos] * scale);
                    pos += 1;
                }
                FeatureKind::Categorical => {
                    pos += f.categories.len();
                }
            }
        }
        Ok(out)
    }
}

/// Full-batch gradient descent on the l2-regularized mean log loss.
pub fn train_logistic(
    train: &Dataset,
    hyper: &LogisticHyper,
) -> Result<LogisticModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrain);
    }
    let schema = Arc::clone(&train.schema);
    let dims = encoded_len(&schema);
    let n = train.len() as f64;

    let mut encoded_rows: Vec<Vec<f64>> = Vec::with_capacity(train.len());
    let mut buf = Vec::with_capacity(dims);
    for row in &train.rows {
        encode_into(row, &schema, &mut buf);
        encoded_rows.push(buf.clone());
    }

    let mut weights = vec![0.0; dims];
    let mut bias = 0.0;
    let mut grad_w = vec![0.0; dims];

    let loss_of = |weights: &[f64], bias: f64| -> f64 {
        let mut loss = 0.0;
        for (enc, &label) in encoded_rows.iter().zip(train.labels.iter()) {
            let z = bias
                + weights
                    .iter()
                    .zip(enc.iter())
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            let y = if label { 1.0 } else { 0.0 };
            // Numerically stable log(1 + e^z) - y*z.
            loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        }
        loss / n + 0.5 * hyper.l2 * weights.iter().map(|w| w * w).sum::<f64>()
    };

    let mut last_loss = loss_of(&weights, bias);
    let first_loss = last_loss;
    for epoch in 0..hyper.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (enc, &label) in encoded_rows.iter().zip(train.labels.iter()) {
            let z = bias
                + weights
                    .iter()
                    .zip(enc.iter())
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            let err = sigmoid(z) - if label { 1.0 } else { 0.0 };
            for (g, v) in grad_w.iter_mut().zip(enc.iter()) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(grad_w.iter()) {
            *w -= hyper.learning_rate * (g / n + hyper.l2 * *w);
        }
        bias -= hyper.learning_rate * grad_b / n;

        let loss = loss_of(&weights, bias);
        if !loss.is_finite() {
            return Err(ModelError::Diverged(format!(
                "non-finite loss at epoch {epoch}"
            )));
        }
        last_loss = loss;
    }
    if last_loss > first_loss {
        return Err(ModelError::Diverged(format!(
            "loss rose from {first_loss} to {last_loss}; lower the learning rate"
        )));
    }
    Ok(LogisticModel {
        schema,
        weights,
        bias,
    })
}

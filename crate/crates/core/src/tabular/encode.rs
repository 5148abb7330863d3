//! Dense numeric encoding: one-hot categories, min-max scaled numericals.
//! Models and nearest-neighbor indexes consume this layout.

use super::schema::{FeatureKind, FeatureValue, Schema};
use super::{Instance, TabularError};

/// Length of the encoded vector for `schema`.
pub fn encoded_len(schema: &Schema) -> usize {
    schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Categorical => f.categories.len(),
            FeatureKind::Numerical => 1,
        })
        .sum()
}

/// Encodes into a caller-provided buffer (cleared first). Scaling uses the
/// schema bounds; values outside them extrapolate rather than clamp so that
/// decoding stays exact.
pub fn encode_into(instance: &Instance, schema: &Schema, out: &mut Vec<f64>) {
    out.clear();
    for (i, value) in instance.values.iter().enumerate() {
        let f = schema.feature(i);
        match (f.kind, value) {
            (FeatureKind::Categorical, FeatureValue::Cat(c)) => {
                let start = out.len();
                out.resize(start + f.categories.len(), 0.0);
                out[start + c] = 1.0;
            }
            (FeatureKind::Numerical, FeatureValue::Num(v)) => {
                let (lo, hi) = f.bounds;
                let scaled = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                out.push(scaled);
            }
            _ => panic!("instance does not conform to schema"),
        }
    }
}

pub fn encode(instance: &Instance, schema: &Schema) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoded_len(schema));
    encode_into(instance, schema, &mut out);
    out
}

/// Inverts [`encode`]. One-hot blocks must contain exactly one 1.0; anything
/// else is rejected rather than argmax-repaired.
pub fn decode(encoded: &[f64], schema: &Schema) -> Result<Instance, TabularError> {
    if encoded.len() != encoded_len(schema) {
        return Err(TabularError::Nonconforming(format!(
            "encoded length {} does not match schema length {}",
            encoded.len(),
            encoded_len(schema)
        )));
    }
    let mut values = Vec::with_capacity(schema.len());
    let mut pos = 0;
    for f in schema.features() {
        match f.kind {
            FeatureKind::Categorical => {
                let block = &encoded[pos..pos + f.categories.len()];
                let mut hot = None;
                for (c, &b) in block.iter().enumerate() {
                    if b == 1.0 {
                        if hot.is_some() {
                            return Err(TabularError::Nonconforming(format!(
                                "feature {:?}: multiple hot entries",
                                f.name
                            )));
                        }
                        hot = Some(c);
                    } else if b != 0.0 {
                        return Err(TabularError::Nonconforming(format!(
                            "feature {:?}: non-binary one-hot entry {b}",
                            f.name
                        )));
                    }
                }
                let c = hot.ok_or_else(|| {
                    TabularError::Nonconforming(format!("feature {:?}: no hot entry", f.name))
                })?;
                values.push(FeatureValue::Cat(c));
                pos += f.categories.len();
            }
            FeatureKind::Numerical => {
                let (lo, hi) = f.bounds;
                let v = if hi > lo {
                    lo + encoded[pos] * (hi - lo)
                } else {
                    lo
                };
                values.push(FeatureValue::Num(v));
                pos += 1;
            }
        }
    }
    Ok(Instance::new(values))
}

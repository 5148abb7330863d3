//! Closed-form models for theory scenarios: radial-basis mixtures (smooth,
//! differentiable), regular-polygon vertex indicators, and linear scorers over
//! raw numerical coordinates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::tabular::{FeatureKind, Instance, Schema};

use super::{ModelError, Scorer};

/// Declarative description of a synthetic model, as it appears in experiment
/// configs. Coordinates are raw numerical feature values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SyntheticSpec {
    RbfMixture {
        centers: Vec<Vec<f64>>,
        widths: Vec<f64>,
        heights: Vec<f64>,
        bias: f64,
    },
    PolygonVertices {
        k: usize,
        radius: f64,
        /// Points within this distance of a vertex count as at the vertex.
        snap_eps: f64,
    },
    Linear {
        w: Vec<f64>,
        b: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub(crate) schema: Arc<Schema>,
    spec: SyntheticSpec,
}

impl SyntheticModel {
    /// Validates the spec against an all-numerical domain schema.
    pub fn new(schema: Arc<Schema>, spec: SyntheticSpec) -> Result<Self, ModelError> {
        let dims = schema.len();
        if schema
            .features()
            .iter()
            .any(|f| f.kind != FeatureKind::Numerical)
        {
            return Err(ModelError::UnknownFamily(
                "synthetic models need an all-numerical domain".into(),
            ));
        }
        let ok = match &spec {
            SyntheticSpec::RbfMixture {
                centers,
                widths,
                heights,
                ..
            } => {
                centers.len() == widths.len()
                    && centers.len() == heights.len()
                    && !centers.is_empty()
                    && centers.iter().all(|c| c.len() == dims)
                    && widths.iter().all(|&w| w > 0.0)
            }
            SyntheticSpec::PolygonVertices { k, radius, snap_eps } => {
                dims == 2 && *k >= 2 && *radius > 0.0 && *snap_eps >= 0.0
            }
            SyntheticSpec::Linear { w, .. } => w.len() == dims,
        };
        if !ok {
            return Err(ModelError::UnknownFamily(
                "synthetic spec does not fit the domain schema".into(),
            ));
        }
        Ok(SyntheticModel { schema, spec })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Vertices of the polygon family, counterclockwise from the positive x
    /// axis. Empty for other families.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        match &self.spec {
            SyntheticSpec::PolygonVertices { k, radius, .. } => polygon_vertices(*k, *radius),
            _ => Vec::new(),
        }
    }

    fn raw(&self, x: &Instance) -> Vec<f64> {
        x.values.iter().map(|v| v.as_num()).collect()
    }

    /// The unclamped surface value; probabilities clamp this to [0, 1].
    fn surface(&self, x: &[f64]) -> f64 {
        match &self.spec {
            SyntheticSpec::RbfMixture {
                centers,
                widths,
                heights,
                bias,
            } => {
                let mut v = *bias;
                for ((c, &w), &h) in centers.iter().zip(widths.iter()).zip(heights.iter()) {
                    let r2: f64 = c.iter().zip(x.iter()).map(|(ci, xi)| (xi - ci) * (xi - ci)).sum();
                    v += h * (-r2 / (2.0 * w * w)).exp();
                }
                v
            }
            SyntheticSpec::PolygonVertices { k, radius, snap_eps } => {
                let near = polygon_vertices(*k, *radius).into_iter().any(|v| {
                    let d = ((x[0] - v[0]).powi(2) + (x[1] - v[1]).powi(2)).sqrt();
                    d <= *snap_eps
                });
                if near {
                    1.0
                } else {
                    0.0
                }
            }
            SyntheticSpec::Linear { w, b } => {
                let z: f64 = b + w.iter().zip(x.iter()).map(|(wi, xi)| wi * xi).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            }
        }
    }
}

pub(crate) fn polygon_vertices(k: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..k)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / k as f64;
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect()
}

impl Scorer for SyntheticModel {
    fn predict_proba(&self, x: &Instance) -> f64 {
        self.surface(&self.raw(x)).clamp(0.0, 1.0)
    }

    fn has_gradient(&self) -> bool {
        matches!(
            self.spec,
            SyntheticSpec::RbfMixture { .. } | SyntheticSpec::Linear { .. }
        )
    }

    /// Gradient of the unclamped surface in raw coordinates.
    fn gradient(&self, x: &Instance) -> Result<Vec<f64>, ModelError> {
        let raw = self.raw(x);
        match &self.spec {
            SyntheticSpec::RbfMixture {
                centers,
                widths,
                heights,
                ..
            } => {
                let mut grad = vec![0.0; raw.len()];
                for ((c, &w), &h) in centers.iter().zip(widths.iter()).zip(heights.iter()) {
                    let r2: f64 = c
                        .iter()
                        .zip(raw.iter())
                        .map(|(ci, xi)| (xi - ci) * (xi - ci))
                        .sum();
                    let e = (-r2 / (2.0 * w * w)).exp();
                    for (g, (ci, xi)) in grad.iter_mut().zip(c.iter().zip(raw.iter())) {
                        *g += -h * e * (xi - ci) / (w * w);
                    }
                }
                Ok(grad)
            }
            SyntheticSpec::Linear { w, b } => {
                let z: f64 = b + w.iter().zip(raw.iter()).map(|(wi, xi)| wi * xi).sum::<f64>();
                let p = 1.0 / (1.0 + (-z).exp());
                Ok(w.iter().map(|wi| p * (1.0 - p) * wi).collect())
            }
            SyntheticSpec::PolygonVertices { .. } => Err(ModelError::NoGradient(
                "vertex indicator is not differentiable".into(),
            )),
        }
    }
}

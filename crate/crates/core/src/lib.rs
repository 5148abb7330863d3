//! Simulation laboratory for iterative partial fulfillment (IPF) of
//! counterfactual explanations.
//!
//! The library covers the full loop: tabular data with per-feature empirical
//! statistics, binary probabilistic classifiers, the improvement-cost metric,
//! the partial-fulfillment operator, a suite of counterfactual generation
//! engines, the IPF process with welfare and fairness metrics, and executable
//! benches for the stability and oscillation results.

pub mod cost;
pub mod engines;
pub mod fulfillment;
pub mod models;
pub mod rng;
pub mod sim;
pub mod tabular;
pub mod theory;

pub use cost::CostModel;
pub use engines::{CfEngine, CfRequest, CfResult, SelectionStrategy};
pub use fulfillment::EffortLevel;
pub use models::Scorer;
pub use sim::{IpfConfig, MetricsReport, Trajectory};
pub use tabular::{Dataset, FeatureSchema, FeatureStats, FeatureValue, Instance, Schema};
pub use theory::{OscillationFixture, PolygonScenario, StabilityCertificate};

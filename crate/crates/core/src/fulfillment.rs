//! Partial fulfillment: given a recommendation, a user moves a fraction `u` of
//! the way. Numerical features interpolate (with a snap-to-goal tolerance for
//! near-complete changes); categorical features flip independently with
//! probability `u`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{FeatureKind, FeatureValue, Instance, Schema};

#[derive(Debug, Error)]
pub enum FulfillmentError {
    #[error("effort level {0} outside [0, 1]")]
    InvalidEffort(f64),
    #[error("instances do not share the schema: {0}")]
    SchemaMismatch(String),
    #[error("support enumeration over {differing} differing categorical features exceeds the 2^20 guard")]
    SupportExplosion { differing: usize },
    #[error("effort grid is empty")]
    EmptyGrid,
}

/// Fraction of a recommendation fulfilled per round, in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffortLevel(f64);

impl EffortLevel {
    pub fn new(u: f64) -> Result<Self, FulfillmentError> {
        if !(0.0..=1.0).contains(&u) || u.is_nan() {
            return Err(FulfillmentError::InvalidEffort(u));
        }
        Ok(EffortLevel(u))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for EffortLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of one fulfillment step.
#[derive(Clone, Debug)]
pub struct FulfillmentOutcome {
    pub state: Instance,
    /// Indices of categorical features that flipped this step.
    pub flipped: Vec<usize>,
}

fn check_pair(schema: &Schema, x: &Instance, goal: &Instance) -> Result<(), FulfillmentError> {
    x.conforms(schema)
        .and_then(|_| goal.conforms(schema))
        .map_err(|e| FulfillmentError::SchemaMismatch(e.to_string()))
}

/// One numerical component: snap to the goal when the remaining gap is within
/// `eps`, otherwise move fraction `u` of the way. The `u = 0` and `u = 1`
/// endpoints return the operands bitwise.
fn fulfill_num(x: f64, goal: f64, u: f64, eps: f64) -> f64 {
    if (x - goal).abs() <= eps {
        return goal;
    }
    if u == 0.0 {
        x
    } else if u == 1.0 {
        goal
    } else {
        // Anchoring at the goal keeps the remaining gap an exact rescale of
        // the previous gap whenever the arithmetic is representable.
        goal + (1.0 - u) * (x - goal)
    }
}

/// Moves `x` fraction `u` of the way toward `goal`. One random draw per
/// differing categorical feature, taken in schema order.
pub fn partial_fulfill(
    schema: &Schema,
    x: &Instance,
    goal: &Instance,
    u: EffortLevel,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FulfillmentOutcome, FulfillmentError> {
    check_pair(schema, x, goal)?;
    let u = u.value();
    let mut values = Vec::with_capacity(schema.len());
    let mut flipped = Vec::new();
    for (i, (a, b)) in x.values.iter().zip(goal.values.iter()).enumerate() {
        match schema.feature(i).kind {
            FeatureKind::Numerical => {
                values.push(FeatureValue::Num(fulfill_num(a.as_num(), b.as_num(), u, eps)));
            }
            FeatureKind::Categorical => {
                if a.as_cat() == b.as_cat() {
                    values.push(*a);
                } else if rng.gen::<f64>() < u {
                    values.push(*b);
                    flipped.push(i);
                } else {
                    values.push(*a);
                }
            }
        }
    }
    Ok(FulfillmentOutcome {
        state: Instance::new(values),
        flipped,
    })
}

/// Finite approximation of the set of reachable one-step states: for each
/// effort level in `u_grid`, the numerical interpolation crossed with every
/// categorical flip subset that has positive probability at that level.
/// Deduplicated, deterministic order.
pub fn support(
    schema: &Schema,
    x: &Instance,
    goal: &Instance,
    u_grid: &[EffortLevel],
    eps: f64,
) -> Result<Vec<Instance>, FulfillmentError> {
    check_pair(schema, x, goal)?;
    if u_grid.is_empty() {
        return Err(FulfillmentError::EmptyGrid);
    }
    let differing: Vec<usize> = (0..schema.len())
        .filter(|&i| {
            schema.feature(i).kind == FeatureKind::Categorical
                && x.values[i].as_cat() != goal.values[i].as_cat()
        })
        .collect();
    if differing.len() > 20 {
        return Err(FulfillmentError::SupportExplosion {
            differing: differing.len(),
        });
    }

    let mut out: Vec<Instance> = Vec::new();
    let mut push_unique = |inst: Instance| {
        if !out.iter().any(|seen| seen == &inst) {
            out.push(inst);
        }
    };

    for u in u_grid {
        let u = u.value();
        let mut base = Vec::with_capacity(schema.len());
        for (i, (a, b)) in x.values.iter().zip(goal.values.iter()).enumerate() {
            match schema.feature(i).kind {
                FeatureKind::Numerical => {
                    base.push(FeatureValue::Num(fulfill_num(a.as_num(), b.as_num(), u, eps)));
                }
                FeatureKind::Categorical => base.push(*a),
            }
        }
        // Flip subsets with positive probability: only the full set at u = 1,
        // only the empty set at u = 0, every subset in between.
        let masks: Box<dyn Iterator<Item = u32>> = if u == 1.0 {
            Box::new(std::iter::once((1u32 << differing.len()) - 1))
        } else if u == 0.0 {
            Box::new(std::iter::once(0))
        } else {
            Box::new(0..(1u32 << differing.len()))
        };
        for mask in masks {
            let mut values = base.clone();
            for (bit, &fi) in differing.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    values[fi] = goal.values[fi];
                }
            }
            push_unique(Instance::new(values));
        }
    }
    Ok(out)
}

/// Fulfilled fraction after `rounds` rounds of effort `u` toward a fixed goal:
/// `1 - (1-u)^rounds`.
pub fn effort_progress(u: EffortLevel, rounds: u32) -> f64 {
    1.0 - (1.0 - u.value()).powi(rounds as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::tabular::FeatureSchema;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::new(vec![
            FeatureSchema::numerical("a", 0.0, 100.0, true),
            FeatureSchema::numerical("b", 0.0, 100.0, true),
            FeatureSchema::categorical("c", &["p", "q", "r"], true),
            FeatureSchema::categorical("d", &["s", "t"], true),
        ])
        .unwrap()
    }

    fn inst(a: f64, b: f64, c: usize, d: usize) -> Instance {
        Instance::new(vec![
            FeatureValue::Num(a),
            FeatureValue::Num(b),
            FeatureValue::Cat(c),
            FeatureValue::Cat(d),
        ])
    }

    #[test]
    fn numerical_interpolation() {
        let s = schema();
        let mut rng = derive_stream(1, &[]);
        let u = EffortLevel::new(0.3).unwrap();
        let out = partial_fulfill(&s, &inst(10.0, 5.0, 0, 0), &inst(20.0, 5.0, 0, 0), u, 0.0, &mut rng)
            .unwrap();
        assert_eq!(out.state.num(0), 13.0);
        assert_eq!(out.state.num(1), 5.0);
        assert!(out.flipped.is_empty());
    }

    #[test]
    fn snap_tolerance_completes_small_gaps() {
        let s = schema();
        let mut rng = derive_stream(1, &[]);
        let u = EffortLevel::new(0.3).unwrap();
        let out = partial_fulfill(&s, &inst(19.8, 0.0, 0, 0), &inst(20.0, 0.0, 0, 0), u, 0.5, &mut rng)
            .unwrap();
        assert_eq!(out.state.num(0), 20.0);
    }

    #[test]
    fn full_effort_reaches_goal_for_any_stream() {
        let s = schema();
        let u = EffortLevel::new(1.0).unwrap();
        let x = inst(1.0, 2.0, 0, 0);
        let goal = inst(9.0, 2.5, 2, 1);
        for seed in 0..20 {
            let mut rng = derive_stream(seed, &[]);
            let out = partial_fulfill(&s, &x, &goal, u, 0.0, &mut rng).unwrap();
            assert_eq!(out.state, goal);
            assert_eq!(out.flipped, vec![2, 3]);
        }
    }

    #[test]
    fn zero_effort_keeps_everything() {
        let s = schema();
        let u = EffortLevel::new(0.0).unwrap();
        let x = inst(1.0, 2.0, 1, 0);
        let goal = inst(9.0, 2.5, 2, 1);
        for seed in 0..20 {
            let mut rng = derive_stream(seed, &[]);
            let out = partial_fulfill(&s, &x, &goal, u, 0.0, &mut rng).unwrap();
            assert_eq!(out.state, x);
            assert!(out.flipped.is_empty());
        }
    }

    #[test]
    fn flip_frequency_matches_effort() {
        let s = schema();
        let x = inst(0.0, 0.0, 0, 0);
        let goal = inst(0.0, 0.0, 1, 0);
        let u = EffortLevel::new(0.3).unwrap();
        let mut rng = derive_stream(77, &[]);
        let mut flips = 0;
        for _ in 0..10_000 {
            let out = partial_fulfill(&s, &x, &goal, u, 0.0, &mut rng).unwrap();
            if out.state.cat(2) == 1 {
                flips += 1;
            }
        }
        let freq = flips as f64 / 10_000.0;
        assert!((freq - 0.3).abs() < 0.02, "flip frequency {freq}");
    }

    #[test]
    fn effort_validation() {
        assert!(EffortLevel::new(-0.1).is_err());
        assert!(EffortLevel::new(1.1).is_err());
        assert!(EffortLevel::new(f64::NAN).is_err());
        assert!(EffortLevel::new(0.0).is_ok());
        assert!(EffortLevel::new(1.0).is_ok());
    }

    #[test]
    fn support_counts() {
        let s = schema();
        let half = [EffortLevel::new(0.5).unwrap()];
        // All-numerical difference: single midpoint.
        let pts = support(&s, &inst(0.0, 0.0, 0, 0), &inst(10.0, 4.0, 0, 0), &half, 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].num(0), 5.0);
        assert_eq!(pts[0].num(1), 2.0);
        // Two differing categorical features: four subsets.
        let pts = support(&s, &inst(0.0, 0.0, 0, 0), &inst(0.0, 0.0, 1, 1), &half, 0.0).unwrap();
        assert_eq!(pts.len(), 4);
        // Full effort: only the goal has positive probability.
        let one = [EffortLevel::new(1.0).unwrap()];
        let goal = inst(10.0, 4.0, 1, 1);
        let pts = support(&s, &inst(0.0, 0.0, 0, 0), &goal, &one, 0.0).unwrap();
        assert_eq!(pts, vec![goal]);
        // Zero effort: only the input.
        let zero = [EffortLevel::new(0.0).unwrap()];
        let x = inst(0.0, 0.0, 0, 0);
        let pts = support(&s, &x, &inst(10.0, 4.0, 1, 1), &zero, 0.0).unwrap();
        assert_eq!(pts, vec![x]);
    }

    #[test]
    fn support_deduplicates_across_grid() {
        let s = schema();
        let grid: Vec<EffortLevel> = [0.3, 0.6].iter().map(|&u| EffortLevel::new(u).unwrap()).collect();
        // No numerical difference: the categorical subsets coincide at both levels.
        let pts = support(&s, &inst(1.0, 1.0, 0, 0), &inst(1.0, 1.0, 1, 0), &grid, 0.0).unwrap();
        assert_eq!(pts.len(), 2);
    }

    #[test]
    fn support_explosion_guard() {
        let features: Vec<FeatureSchema> = (0..21)
            .map(|i| FeatureSchema::categorical(&format!("c{i}"), &["a", "b"], true))
            .collect();
        let s = Schema::new(features).unwrap();
        let x = Instance::new(vec![FeatureValue::Cat(0); 21]);
        let goal = Instance::new(vec![FeatureValue::Cat(1); 21]);
        let grid = [EffortLevel::new(0.5).unwrap()];
        assert!(matches!(
            support(&s, &x, &goal, &grid, 0.0),
            Err(FulfillmentError::SupportExplosion { differing: 21 })
        ));
    }

    #[test]
    fn progress_after_rounds() {
        let u = EffortLevel::new(0.1).unwrap();
        assert!((effort_progress(u, 30) - 0.958).abs() < 5e-4);
        assert_eq!(effort_progress(EffortLevel::new(1.0).unwrap(), 1), 1.0);
        assert_eq!(effort_progress(EffortLevel::new(0.5).unwrap(), 2), 0.75);
        assert_eq!(effort_progress(u, 0), 0.0);
    }

    #[test]
    fn snapping_is_idempotent_at_full_effort() {
        let s = schema();
        let x = inst(3.0, 1.0, 0, 1);
        let goal = inst(8.0, 2.0, 2, 0);
        let u = EffortLevel::new(1.0).unwrap();
        let mut rng = derive_stream(5, &[]);
        let once = partial_fulfill(&s, &x, &goal, u, 0.0, &mut rng).unwrap().state;
        let twice = partial_fulfill(&s, &once, &goal, u, 0.0, &mut rng).unwrap().state;
        assert_eq!(once, goal);
        assert_eq!(twice, goal);
    }

    proptest! {
        #[test]
        fn numerical_outputs_stay_on_the_segment(x in -1e9f64..1e9, g in -1e9f64..1e9,
                                                 u in 0.0f64..=1.0) {
            let w = fulfill_num(x, g, u, 0.0);
            prop_assert!(w >= x.min(g) && w <= x.max(g));
        }

        #[test]
        fn remaining_gap_rescales_exactly_on_dyadic_inputs(kx in -262_144i64..262_144,
                                                           kg in -262_144i64..262_144,
                                                           ui in 0usize..5) {
            // Dyadic values and quarter-step efforts make every intermediate
            // product exactly representable, so equality is exact.
            let x = kx as f64 / 256.0;
            let g = kg as f64 / 256.0;
            let u = [0.0, 0.25, 0.5, 0.75, 1.0][ui];
            let w = fulfill_num(x, g, u, 0.0);
            prop_assert_eq!((w - g).abs(), (1.0 - u) * (x - g).abs());
        }
    }
}

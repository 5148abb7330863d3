//! Feature schemas and the TOML schema-config format that drives ingestion.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TabularError;

/// One cell of an instance. Categorical values are indices into the feature's
/// category list; numerical values are raw (unscaled) f64.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Cat(usize),
    Num(f64),
}

impl FeatureValue {
    pub fn as_num(&self) -> f64 {
        match self {
            FeatureValue::Num(v) => *v,
            FeatureValue::Cat(_) => panic!("categorical value where numerical expected"),
        }
    }

    pub fn as_cat(&self) -> usize {
        match self {
            FeatureValue::Cat(c) => *c,
            FeatureValue::Num(_) => panic!("numerical value where categorical expected"),
        }
    }

    /// Total order used for canonical tie-breaking: category index order for
    /// categorical, `total_cmp` for numerical.
    pub fn canonical_cmp(&self, other: &FeatureValue) -> Ordering {
        match (self, other) {
            (FeatureValue::Cat(a), FeatureValue::Cat(b)) => a.cmp(b),
            (FeatureValue::Num(a), FeatureValue::Num(b)) => a.total_cmp(b),
            _ => panic!("comparing values of different kinds"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Numerical,
}

/// Declared and inferred properties of a single feature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Category labels, in canonical order. Empty for numerical features.
    pub categories: Vec<String>,
    /// Observed or declared value range. `(0.0, 0.0)` placeholder for categorical.
    pub bounds: (f64, f64),
    /// Whether a counterfactual engine may propose changes to this feature.
    pub actionable: bool,
    /// Whether this feature doubles as a demographic group column.
    pub group: bool,
}

impl FeatureSchema {
    pub fn categorical(name: &str, categories: &[&str], actionable: bool) -> Self {
        FeatureSchema {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            bounds: (0.0, 0.0),
            actionable,
            group: false,
        }
    }

    pub fn numerical(name: &str, min: f64, max: f64, actionable: bool) -> Self {
        FeatureSchema {
            name: name.to_string(),
            kind: FeatureKind::Numerical,
            categories: Vec::new(),
            bounds: (min, max),
            actionable,
            group: false,
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Validated feature list with name lookup. Feature order is fixed at
/// construction and is the canonical column order everywhere downstream.
#[derive(Clone, Debug)]
pub struct Schema {
    features: Vec<FeatureSchema>,
    by_name: HashMap<String, usize>,
}

/// Serialized form is the feature list alone; deserialization revalidates and
/// rebuilds the name lookup.
impl Serialize for Schema {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.features.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let features = Vec::<FeatureSchema>::deserialize(deserializer)?;
        Schema::new(features).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self, TabularError> {
        if features.is_empty() {
            return Err(TabularError::InvalidSchema("no features".into()));
        }
        let mut by_name = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if by_name.insert(f.name.clone(), i).is_some() {
                return Err(TabularError::InvalidSchema(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            match f.kind {
                FeatureKind::Categorical => {
                    if f.categories.len() < 2 {
                        return Err(TabularError::InvalidSchema(format!(
                            "feature {:?} has fewer than two categories",
                            f.name
                        )));
                    }
                    let mut seen = std::collections::HashSet::new();
                    for c in &f.categories {
                        if !seen.insert(c) {
                            return Err(TabularError::InvalidSchema(format!(
                                "feature {:?} repeats category {:?}",
                                f.name, c
                            )));
                        }
                    }
                }
                FeatureKind::Numerical => {
                    if !(f.bounds.0 <= f.bounds.1) {
                        return Err(TabularError::InvalidSchema(format!(
                            "feature {:?} has inverted bounds {:?}",
                            f.name, f.bounds
                        )));
                    }
                }
            }
        }
        Ok(Schema { features, by_name })
    }

    /// Convenience constructor for purely numerical domains.
    pub fn numeric(specs: &[(&str, f64, f64)]) -> Self {
        let features = specs
            .iter()
            .map(|(name, lo, hi)| FeatureSchema::numerical(name, *lo, *hi, true))
            .collect();
        Schema::new(features).expect("numeric schema specs must be valid")
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, i: usize) -> &FeatureSchema {
        &self.features[i]
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }
}

fn default_true() -> bool {
    true
}

/// Per-feature record in a TOML schema config.
#[derive(Clone, Debug, Deserialize)]
pub struct FeatureConfig {
    pub name: String,
    pub kind: FeatureKind,
    /// Declared category list. When absent, categories are inferred from the
    /// data in lexicographic order.
    #[serde(default)]
    pub categories: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub actionable: bool,
    #[serde(default)]
    pub group: bool,
}

/// Ingestion contract for one CSV shape: the label column, which of its values
/// maps to the positive class, and the expected feature columns.
#[derive(Clone, Debug, Deserialize)]
pub struct SchemaConfig {
    pub label: String,
    pub positive: String,
    #[serde(rename = "feature")]
    pub features: Vec<FeatureConfig>,
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self, TabularError> {
        let cfg: SchemaConfig =
            toml::from_str(text).map_err(|e| TabularError::Config(e.to_string()))?;
        if cfg.features.is_empty() {
            return Err(TabularError::Config("no [[feature]] entries".into()));
        }
        if cfg.features.iter().any(|f| f.name == cfg.label) {
            return Err(TabularError::Config(
                "label column also declared as a feature".into(),
            ));
        }
        Ok(cfg)
    }
}

//! Dataset container, CSV ingestion against a schema config, and seeded splits.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::derive_stream;

use super::schema::{FeatureConfig, FeatureKind, FeatureSchema, FeatureValue, Schema, SchemaConfig};
use super::TabularError;

/// A single row. `index` is the 0-based position in the originally ingested
/// file and survives splits, so downstream artifacts can name rows stably.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<FeatureValue>,
    pub index: Option<usize>,
}

/// Equality compares feature values only; provenance indices are metadata.
impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Instance {
    pub fn new(values: Vec<FeatureValue>) -> Self {
        Instance {
            values,
            index: None,
        }
    }

    pub fn num(&self, i: usize) -> f64 {
        self.values[i].as_num()
    }

    pub fn cat(&self, i: usize) -> usize {
        self.values[i].as_cat()
    }

    pub fn conforms(&self, schema: &Schema) -> Result<(), TabularError> {
        if self.values.len() != schema.len() {
            return Err(TabularError::Nonconforming(format!(
                "expected {} values, got {}",
                schema.len(),
                self.values.len()
            )));
        }
        for (i, v) in self.values.iter().enumerate() {
            let f = schema.feature(i);
            match (f.kind, v) {
                (FeatureKind::Categorical, FeatureValue::Cat(c)) => {
                    if *c >= f.categories.len() {
                        return Err(TabularError::Nonconforming(format!(
                            "feature {:?}: category index {} out of range",
                            f.name, c
                        )));
                    }
                }
                (FeatureKind::Numerical, FeatureValue::Num(x)) => {
                    if !x.is_finite() {
                        return Err(TabularError::Nonconforming(format!(
                            "feature {:?}: non-finite value",
                            f.name
                        )));
                    }
                }
                _ => {
                    return Err(TabularError::Nonconforming(format!(
                        "feature {:?}: kind mismatch",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable cell value, e.g. for audit records.
    pub fn display_value(&self, schema: &Schema, i: usize) -> String {
        match self.values[i] {
            FeatureValue::Cat(c) => schema.feature(i).categories[c].clone(),
            FeatureValue::Num(v) => format_num(v),
        }
    }
}

pub(crate) fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// A demographic column carried alongside the rows (always sourced from a
/// feature flagged `group = true` in the schema config).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupColumn {
    pub name: String,
    /// Raw category label per row, parallel to `rows`.
    pub values: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: Arc<Schema>,
    pub rows: Vec<Instance>,
    pub labels: Vec<bool>,
    pub groups: Vec<GroupColumn>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        let pos = self.labels.iter().filter(|&&l| l).count();
        pos as f64 / self.labels.len().max(1) as f64
    }

    /// Group membership for a row of one group column, looked up by name.
    pub fn group_value(&self, group: &str, row: usize) -> Option<&str> {
        self.groups
            .iter()
            .find(|g| g.name == group)
            .map(|g| g.values[row].as_str())
    }
}

/// Loads a CSV file against a schema config. The header must contain exactly
/// the declared feature columns plus the label column, in any order. Rows with
/// missing cells, unparsable numbers, undeclared categories, or non-binary
/// labels are rejected with an error naming the offending row.
pub fn load_csv(path: &str, config: &SchemaConfig) -> Result<Dataset, TabularError> {
    let text = std::fs::read_to_string(path).map_err(|source| TabularError::Io {
        path: path.to_string(),
        source,
    })?;
    load_csv_str(&text, config)
}

/// As [`load_csv`], from in-memory CSV text.
pub fn load_csv_str(text: &str, config: &SchemaConfig) -> Result<Dataset, TabularError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let col_of = |name: &str| headers.iter().position(|h| h == name);

    let mut feature_cols = Vec::with_capacity(config.features.len());
    for f in &config.features {
        let col = col_of(&f.name).ok_or_else(|| {
            TabularError::ColumnMismatch(format!("declared column {:?} missing from header", f.name))
        })?;
        feature_cols.push(col);
    }
    let label_col = col_of(&config.label).ok_or_else(|| {
        TabularError::ColumnMismatch(format!("label column {:?} missing from header", config.label))
    })?;
    let expected = config.features.len() + 1;
    if headers.len() != expected {
        return Err(TabularError::ColumnMismatch(format!(
            "header has {} columns, schema config declares {}",
            headers.len(),
            expected
        )));
    }

    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(TabularError::EmptyPartition("no data rows".into()));
    }

    // First pass: infer undeclared categories (lexicographic order for
    // determinism under row reordering) and observed numerical bounds.
    let mut inferred: Vec<std::collections::BTreeSet<String>> =
        vec![Default::default(); config.features.len()];
    let mut bounds: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); config.features.len()];
    for (r, record) in records.iter().enumerate() {
        for (fi, f) in config.features.iter().enumerate() {
            let cell = cell_of(record, feature_cols[fi], r, &f.name)?;
            match f.kind {
                FeatureKind::Categorical => {
                    if f.categories.is_none() {
                        inferred[fi].insert(cell.to_string());
                    }
                }
                FeatureKind::Numerical => {
                    let v = parse_num(cell, r, &f.name)?;
                    bounds[fi].0 = bounds[fi].0.min(v);
                    bounds[fi].1 = bounds[fi].1.max(v);
                }
            }
        }
    }

    let mut features = Vec::with_capacity(config.features.len());
    for (fi, f) in config.features.iter().enumerate() {
        features.push(build_feature(f, &inferred[fi], bounds[fi])?);
    }
    let schema = Arc::new(Schema::new(features)?);

    // Second pass: materialize rows and labels against the finalized schema.
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut label_values: Vec<String> = Vec::new();
    for (r, record) in records.iter().enumerate() {
        let mut values = Vec::with_capacity(schema.len());
        for fi in 0..schema.len() {
            let f = schema.feature(fi);
            let cell = cell_of(record, feature_cols[fi], r, &f.name)?;
            let value = match f.kind {
                FeatureKind::Categorical => {
                    let c = f.category_index(cell).ok_or_else(|| TabularError::UnknownCategory {
                        row: r,
                        column: f.name.clone(),
                        cell: cell.to_string(),
                    })?;
                    FeatureValue::Cat(c)
                }
                FeatureKind::Numerical => FeatureValue::Num(parse_num(cell, r, &f.name)?),
            };
            values.push(value);
        }
        let label_cell = cell_of(record, label_col, r, &config.label)?;
        if !label_values.iter().any(|l| l == label_cell) {
            label_values.push(label_cell.to_string());
        }
        labels.push(label_cell == config.positive);
        rows.push(Instance {
            values,
            index: Some(r),
        });
    }

    if label_values.len() > 2 || !label_values.iter().any(|l| l == &config.positive) {
        return Err(TabularError::NonBinaryLabel {
            column: config.label.clone(),
            seen: label_values,
        });
    }

    let groups = config
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.group)
        .map(|(fi, f)| GroupColumn {
            name: f.name.clone(),
            values: rows
                .iter()
                .map(|row| schema.feature(fi).categories[row.cat(fi)].clone())
                .collect(),
        })
        .collect();

    Ok(Dataset {
        schema,
        rows,
        labels,
        groups,
    })
}

fn cell_of<'a>(
    record: &'a csv::StringRecord,
    col: usize,
    row: usize,
    column: &str,
) -> Result<&'a str, TabularError> {
    let cell = record.get(col).unwrap_or("");
    if cell.is_empty() || cell == "?" {
        return Err(TabularError::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    Ok(cell)
}

fn parse_num(cell: &str, row: usize, column: &str) -> Result<f64, TabularError> {
    let v: f64 = cell.parse().map_err(|_| TabularError::BadNumber {
        row,
        column: column.to_string(),
        cell: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(TabularError::BadNumber {
            row,
            column: column.to_string(),
            cell: cell.to_string(),
        });
    }
    Ok(v)
}

fn build_feature(
    f: &FeatureConfig,
    inferred: &std::collections::BTreeSet<String>,
    bounds: (f64, f64),
) -> Result<FeatureSchema, TabularError> {
    let schema = match f.kind {
        FeatureKind::Categorical => {
            let categories = match &f.categories {
                Some(declared) => declared.clone(),
                None => inferred.iter().cloned().collect(),
            };
            FeatureSchema {
                name: f.name.clone(),
                kind: FeatureKind::Categorical,
                categories,
                bounds: (0.0, 0.0),
                actionable: f.actionable,
                group: f.group,
            }
        }
        FeatureKind::Numerical => FeatureSchema {
            name: f.name.clone(),
            kind: FeatureKind::Numerical,
            categories: Vec::new(),
            bounds,
            actionable: f.actionable,
            group: f.group,
        },
    };
    Ok(schema)
}

/// Splits a dataset into train and test parts. The test part receives
/// `floor(n * test_fraction)` rows chosen by a seeded Fisher-Yates shuffle;
/// within each part rows keep ascending original order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), TabularError> {
    let n = data.len();
    let n_test = (n as f64 * test_fraction).floor() as usize;
    if n_test == 0 || n_test == n {
        return Err(TabularError::EmptyPartition(format!(
            "test_fraction {test_fraction} of {n} rows leaves an empty side"
        )));
    }

    // Domain tag keeps the split stream independent from other consumers of
    // the same experiment seed.
    const SPLIT_TAG: u64 = 0x73706c6974;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = derive_stream(seed, &[SPLIT_TAG]);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut test_idx: Vec<usize> = order[..n_test].to_vec();
    let mut train_idx: Vec<usize> = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    Ok((take(data, &train_idx), take(data, &test_idx)))
}

fn take(data: &Dataset, idx: &[usize]) -> Dataset {
    Dataset {
        schema: Arc::clone(&data.schema),
        rows: idx.iter().map(|&i| data.rows[i].clone()).collect(),
        labels: idx.iter().map(|&i| data.labels[i]).collect(),
        groups: data
            .groups
            .iter()
            .map(|g| GroupColumn {
                name: g.name.clone(),
                values: idx.iter().map(|&i| g.values[i].clone()).collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> SchemaConfig {
        SchemaConfig::from_toml(
            r#"
            label = "y"
            positive = "yes"

            [[feature]]
            name = "age"
            kind = "numerical"

            [[feature]]
            name = "job"
            kind = "categorical"
            group = true
        "#,
        )
        .unwrap()
    }

    #[test]
    fn loads_rows_and_infers_categories_lexicographically() {
        let csv = "age,job,y\n30,zoo,yes\n40,bar,no\n50,zoo,yes\n";
        let data = load_csv_str(csv, &toy_config()).unwrap();
        assert_eq!(data.len(), 3);
        // Inferred order is lexicographic, not first-seen.
        assert_eq!(data.schema.feature(1).categories, vec!["bar", "zoo"]);
        assert_eq!(data.rows[0].cat(1), 1);
        assert_eq!(data.labels, vec![true, false, true]);
        assert_eq!(data.schema.feature(0).bounds, (30.0, 50.0));
        assert_eq!(data.rows[2].index, Some(2));
        assert_eq!(data.group_value("job", 1), Some("bar"));
    }

    #[test]
    fn category_inference_is_row_order_invariant() {
        let a = load_csv_str("age,job,y\n1,zoo,yes\n2,bar,no\n", &toy_config()).unwrap();
        let b = load_csv_str("age,job,y\n2,bar,no\n1,zoo,yes\n", &toy_config()).unwrap();
        assert_eq!(
            a.schema.feature(1).categories,
            b.schema.feature(1).categories
        );
    }

    #[test]
    fn rejects_missing_and_bad_cells() {
        let cfg = toy_config();
        let missing = load_csv_str("age,job,y\n30,,yes\n40,bar,no\n", &cfg);
        assert!(matches!(missing, Err(TabularError::MissingValue { row: 0, .. })));
        let bad = load_csv_str("age,job,y\nthirty,bar,yes\n40,bar,no\n", &cfg);
        assert!(matches!(bad, Err(TabularError::BadNumber { row: 0, .. })));
        let unknown_col = load_csv_str("age,job,extra,y\n30,bar,1,yes\n", &cfg);
        assert!(matches!(unknown_col, Err(TabularError::ColumnMismatch(_))));
    }

    #[test]
    fn rejects_undeclared_category_when_declared() {
        let cfg = SchemaConfig::from_toml(
            r#"
            label = "y"
            positive = "yes"

            [[feature]]
            name = "job"
            kind = "categorical"
            categories = ["bar", "zoo"]

            [[feature]]
            name = "age"
            kind = "numerical"
        "#,
        )
        .unwrap();
        let err = load_csv_str("job,age,y\nqux,30,yes\nbar,40,no\n", &cfg);
        assert!(matches!(err, Err(TabularError::UnknownCategory { row: 0, .. })));
    }

    #[test]
    fn rejects_non_binary_labels() {
        let err = load_csv_str("age,job,y\n1,a,yes\n2,b,no\n3,a,maybe\n", &toy_config());
        assert!(matches!(err, Err(TabularError::NonBinaryLabel { .. })));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let rows: String = (0..11).map(|i| format!("{i},a{},yes\n", i % 2)).collect();
        let csv = format!("age,job,y\n{rows}");
        let data = load_csv_str(&csv, &toy_config()).unwrap();
        let (train, test) = split(&data, 0.2, 7).unwrap();
        // floor(11 * 0.2) = 2
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 9);
    }

    #[test]
    fn split_is_seed_deterministic_and_disjoint() {
        let rows: String = (0..40).map(|i| format!("{i},a{},yes\n", i % 3)).collect();
        let csv = format!("age,job,y\n{rows}");
        let data = load_csv_str(&csv, &toy_config()).unwrap();
        let (tr1, te1) = split(&data, 0.25, 11).unwrap();
        let (tr2, te2) = split(&data, 0.25, 11).unwrap();
        let idx = |d: &Dataset| d.rows.iter().map(|r| r.index.unwrap()).collect::<Vec<_>>();
        assert_eq!(idx(&tr1), idx(&tr2));
        assert_eq!(idx(&te1), idx(&te2));
        let (tr3, _) = split(&data, 0.25, 12).unwrap();
        assert_ne!(idx(&tr1), idx(&tr3));

        let mut all: Vec<usize> = idx(&tr1).into_iter().chain(idx(&te1)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        // Group columns follow their rows through the split.
        let (tr, _) = split(&data, 0.25, 11).unwrap();
        for (i, row) in tr.rows.iter().enumerate() {
            let expected = format!("a{}", row.index.unwrap() % 3);
            assert_eq!(tr.group_value("job", i), Some(expected.as_str()));
        }
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let csv = "age,job,y\n1,a,yes\n2,b,no\n3,a,yes\n";
        let data = load_csv_str(csv, &toy_config()).unwrap();
        assert!(split(&data, 0.0, 1).is_err());
        assert!(split(&data, 1.0, 1).is_err());
    }
}

//! Typed tabular datasets: schema with attribute roles, CSV ingestion,
//! normalization statistics, and seeded fold/partition splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Attribute value domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

/// Role an attribute plays in the privacy/classification pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeRole {
    QuasiIdentifying,
    Sensitive,
    Class,
    Excluded,
}

/// One attribute: name, kind, and role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    pub role: AttributeRole,
}

impl AttributeSchema {
    pub fn new(name: &str, kind: AttributeKind, role: AttributeRole) -> Self {
        Self { name: name.to_string(), kind, role }
    }
}

/// Validated attribute list. Exactly one sensitive attribute and one
/// categorical class attribute; zero or more quasi-identifying
/// attributes (their count is the dimension `d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AttributeSchema>", into = "Vec<AttributeSchema>")]
pub struct Schema {
    attributes: Vec<AttributeSchema>,
}

impl TryFrom<Vec<AttributeSchema>> for Schema {
    type Error = Error;
    fn try_from(attributes: Vec<AttributeSchema>) -> Result<Self> {
        Schema::new(attributes)
    }
}

impl From<Schema> for Vec<AttributeSchema> {
    fn from(s: Schema) -> Self {
        s.attributes
    }
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSchema>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for a in &attributes {
            if !names.insert(a.name.clone()) {
                return Err(Error::Schema(format!("duplicate attribute name '{}'", a.name)));
            }
        }
        let sensitive: Vec<_> =
            attributes.iter().filter(|a| a.role == AttributeRole::Sensitive).collect();
        let class: Vec<_> = attributes.iter().filter(|a| a.role == AttributeRole::Class).collect();
        if sensitive.len() != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one sensitive attribute, found {}",
                sensitive.len()
            )));
        }
        if class.len() != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one class attribute, found {}",
                class.len()
            )));
        }
        if class[0].kind != AttributeKind::Categorical {
            return Err(Error::Schema("class attribute must be categorical".into()));
        }
        Ok(Self { attributes })
    }

    /// Load a schema from a JSON file (a list of attribute objects).
    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)?;
        Ok(schema)
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, idx: usize) -> &AttributeSchema {
        &self.attributes[idx]
    }

    pub fn sensitive_index(&self) -> usize {
        self.attributes.iter().position(|a| a.role == AttributeRole::Sensitive).unwrap()
    }

    pub fn class_index(&self) -> usize {
        self.attributes.iter().position(|a| a.role == AttributeRole::Class).unwrap()
    }

    pub fn quasi_indices(&self) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == AttributeRole::QuasiIdentifying)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of quasi-identifying attributes (the identifying dimension d).
    pub fn d(&self) -> usize {
        self.quasi_indices().len()
    }

    /// Attribute indices that participate in the distance metric:
    /// quasi-identifying and sensitive, in schema order.
    pub fn distance_indices(&self) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                matches!(a.role, AttributeRole::QuasiIdentifying | AttributeRole::Sensitive)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Schema with excluded attributes removed. Datasets always carry a
    /// reduced schema; the full schema exists only to interpret raw files.
    pub fn reduced(&self) -> Schema {
        Schema {
            attributes: self
                .attributes
                .iter()
                .filter(|a| a.role != AttributeRole::Excluded)
                .cloned()
                .collect(),
        }
    }

    fn has_excluded(&self) -> bool {
        self.attributes.iter().any(|a| a.role == AttributeRole::Excluded)
    }
}

/// A single attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Num(_) => None,
            Value::Cat(s) => Some(s),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => write!(f, "{s}"),
        }
    }
}

/// One row: a stable id plus values aligned to the dataset schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub values: Vec<Value>,
}

impl Instance {
    pub fn value(&self, idx: usize) -> &Value {
        &self.values[idx]
    }
}

/// Missing-value handling at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    DropRow,
    Error,
}

/// Immutable typed dataset. Row ids are assigned in file order at
/// ingestion and survive every downstream split or subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Instance>,
}

/// Result of CSV ingestion: the dataset plus how many rows the missing
/// policy removed.
#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

impl Dataset {
    /// Load a CSV file with a header row. Every schema attribute must
    /// appear in the header (columns are matched by name); excluded
    /// attributes are checked for missingness but not ingested. A row
    /// with a missing token ("?" or empty) in any schema column is
    /// dropped or rejected according to the policy.
    pub fn load_csv(path: &Path, schema: &Schema, policy: MissingPolicy) -> Result<LoadOutcome> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let headers = reader.headers()?.clone();
        let mut column_of = Vec::with_capacity(schema.len());
        for attr in schema.attributes() {
            let idx = headers
                .iter()
                .position(|h| h == attr.name)
                .ok_or_else(|| Error::Schema(format!("header missing attribute '{}'", attr.name)))?;
            column_of.push(idx);
        }
        if headers.len() != schema.len() {
            return Err(Error::Schema(format!(
                "header has {} columns but schema lists {}",
                headers.len(),
                schema.len()
            )));
        }

        let reduced = Arc::new(schema.reduced());
        let keep: Vec<(usize, &AttributeSchema)> = schema
            .attributes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role != AttributeRole::Excluded)
            .map(|(i, a)| (column_of[i], a))
            .collect();

        let mut rows = Vec::new();
        let mut dropped = 0usize;
        let mut next_id = 0u64;
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let missing = column_of.iter().any(|&c| is_missing(record.get(c).unwrap_or("")));
            if missing {
                match policy {
                    MissingPolicy::DropRow => {
                        dropped += 1;
                        continue;
                    }
                    MissingPolicy::Error => {
                        return Err(Error::Data(format!("missing value in data row {}", line + 1)));
                    }
                }
            }
            let mut values = Vec::with_capacity(keep.len());
            for (col, attr) in &keep {
                let field = record.get(*col).unwrap_or("");
                values.push(parse_value(field, attr, line + 1)?);
            }
            rows.push(Instance { id: next_id, values });
            next_id += 1;
        }
        let dataset = Dataset::from_parts(reduced, rows, true)?;
        if dropped > 0 {
            log::info!("dropped {dropped} rows with missing values from {}", path.display());
        }
        Ok(LoadOutcome { dataset, dropped_rows: dropped })
    }

    /// Build a dataset from in-memory rows; ids are assigned in order.
    /// The schema must not contain excluded attributes.
    pub fn from_rows(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Dataset> {
        Self::from_rows_inner(schema, rows, true)
    }

    /// As `from_rows`, but without the two-observed-labels rule; derived
    /// data (bootstrap resamples, suppression survivors) can legitimately
    /// degenerate to a single class.
    pub(crate) fn from_rows_any_labels(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Dataset> {
        Self::from_rows_inner(schema, rows, false)
    }

    fn from_rows_inner(
        schema: Schema,
        rows: Vec<Vec<Value>>,
        require_binary_class: bool,
    ) -> Result<Dataset> {
        if schema.has_excluded() {
            return Err(Error::Schema("in-memory datasets use a reduced schema".into()));
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Instance { id: i as u64, values })
            .collect();
        Dataset::from_parts(Arc::new(schema), rows, require_binary_class)
    }

    pub(crate) fn from_parts(
        schema: Arc<Schema>,
        rows: Vec<Instance>,
        require_binary_class: bool,
    ) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let class_idx = schema.class_index();
        let mut labels = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for row in &rows {
            if row.values.len() != schema.len() {
                return Err(Error::Data(format!(
                    "row {} has {} values, schema expects {}",
                    row.id,
                    row.values.len(),
                    schema.len()
                )));
            }
            for (v, attr) in row.values.iter().zip(schema.attributes()) {
                let ok = match (v, attr.kind) {
                    (Value::Num(x), AttributeKind::Numeric) => x.is_finite(),
                    (Value::Cat(_), AttributeKind::Categorical) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Data(format!(
                        "row {}: value for '{}' does not match kind",
                        row.id, attr.name
                    )));
                }
            }
            match &row.values[class_idx] {
                Value::Cat(label) => {
                    labels.insert(label.clone());
                }
                Value::Num(_) => unreachable!("class attribute is categorical"),
            }
            if !ids.insert(row.id) {
                return Err(Error::Data(format!("duplicate row id {}", row.id)));
            }
        }
        if require_binary_class && labels.len() != 2 {
            return Err(Error::Data(format!(
                "class attribute must have exactly 2 observed labels, found {}",
                labels.len()
            )));
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Observed class labels, sorted.
    pub fn class_labels(&self) -> Vec<String> {
        let idx = self.schema.class_index();
        let mut set = BTreeSet::new();
        for row in &self.rows {
            if let Value::Cat(label) = &row.values[idx] {
                set.insert(label.clone());
            }
        }
        set.into_iter().collect()
    }

    /// Subset by positions into `rows()`, preserving row ids. Does not
    /// re-validate the binary-class rule (folds may lose a class).
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: positions.iter().map(|&p| self.rows[p].clone()).collect(),
        }
    }

    /// Concatenate datasets sharing one schema; row ids must stay unique.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or_else(|| Error::Data("concat of zero datasets".into()))?;
        let mut rows = Vec::new();
        for p in parts {
            if p.schema != first.schema {
                return Err(Error::Schema("concat requires identical schemas".into()));
            }
            rows.extend(p.rows.iter().cloned());
        }
        let mut ids = BTreeSet::new();
        for r in &rows {
            if !ids.insert(r.id) {
                return Err(Error::Data(format!("duplicate row id {} in concat", r.id)));
            }
        }
        Ok(Dataset { schema: Arc::clone(&first.schema), rows })
    }

    /// Canonical CSV serialization: header then rows, columns in schema
    /// order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
        w.write_record(self.schema.attributes().iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.values.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_value(field: &str, attr: &AttributeSchema, line: usize) -> Result<Value> {
    match attr.kind {
        AttributeKind::Numeric => {
            let x: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "row {line}: non-numeric token '{field}' in numeric column '{}'",
                    attr.name
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::Data(format!(
                    "row {line}: non-finite value in numeric column '{}'",
                    attr.name
                )));
            }
            Ok(Value::Num(x))
        }
        AttributeKind::Categorical => Ok(Value::Cat(field.to_string())),
    }
}

/// Per-attribute statistics fitted on a training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrStats {
    Numeric { min: f64, max: f64 },
    Categorical { categories: BTreeSet<String> },
}

/// Normalization statistics covering every attribute of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    per_attribute: Vec<AttrStats>,
}

impl NormalizationStats {
    /// Fit min/max and category sets from the given (training) rows.
    pub fn fit(train: &Dataset) -> Result<NormalizationStats> {
        if train.n() == 0 {
            return Err(Error::Data("cannot fit normalization on an empty dataset".into()));
        }
        let mut per_attribute = Vec::with_capacity(train.schema().len());
        for (idx, attr) in train.schema().attributes().iter().enumerate() {
            match attr.kind {
                AttributeKind::Numeric => {
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    for row in train.rows() {
                        let x = row.values[idx].as_num().unwrap();
                        min = min.min(x);
                        max = max.max(x);
                    }
                    per_attribute.push(AttrStats::Numeric { min, max });
                }
                AttributeKind::Categorical => {
                    let mut categories = BTreeSet::new();
                    for row in train.rows() {
                        categories.insert(row.values[idx].as_cat().unwrap().to_string());
                    }
                    per_attribute.push(AttrStats::Categorical { categories });
                }
            }
        }
        Ok(NormalizationStats { per_attribute })
    }

    pub fn attribute(&self, idx: usize) -> &AttrStats {
        &self.per_attribute[idx]
    }

    pub fn len(&self) -> usize {
        self.per_attribute.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_attribute.is_empty()
    }

    /// Min-max normalize a numeric value on attribute `idx`. A constant
    /// column maps everything to 0 so it contributes nothing to distance.
    pub fn normalize(&self, idx: usize, x: f64) -> f64 {
        match &self.per_attribute[idx] {
            AttrStats::Numeric { min, max } => {
                if max > min {
                    (x - min) / (max - min)
                } else {
                    0.0
                }
            }
            AttrStats::Categorical { .. } => {
                panic!("normalize called on categorical attribute {idx}")
            }
        }
    }
}

/// Stratified-by-class k-fold split. Test folds are disjoint, cover all
/// rows, and per class their sizes differ by at most one; the overall
/// fold sizes differ by at most one as well (a single dealing cursor
/// runs across the class strata).
pub fn split_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidParameter(format!(
            "folds must be in [2, {}], got {folds}",
            data.n()
        )));
    }
    let class_idx = data.schema().class_index();
    let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (pos, row) in data.rows().iter().enumerate() {
        let label = row.values[class_idx].as_cat().unwrap().to_string();
        by_class.entry(label).or_default().push(pos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; data.n()];
    let mut cursor = 0usize;
    for positions in by_class.values_mut() {
        positions.shuffle(&mut rng);
        for &pos in positions.iter() {
            fold_of[pos] = cursor % folds;
            cursor += 1;
        }
    }
    let mut result = Vec::with_capacity(folds);
    for f in 0..folds {
        let test: Vec<usize> = (0..data.n()).filter(|&p| fold_of[p] == f).collect();
        let train: Vec<usize> = (0..data.n()).filter(|&p| fold_of[p] != f).collect();
        result.push((data.subset(&train), data.subset(&test)));
    }
    Ok(result)
}

/// Disjoint, exhaustive, near-equal-size partitions (sizes differ by at
/// most one), deterministic per seed.
pub fn split_partitions(data: &Dataset, parts: usize, seed: u64) -> Result<Vec<Dataset>> {
    if parts < 2 || parts > data.n() {
        return Err(Error::InvalidParameter(format!(
            "parts must be in [2, {}], got {parts}",
            data.n()
        )));
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (cursor, pos) in order.into_iter().enumerate() {
        buckets[cursor % parts].push(pos);
    }
    Ok(buckets
        .into_iter()
        .map(|mut b| {
            b.sort_unstable();
            data.subset(&b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn two_class_schema() -> Schema {
        Schema::new(vec![
            AttributeSchema::new("age", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
            AttributeSchema::new("job", AttributeKind::Categorical, AttributeRole::Sensitive),
            AttributeSchema::new("label", AttributeKind::Categorical, AttributeRole::Class),
        ])
        .unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn schema_validation_rules() {
        let err = Schema::new(vec![AttributeSchema::new(
            "a",
            AttributeKind::Numeric,
            AttributeRole::QuasiIdentifying,
        )]);
        assert!(err.is_err());

        let err = Schema::new(vec![
            AttributeSchema::new("s", AttributeKind::Categorical, AttributeRole::Sensitive),
            AttributeSchema::new("c", AttributeKind::Numeric, AttributeRole::Class),
        ]);
        assert!(err.is_err(), "numeric class must be rejected");

        let ok = two_class_schema();
        assert_eq!(ok.d(), 1);
        assert_eq!(ok.sensitive_index(), 1);
        assert_eq!(ok.class_index(), 2);
    }

    #[test]
    fn load_csv_clean_file() {
        let f = write_tmp("age,job,label\n30,nurse,+\n40,clerk,-\n50,nurse,+\n");
        let out = Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::DropRow).unwrap();
        assert_eq!(out.dataset.n(), 3);
        assert_eq!(out.dropped_rows, 0);
        assert_eq!(out.dataset.rows()[0].values[0], Value::Num(30.0));
    }

    #[test]
    fn load_csv_missing_cell_policies() {
        let f = write_tmp("age,job,label\n30,nurse,+\n?,clerk,-\n50,nurse,-\n");
        let out = Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::DropRow).unwrap();
        assert_eq!(out.dataset.n(), 2);
        assert_eq!(out.dropped_rows, 1);

        let err = Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::Error);
        assert!(err.is_err());
    }

    #[test]
    fn load_csv_header_mismatch() {
        let f = write_tmp("age,occupation,label\n30,nurse,+\n");
        let err = Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::DropRow);
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn load_csv_bad_numeric_token() {
        let f = write_tmp("age,job,label\nthirty,nurse,+\n40,clerk,-\n");
        let err = Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::DropRow);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn excluded_columns_checked_but_not_ingested() {
        let schema = Schema::new(vec![
            AttributeSchema::new("age", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
            AttributeSchema::new("noise", AttributeKind::Categorical, AttributeRole::Excluded),
            AttributeSchema::new("job", AttributeKind::Categorical, AttributeRole::Sensitive),
            AttributeSchema::new("label", AttributeKind::Categorical, AttributeRole::Class),
        ])
        .unwrap();
        let f = write_tmp("age,noise,job,label\n30,x,nurse,+\n40,?,clerk,-\n50,y,clerk,-\n");
        let out = Dataset::load_csv(f.path(), &schema, MissingPolicy::DropRow).unwrap();
        // Row with "?" in the excluded column is dropped too.
        assert_eq!(out.dataset.n(), 2);
        assert_eq!(out.dropped_rows, 1);
        assert_eq!(out.dataset.schema().len(), 3);
        assert!(out.dataset.schema().index_of("noise").is_none());
    }

    #[test]
    fn ingestion_round_trip_is_identity() {
        let f = write_tmp("age,job,label\n30,nurse,+\n40.5,clerk,-\n50,nurse,+\n");
        let loaded =
            Dataset::load_csv(f.path(), &two_class_schema(), MissingPolicy::DropRow).unwrap().dataset;
        let out = tempfile::NamedTempFile::new().unwrap();
        loaded.write_csv(out.path()).unwrap();
        let reloaded =
            Dataset::load_csv(out.path(), loaded.schema(), MissingPolicy::DropRow).unwrap().dataset;
        assert_eq!(loaded, reloaded);
    }

    #[test]
    fn normalization_stats_examples() {
        let schema = two_class_schema();
        let data = Dataset::from_rows(
            schema,
            vec![
                vec![Value::Num(0.0), Value::Cat("a".into()), Value::Cat("+".into())],
                vec![Value::Num(10.0), Value::Cat("b".into()), Value::Cat("-".into())],
                vec![Value::Num(4.0), Value::Cat("a".into()), Value::Cat("+".into())],
            ],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&data).unwrap();
        assert_eq!(stats.attribute(0), &AttrStats::Numeric { min: 0.0, max: 10.0 });
        match stats.attribute(1) {
            AttrStats::Categorical { categories } => {
                assert_eq!(categories.len(), 2);
                assert!(categories.contains("a") && categories.contains("b"));
            }
            _ => panic!("expected categorical stats"),
        }
        assert_eq!(stats.normalize(0, 5.0), 0.5);
    }

    #[test]
    fn constant_numeric_column_normalizes_to_zero() {
        let schema = two_class_schema();
        let data = Dataset::from_rows(
            schema,
            vec![
                vec![Value::Num(5.0), Value::Cat("a".into()), Value::Cat("+".into())],
                vec![Value::Num(5.0), Value::Cat("b".into()), Value::Cat("-".into())],
            ],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&data).unwrap();
        assert_eq!(stats.attribute(0), &AttrStats::Numeric { min: 5.0, max: 5.0 });
        assert_eq!(stats.normalize(0, 5.0), 0.0);
        assert_eq!(stats.normalize(0, 7.0), 0.0);
    }

    fn synthetic(n: usize) -> Dataset {
        let schema = two_class_schema();
        let rows = (0..n)
            .map(|i| {
                vec![
                    Value::Num(i as f64),
                    Value::Cat(format!("s{}", i % 3)),
                    Value::Cat(if i % 2 == 0 { "+".into() } else { "-".to_string() }),
                ]
            })
            .collect();
        Dataset::from_rows(schema, rows).unwrap()
    }

    #[test]
    fn folds_each_row_once_and_sizes() {
        let data = synthetic(10);
        let folds = split_folds(&data, 10, 7).unwrap();
        assert_eq!(folds.len(), 10);
        for (train, test) in &folds {
            assert_eq!(test.n(), 1);
            assert_eq!(train.n(), 9);
        }
        let mut seen = BTreeSet::new();
        for (_, test) in &folds {
            for r in test.rows() {
                assert!(seen.insert(r.id));
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn folds_deterministic_per_seed() {
        let data = synthetic(37);
        let a = split_folds(&data, 5, 11).unwrap();
        let b = split_folds(&data, 5, 11).unwrap();
        for ((tr_a, te_a), (tr_b, te_b)) in a.iter().zip(&b) {
            assert_eq!(tr_a, tr_b);
            assert_eq!(te_a, te_b);
        }
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one_overall_and_per_class() {
        let data = synthetic(47);
        let folds = split_folds(&data, 10, 3).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|(_, t)| t.n()).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        assert!(max - min <= 1, "overall sizes {sizes:?}");
        let class_idx = data.schema().class_index();
        for label in data.class_labels() {
            let per: Vec<usize> = folds
                .iter()
                .map(|(_, t)| {
                    t.rows()
                        .iter()
                        .filter(|r| r.values[class_idx].as_cat().unwrap() == label)
                        .count()
                })
                .collect();
            let min = *per.iter().min().unwrap();
            let max = *per.iter().max().unwrap();
            assert!(max - min <= 1, "class {label} sizes {per:?}");
        }
    }

    #[test]
    fn adult_sized_fold_arithmetic() {
        // 45222 rows over 10 folds: test folds hold 4522 or 4523 rows.
        let data = synthetic(45222);
        let folds = split_folds(&data, 10, 42).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|(_, t)| t.n()).collect();
        sizes.sort_unstable();
        assert!(sizes.iter().all(|&s| s == 4522 || s == 4523), "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 45222);
    }

    #[test]
    fn partition_sizes() {
        let data = synthetic(101);
        let parts = split_partitions(&data, 5, 9).unwrap();
        let mut sizes: Vec<usize> = parts.iter().map(|p| p.n()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![20, 20, 20, 20, 21]);
        let total: usize = sizes.iter().sum();
        assert_eq!(total, 101);

        let again = split_partitions(&data, 5, 9).unwrap();
        assert_eq!(parts, again);
    }

    #[test]
    fn split_range_errors() {
        let data = synthetic(5);
        assert!(split_folds(&data, 1, 0).is_err());
        assert!(split_folds(&data, 6, 0).is_err());
        assert!(split_partitions(&data, 1, 0).is_err());
        assert!(split_partitions(&data, 6, 0).is_err());
    }
}

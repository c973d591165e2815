//! Anatomization: partition training rows into l-diverse groups, emit
//! the identifier/sensitive table pair, and materialize the anatomized
//! training data via the group-id join.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeRole, AttributeSchema, Dataset, Instance, Schema, Value};
use crate::{Error, Result};

/// One l-diverse group of row ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub gid: u32,
    pub member_row_ids: Vec<u64>,
}

/// The grouping produced by `build_groups`: disjoint groups that,
/// together with the suppressed rows, cover the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub l: usize,
    pub groups: Vec<Group>,
    pub suppressed_row_ids: Vec<u64>,
}

impl GroupPartition {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Greedy bucketized grouping: rows are bucketed by sensitive value,
/// each bucket is seeded-shuffled once, and groups of exactly `l` rows
/// are drawn from the `l` currently largest buckets until fewer than
/// `l` non-empty buckets remain. Residual rows are suppressed.
///
/// Every emitted group has `l` members with `l` distinct sensitive
/// values, so it sits exactly at the 1/l diversity boundary.
pub fn build_groups(train: &Dataset, l: usize, seed: u64) -> Result<GroupPartition> {
    build_groups_opt(train, l, seed, false)
}

/// As `build_groups`, but `allow_all_suppressed` downgrades the
/// "no group can be formed" error to an empty partition.
pub fn build_groups_opt(
    train: &Dataset,
    l: usize,
    seed: u64,
    allow_all_suppressed: bool,
) -> Result<GroupPartition> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!("l must be >= 2, got {l}")));
    }
    let sens_idx = train.schema().sensitive_index();

    // Buckets keyed by the canonical string form of the sensitive value;
    // key order doubles as the lexicographic tie-break.
    let mut buckets: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for row in train.rows() {
        buckets.entry(row.values[sens_idx].to_string()).or_default().push(row.id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<(String, Vec<u64>)> = Vec::with_capacity(buckets.len());
    for (key, mut ids) in buckets {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        order.push((key, ids));
    }

    let mut cursor = vec![0usize; order.len()];
    let mut groups = Vec::new();
    loop {
        let mut live: Vec<usize> = (0..order.len())
            .filter(|&b| cursor[b] < order[b].1.len())
            .collect();
        if live.len() < l {
            break;
        }
        // Largest remaining count first; ties fall back to key order,
        // which is the index order of `order`.
        live.sort_by(|&a, &b| {
            let ra = order[a].1.len() - cursor[a];
            let rb = order[b].1.len() - cursor[b];
            rb.cmp(&ra).then(a.cmp(&b))
        });
        let mut members = Vec::with_capacity(l);
        for &b in live.iter().take(l) {
            members.push(order[b].1[cursor[b]]);
            cursor[b] += 1;
        }
        groups.push(Group { gid: groups.len() as u32 + 1, member_row_ids: members });
    }
    if groups.is_empty() && !allow_all_suppressed {
        return Err(Error::Anatomy(format!(
            "no l-diverse group can be formed: fewer than {l} distinct sensitive values"
        )));
    }

    let mut suppressed: Vec<u64> = order
        .iter()
        .enumerate()
        .flat_map(|(b, (_, ids))| ids[cursor[b]..].iter().copied())
        .collect();
    suppressed.sort_unstable();
    Ok(GroupPartition { l, groups, suppressed_row_ids: suppressed })
}

/// Identifier-table row: class label, quasi-identifying values, group id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItRow {
    pub row_id: u64,
    pub class: String,
    pub quasi: Vec<Value>,
    pub gid: u32,
}

/// The identifier table: one row per non-suppressed instance.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierTable {
    pub class_attr: AttributeSchema,
    pub quasi_attrs: Vec<AttributeSchema>,
    pub rows: Vec<ItRow>,
}

/// Sensitive-table row: group id and sensitive value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StRow {
    pub gid: u32,
    pub value: Value,
}

/// The sensitive table: one row per non-suppressed instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveTable {
    pub sensitive_attr: AttributeSchema,
    pub rows: Vec<StRow>,
}

/// Project a partitioned dataset into its identifier and sensitive
/// tables. Suppressed rows appear in neither.
pub fn emit_tables(
    train: &Dataset,
    partition: &GroupPartition,
) -> Result<(IdentifierTable, SensitiveTable)> {
    let schema = train.schema();
    let by_id: BTreeMap<u64, &Instance> = train.rows().iter().map(|r| (r.id, r)).collect();
    let class_idx = schema.class_index();
    let sens_idx = schema.sensitive_index();
    let quasi = schema.quasi_indices();

    let mut it_rows = Vec::new();
    let mut st_rows = Vec::new();
    for group in &partition.groups {
        for &id in &group.member_row_ids {
            let row = by_id
                .get(&id)
                .ok_or_else(|| Error::Anatomy(format!("partition references unknown row id {id}")))?;
            it_rows.push(ItRow {
                row_id: id,
                class: row.values[class_idx].to_string(),
                quasi: quasi.iter().map(|&q| row.values[q].clone()).collect(),
                gid: group.gid,
            });
            st_rows.push(StRow { gid: group.gid, value: row.values[sens_idx].clone() });
        }
    }
    let it = IdentifierTable {
        class_attr: schema.attribute(class_idx).clone(),
        quasi_attrs: quasi.iter().map(|&q| schema.attribute(q).clone()).collect(),
        rows: it_rows,
    };
    let st = SensitiveTable { sensitive_attr: schema.attribute(sens_idx).clone(), rows: st_rows };
    Ok((it, st))
}

/// The anatomized training data: the inner join of IT and ST on the
/// group id (quasi-identifiers and class from IT, sensitive value from
/// ST), with the originating group id kept per joined row.
#[derive(Debug, Clone, PartialEq)]
pub struct AnatomizedDataset {
    dataset: Dataset,
    l: usize,
    origin_gids: Vec<u32>,
}

impl AnatomizedDataset {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn into_dataset(self) -> Dataset {
        self.dataset
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn origin_gids(&self) -> &[u32] {
        &self.origin_gids
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.dataset.write_csv(path)
    }
}

/// Inner join of IT and ST on gid. Joined row count is Σ|G_j|²; the
/// class label rides along from the IT side.
pub fn join_anatomized(it: &IdentifierTable, st: &SensitiveTable) -> Result<AnatomizedDataset> {
    let mut it_by_gid: BTreeMap<u32, Vec<&ItRow>> = BTreeMap::new();
    for row in &it.rows {
        it_by_gid.entry(row.gid).or_default().push(row);
    }
    let mut st_by_gid: BTreeMap<u32, Vec<&StRow>> = BTreeMap::new();
    for row in &st.rows {
        st_by_gid.entry(row.gid).or_default().push(row);
    }
    for gid in it_by_gid.keys() {
        if !st_by_gid.contains_key(gid) {
            return Err(Error::Anatomy(format!("gid {gid} appears in IT but not in ST")));
        }
    }
    for gid in st_by_gid.keys() {
        if !it_by_gid.contains_key(gid) {
            return Err(Error::Anatomy(format!("gid {gid} appears in ST but not in IT")));
        }
    }

    let mut attrs = it.quasi_attrs.clone();
    attrs.push(st.sensitive_attr.clone());
    attrs.push(it.class_attr.clone());
    let schema = Arc::new(Schema::new(attrs)?);

    // Group sizes are uniform (= l) when the tables come from
    // build_groups; infer l from the first group for bookkeeping.
    let l = it_by_gid.values().next().map_or(0, |v| v.len());

    let mut rows = Vec::new();
    let mut origin_gids = Vec::new();
    let mut next_id = 0u64;
    for (gid, it_rows) in &it_by_gid {
        let st_rows = &st_by_gid[gid];
        for it_row in it_rows {
            for st_row in st_rows.iter() {
                let mut values: Vec<Value> = it_row.quasi.clone();
                values.push(st_row.value.clone());
                values.push(Value::Cat(it_row.class.clone()));
                rows.push(Instance { id: next_id, values });
                origin_gids.push(*gid);
                next_id += 1;
            }
        }
    }
    let dataset = Dataset::from_parts(schema, rows, false)?;
    Ok(AnatomizedDataset { dataset, l, origin_gids })
}

impl IdentifierTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = vec![self.class_attr.name.as_str()];
        header.extend(self.quasi_attrs.iter().map(|a| a.name.as_str()));
        header.push("gid");
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = vec![row.class.clone()];
            rec.extend(row.quasi.iter().map(|v| v.to_string()));
            rec.push(row.gid.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read back an identifier table written by `write_csv`. The full
    /// dataset schema supplies quasi/class attribute typing.
    pub fn read_csv(path: &Path, schema: &Schema) -> Result<IdentifierTable> {
        let mut reader =
            csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
        let class_attr = schema.attribute(schema.class_index()).clone();
        let quasi_attrs: Vec<AttributeSchema> =
            schema.quasi_indices().iter().map(|&q| schema.attribute(q).clone()).collect();
        let headers = reader.headers()?.clone();
        let expect = 2 + quasi_attrs.len();
        if headers.len() != expect {
            return Err(Error::Schema(format!(
                "identifier table has {} columns, expected {expect}",
                headers.len()
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let class = record.get(0).unwrap_or("").to_string();
            let mut quasi = Vec::with_capacity(quasi_attrs.len());
            for (j, attr) in quasi_attrs.iter().enumerate() {
                quasi.push(parse_typed(record.get(1 + j).unwrap_or(""), attr, i)?);
            }
            let gid: u32 = record
                .get(expect - 1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Data(format!("row {i}: bad gid")))?;
            rows.push(ItRow { row_id: i as u64, class, quasi, gid });
        }
        Ok(IdentifierTable { class_attr, quasi_attrs, rows })
    }
}

impl SensitiveTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["gid", self.sensitive_attr.name.as_str()])?;
        for row in &self.rows {
            w.write_record([row.gid.to_string(), row.value.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, schema: &Schema) -> Result<SensitiveTable> {
        let sensitive_attr = schema.attribute(schema.sensitive_index()).clone();
        Self::read_csv_with_attr(path, sensitive_attr)
    }

    /// Read a sensitive table without a dataset schema; values are kept
    /// as categorical strings, which is all a diversity check needs.
    pub fn read_csv_untyped(path: &Path) -> Result<SensitiveTable> {
        let name = {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
            let headers = reader.headers()?.clone();
            if headers.len() != 2 {
                return Err(Error::Schema(format!(
                    "sensitive table has {} columns, expected 2",
                    headers.len()
                )));
            }
            headers.get(1).unwrap_or("sensitive").to_string()
        };
        let attr = AttributeSchema::new(
            &name,
            crate::dataset::AttributeKind::Categorical,
            AttributeRole::Sensitive,
        );
        Self::read_csv_with_attr(path, attr)
    }

    fn read_csv_with_attr(path: &Path, sensitive_attr: AttributeSchema) -> Result<SensitiveTable> {
        let mut reader =
            csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let gid: u32 = record
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Data(format!("row {i}: bad gid")))?;
            let value = parse_typed(record.get(1).unwrap_or(""), &sensitive_attr, i)?;
            rows.push(StRow { gid, value });
        }
        Ok(SensitiveTable { sensitive_attr, rows })
    }
}

fn parse_typed(field: &str, attr: &AttributeSchema, row: usize) -> Result<Value> {
    match attr.kind {
        crate::dataset::AttributeKind::Numeric => field
            .parse::<f64>()
            .map(Value::Num)
            .map_err(|_| Error::Data(format!("row {row}: non-numeric '{field}' for {}", attr.name))),
        crate::dataset::AttributeKind::Categorical => Ok(Value::Cat(field.to_string())),
    }
}

/// Per-group outcome of an l-diversity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDiversity {
    pub gid: u32,
    pub size: usize,
    pub max_value_count: usize,
    pub ok: bool,
}

/// Outcome of `verify_l_diversity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LDiversityReport {
    pub l: usize,
    pub ok: bool,
    pub groups: Vec<GroupDiversity>,
}

/// Check Definition-9 diversity for every group of a partition against
/// the dataset it was built from: freq(v, G_j)/|G_j| ≤ 1/l, evaluated
/// in integer arithmetic as l·freq(v) ≤ |G_j|.
pub fn verify_l_diversity(partition: &GroupPartition, train: &Dataset) -> Result<LDiversityReport> {
    let sens_idx = train.schema().sensitive_index();
    let by_id: BTreeMap<u64, &Instance> = train.rows().iter().map(|r| (r.id, r)).collect();
    let mut groups = Vec::with_capacity(partition.groups.len());
    let mut all_ok = true;
    for group in &partition.groups {
        let mut values = Vec::with_capacity(group.member_row_ids.len());
        for &id in &group.member_row_ids {
            let row = by_id
                .get(&id)
                .ok_or_else(|| Error::Anatomy(format!("partition references unknown row id {id}")))?;
            values.push(row.values[sens_idx].to_string());
        }
        let check = check_group(group.gid, &values, partition.l);
        all_ok &= check.ok;
        groups.push(check);
    }
    Ok(LDiversityReport { l: partition.l, ok: all_ok, groups })
}

/// Check l-diversity of the per-gid sensitive multisets of a sensitive
/// table (used to audit serialized IT/ST pairs).
pub fn verify_st_l_diversity(st: &SensitiveTable, l: usize) -> LDiversityReport {
    let mut by_gid: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for row in &st.rows {
        by_gid.entry(row.gid).or_default().push(row.value.to_string());
    }
    let mut groups = Vec::with_capacity(by_gid.len());
    let mut all_ok = true;
    for (gid, values) in &by_gid {
        let check = check_group(*gid, values, l);
        all_ok &= check.ok;
        groups.push(check);
    }
    LDiversityReport { l, ok: all_ok, groups }
}

fn check_group(gid: u32, values: &[String], l: usize) -> GroupDiversity {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.as_str()).or_insert(0) += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    GroupDiversity { gid, size: values.len(), max_value_count: max, ok: max * l <= values.len() }
}

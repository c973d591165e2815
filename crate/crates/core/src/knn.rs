//! k-nearest-neighbor classification over original, anatomized, or
//! generalization-anonymized training data.
//!
//! Distances are squared quadratic forms (no square root — a monotone
//! transform that leaves neighbor order unchanged): numeric axes are
//! min-max normalized differences, categorical axes contribute 0/1,
//! and a diagonal weight vector instantiates the shape matrix.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dataset::{
    AttributeKind, AttributeRole, Dataset, Instance, NormalizationStats, Schema, Value,
};
use crate::generalize::{AnonymizedDataset, GenValue, HierarchySet};
use crate::numeric::derive_seed;
use crate::{Error, Result};

/// Shape of the quadratic distance metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    IdentityAfterNormalization,
    DiagonalWeights(Vec<f64>),
}

/// Distance specification: shape matrix plus the normalization
/// statistics fitted on the training split.
#[derive(Debug, Clone)]
pub struct DistanceSpec {
    pub shape: Shape,
    pub stats: NormalizationStats,
}

impl DistanceSpec {
    pub fn identity(stats: NormalizationStats) -> Self {
        Self { shape: Shape::IdentityAfterNormalization, stats }
    }

    pub fn diagonal(stats: NormalizationStats, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("diagonal weights must be >= 0".into()));
        }
        Ok(Self { shape: Shape::DiagonalWeights(weights), stats })
    }
}

/// How distance ties (and voting ties for even k) are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Fully deterministic: lowest training row id wins.
    LowestRowId,
    /// Ties broken by a per-row key derived from the given seed.
    SeededRandom(u64),
}

enum AxisData {
    /// Normalized numeric values, one per training row.
    Num(Vec<f64>),
    /// Categorical codes per training row plus the value dictionary.
    Cat { dict: BTreeMap<String, u32>, codes: Vec<u32> },
    /// Generalized numeric: normalized interval midpoints (or exact values).
    GenNum(Vec<f64>),
    /// Generalized categorical: per-row hierarchy node and its level;
    /// a query value matches iff its ancestor at that level is the node.
    GenCat { attr: String, levels: Vec<u8>, nodes: Vec<u32> },
}

struct Axis {
    name: String,
    stat_idx: usize,
    weight: f64,
    data: AxisData,
}

enum QueryAxis {
    Num(f64),
    Cat(u32),
    GenNum(f64),
    GenCat(Vec<u32>),
}

/// A fitted k-NN model. Immutable after construction; classification is
/// pure and safe to run concurrently across test instances.
pub struct KnnModel {
    k: usize,
    spec: DistanceSpec,
    axes: Vec<Axis>,
    labels: Vec<u8>,
    label_names: Vec<String>,
    ids: Vec<u64>,
    tie_keys: Option<Vec<u64>>,
    hierarchies: Option<Arc<HierarchySet>>,
    n_rows: usize,
}

impl KnnModel {
    /// Fit on exact rows (original or anatomized training data).
    pub fn fit(train: &Dataset, k: usize, spec: DistanceSpec, tie: TiePolicy) -> Result<KnnModel> {
        let n = train.n();
        validate_k(k, n)?;
        let schema = train.schema();
        let weights = resolve_weights(&spec, schema)?;
        let mut axes = Vec::new();
        for (axis_idx, &attr_idx) in schema.distance_indices().iter().enumerate() {
            let attr = schema.attribute(attr_idx);
            let data = match attr.kind {
                AttributeKind::Numeric => AxisData::Num(
                    train
                        .rows()
                        .iter()
                        .map(|r| spec.stats.normalize(attr_idx, r.values[attr_idx].as_num().unwrap()))
                        .collect(),
                ),
                AttributeKind::Categorical => {
                    let mut dict = BTreeMap::new();
                    for r in train.rows() {
                        let v = r.values[attr_idx].as_cat().unwrap();
                        let next = dict.len() as u32;
                        dict.entry(v.to_string()).or_insert(next);
                    }
                    let codes = train
                        .rows()
                        .iter()
                        .map(|r| dict[r.values[attr_idx].as_cat().unwrap()])
                        .collect();
                    AxisData::Cat { dict, codes }
                }
            };
            axes.push(Axis {
                name: attr.name.clone(),
                stat_idx: attr_idx,
                weight: weights[axis_idx],
                data,
            });
        }
        let (labels, label_names) = pack_labels(train)?;
        let ids: Vec<u64> = train.rows().iter().map(|r| r.id).collect();
        let tie_keys = tie_key_table(&tie, &ids);
        Ok(KnnModel {
            k,

            spec,
            axes,
            labels,
            label_names,
            ids,
            tie_keys,
            hierarchies: None,
            n_rows: n,
        })
    }

    /// Fit on generalization-anonymized training data. The hierarchy set
    /// supplies descendant tests for generalized categorical values.
    pub fn fit_generalized(
        train: &AnonymizedDataset,
        hierarchies: Arc<HierarchySet>,
        k: usize,
        spec: DistanceSpec,
        tie: TiePolicy,
    ) -> Result<KnnModel> {
        let n = train.n();
        validate_k(k, n)?;
        let schema = train.schema();
        let weights = resolve_weights(&spec, schema)?;
        let mut axes = Vec::new();
        for (axis_idx, &attr_idx) in schema.distance_indices().iter().enumerate() {
            let attr = schema.attribute(attr_idx);
            let quasi = attr.role == AttributeRole::QuasiIdentifying;
            let data = match (attr.kind, quasi) {
                (AttributeKind::Numeric, _) => {
                    let mut mids = Vec::with_capacity(n);
                    for row in train.rows() {
                        let mid = match &row.values[attr_idx] {
                            GenValue::Exact(Value::Num(x)) => *x,
                            GenValue::Interval { lo, hi } => 0.5 * (lo + hi),
                            other => {
                                return Err(Error::Generalization(format!(
                                    "unexpected value {other:?} on numeric axis '{}'",
                                    attr.name
                                )))
                            }
                        };
                        mids.push(spec.stats.normalize(attr_idx, mid));
                    }
                    AxisData::GenNum(mids)
                }
                (AttributeKind::Categorical, true) => {
                    let hierarchy = hierarchies.categorical(&attr.name)?;
                    let mut levels = Vec::with_capacity(n);
                    let mut nodes = Vec::with_capacity(n);
                    for row in train.rows() {
                        let (level, node) = match &row.values[attr_idx] {
                            GenValue::Exact(Value::Cat(s)) => (0u8, hierarchy.leaf_node(s)?),
                            GenValue::Node { label, level } => {
                                (*level, hierarchy.node_at_level(label, *level)?)
                            }
                            other => {
                                return Err(Error::Generalization(format!(
                                    "unexpected value {other:?} on categorical axis '{}'",
                                    attr.name
                                )))
                            }
                        };
                        levels.push(level);
                        nodes.push(node);
                    }
                    AxisData::GenCat { attr: attr.name.clone(), levels, nodes }
                }
                (AttributeKind::Categorical, false) => {
                    // Sensitive values stay exact in anonymized data.
                    let mut dict = BTreeMap::new();
                    let mut codes = Vec::with_capacity(n);
                    for row in train.rows() {
                        let s = match &row.values[attr_idx] {
                            GenValue::Exact(Value::Cat(s)) => s.clone(),
                            other => {
                                return Err(Error::Generalization(format!(
                                    "non-exact sensitive value {other:?}"
                                )))
                            }
                        };
                        let next = dict.len() as u32;
                        codes.push(*dict.entry(s).or_insert(next));
                    }
                    AxisData::Cat { dict, codes }
                }
            };
            axes.push(Axis {
                name: attr.name.clone(),
                stat_idx: attr_idx,
                weight: weights[axis_idx],
                data,
            });
        }
        let (labels, label_names) = pack_gen_labels(train)?;
        let ids: Vec<u64> = train.rows().iter().map(|r| r.id).collect();
        let tie_keys = tie_key_table(&tie, &ids);
        Ok(KnnModel {
            k,

            spec,
            axes,
            labels,
            label_names,
            ids,
            tie_keys,
            hierarchies: Some(hierarchies),
            n_rows: n,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_train(&self) -> usize {
        self.n_rows
    }

    /// The k nearest training rows to `query`, as (row id, squared
    /// distance) sorted non-decreasing by distance with ties resolved by
    /// the model's tie policy.
    pub fn neighbors(&self, schema: &Schema, query: &Instance) -> Result<Vec<(u64, f64)>> {
        let mapping = self.query_mapping(schema)?;
        let q = self.compile_query(&mapping, query)?;
        Ok(self.scan(&q).into_iter().map(|c| (self.ids[c.pos], c.dist)).collect())
    }

    /// Majority class label among the k nearest neighbors.
    pub fn classify(&self, schema: &Schema, query: &Instance) -> Result<String> {
        let mapping = self.query_mapping(schema)?;
        let q = self.compile_query(&mapping, query)?;
        Ok(self.vote(&self.scan(&q)))
    }

    /// Fraction of misclassified rows of a non-empty test set. Rows are
    /// evaluated in parallel; the result does not depend on evaluation
    /// order.
    pub fn error_rate(&self, test: &Dataset) -> Result<f64> {
        if test.n() == 0 {
            return Err(Error::Data("empty test set".into()));
        }
        let schema = test.schema();
        let mapping = self.query_mapping(schema)?;
        let class_idx = schema.class_index();
        let errors = test
            .rows()
            .par_iter()
            .map(|row| {
                let q = self.compile_query(&mapping, row)?;
                let predicted = self.vote(&self.scan(&q));
                let actual = row.values[class_idx].as_cat().ok_or_else(|| {
                    Error::Data(format!("row {} has no class label", row.id))
                })?;
                Ok(usize::from(predicted != actual))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(errors.iter().sum::<usize>() as f64 / test.n() as f64)
    }

    /// For each distance axis, the column index in the query schema.
    fn query_mapping(&self, schema: &Schema) -> Result<Vec<usize>> {
        self.axes
            .iter()
            .map(|axis| {
                let idx = schema
                    .index_of(&axis.name)
                    .ok_or_else(|| Error::Schema(format!("query lacks attribute '{}'", axis.name)))?;
                let expect = match axis.data {
                    AxisData::Num(_) | AxisData::GenNum(_) => AttributeKind::Numeric,
                    _ => AttributeKind::Categorical,
                };
                if schema.attribute(idx).kind != expect {
                    return Err(Error::Schema(format!(
                        "attribute '{}' has mismatched kind in query schema",
                        axis.name
                    )));
                }
                Ok(idx)
            })
            .collect()
    }

    fn compile_query(&self, mapping: &[usize], query: &Instance) -> Result<Vec<QueryAxis>> {
        let mut out = Vec::with_capacity(self.axes.len());
        for (axis, &col) in self.axes.iter().zip(mapping) {
            let value = &query.values[col];
            let q = match &axis.data {
                AxisData::Num(_) => {
                    let x = value.as_num().ok_or_else(|| type_err(&axis.name))?;
                    QueryAxis::Num(self.spec.stats.normalize(axis.stat_idx, x))
                }
                AxisData::GenNum(_) => {
                    let x = value.as_num().ok_or_else(|| type_err(&axis.name))?;
                    QueryAxis::GenNum(self.spec.stats.normalize(axis.stat_idx, x))
                }
                AxisData::Cat { dict, .. } => {
                    let s = value.as_cat().ok_or_else(|| type_err(&axis.name))?;
                    QueryAxis::Cat(dict.get(s).copied().unwrap_or(u32::MAX))
                }
                AxisData::GenCat { attr, .. } => {
                    let s = value.as_cat().ok_or_else(|| type_err(&axis.name))?;
                    let hierarchy = self
                        .hierarchies
                        .as_ref()
                        .expect("generalized axes imply hierarchies")
                        .categorical(attr)?;
                    QueryAxis::GenCat(hierarchy.ancestors_of_leaf(s)?)
                }
            };
            out.push(q);
        }
        Ok(out)
    }

    fn distance(&self, query: &[QueryAxis], row: usize) -> f64 {
        let mut acc = 0.0;
        for (axis, q) in self.axes.iter().zip(query) {
            let term = match (&axis.data, q) {
                (AxisData::Num(values), QueryAxis::Num(x)) => {
                    let d = x - values[row];
                    d * d
                }
                (AxisData::GenNum(mids), QueryAxis::GenNum(x)) => {
                    let d = x - mids[row];
                    d * d
                }
                (AxisData::Cat { codes, .. }, QueryAxis::Cat(code)) => {
                    f64::from(codes[row] != *code)
                }
                (AxisData::GenCat { levels, nodes, .. }, QueryAxis::GenCat(ancestors)) => {
                    f64::from(nodes[row] != ancestors[levels[row] as usize])
                }
                _ => unreachable!("query compiled against these axes"),
            };
            acc += axis.weight * term;
        }
        acc
    }

    fn scan(&self, query: &[QueryAxis]) -> Vec<Cand> {
        let k = self.k;
        if k >= 64 || k >= self.n_rows {
            let mut all: Vec<Cand> =
                (0..self.n_rows).map(|pos| self.candidate(query, pos)).collect();
            all.sort_unstable_by(Cand::order);
            all.truncate(k);
            return all;
        }
        let mut best: Vec<Cand> = Vec::with_capacity(k + 1);
        for pos in 0..self.n_rows {
            let cand = self.candidate(query, pos);
            if best.len() == k && Cand::order(&cand, &best[k - 1]) != std::cmp::Ordering::Less {
                continue;
            }
            let at = best.partition_point(|c| Cand::order(c, &cand) == std::cmp::Ordering::Less);
            best.insert(at, cand);
            best.truncate(k);
        }
        best
    }

    fn candidate(&self, query: &[QueryAxis], pos: usize) -> Cand {
        let dist = self.distance(query, pos);
        let key = match &self.tie_keys {
            Some(keys) => keys[pos],
            None => self.ids[pos],
        };
        Cand { dist, key, id: self.ids[pos], pos }
    }

    fn vote(&self, neighbors: &[Cand]) -> String {
        let mut counts = vec![0usize; self.label_names.len()];
        for c in neighbors {
            counts[self.labels[c.pos] as usize] += 1;
        }
        let best = counts.iter().copied().max().unwrap_or(0);
        // Voting tie: the nearest neighbor carrying a tied-max label wins.
        for c in neighbors {
            if counts[self.labels[c.pos] as usize] == best {
                return self.label_names[self.labels[c.pos] as usize].clone();
            }
        }
        unreachable!("at least one neighbor exists (k >= 1)")
    }
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    dist: f64,
    key: u64,
    id: u64,
    pos: usize,
}

impl Cand {
    fn order(a: &Cand, b: &Cand) -> std::cmp::Ordering {
        a.dist.total_cmp(&b.dist).then(a.key.cmp(&b.key)).then(a.id.cmp(&b.id))
    }
}

fn type_err(name: &str) -> Error {
    Error::Schema(format!("query value for '{name}' has the wrong kind"))
}

fn validate_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!("k must be in [1, {n}], got {k}")));
    }
    if k.is_multiple_of(2) {
        log::warn!("even k = {k}: neighbor-vote ties are possible and the error-rate bounds are stated for odd k");
    }
    Ok(())
}

pub(crate) fn resolve_weights(spec: &DistanceSpec, schema: &Schema) -> Result<Vec<f64>> {
    let n_axes = schema.distance_indices().len();
    match &spec.shape {
        Shape::IdentityAfterNormalization => Ok(vec![1.0; n_axes]),
        Shape::DiagonalWeights(w) => {
            if w.len() != n_axes {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {} distance attributes",
                    w.len(),
                    n_axes
                )));
            }
            Ok(w.clone())
        }
    }
}

fn pack_labels(train: &Dataset) -> Result<(Vec<u8>, Vec<String>)> {
    let class_idx = train.schema().class_index();
    let names = train.class_labels();
    let index: BTreeMap<&str, u8> =
        names.iter().enumerate().map(|(i, s)| (s.as_str(), i as u8)).collect();
    let labels = train
        .rows()
        .iter()
        .map(|r| index[r.values[class_idx].as_cat().unwrap()])
        .collect();
    Ok((labels, names))
}

fn pack_gen_labels(train: &AnonymizedDataset) -> Result<(Vec<u8>, Vec<String>)> {
    let class_idx = train.schema().class_index();
    let mut names = std::collections::BTreeSet::new();
    for row in train.rows() {
        match &row.values[class_idx] {
            GenValue::Exact(Value::Cat(s)) => {
                names.insert(s.clone());
            }
            other => {
                return Err(Error::Generalization(format!("non-exact class label {other:?}")))
            }
        }
    }
    let names: Vec<String> = names.into_iter().collect();
    let index: BTreeMap<&str, u8> =
        names.iter().enumerate().map(|(i, s)| (s.as_str(), i as u8)).collect();
    let labels = train
        .rows()
        .iter()
        .map(|r| match &r.values[class_idx] {
            GenValue::Exact(Value::Cat(s)) => index[s.as_str()],
            _ => unreachable!("validated above"),
        })
        .collect();
    Ok((labels, names))
}

fn tie_key_table(tie: &TiePolicy, ids: &[u64]) -> Option<Vec<u64>> {
    match tie {
        TiePolicy::LowestRowId => None,
        TiePolicy::SeededRandom(seed) => {
            Some(ids.iter().map(|&id| derive_seed(*seed, "tie", id)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttributeSchema;

    fn schema() -> Schema {
        Schema::new(vec![
            AttributeSchema::new("x", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
            AttributeSchema::new("s", AttributeKind::Categorical, AttributeRole::Sensitive),
            AttributeSchema::new("c", AttributeKind::Categorical, AttributeRole::Class),
        ])
        .unwrap()
    }

    fn row(x: f64, s: &str, c: &str) -> Vec<Value> {
        vec![Value::Num(x), Value::Cat(s.into()), Value::Cat(c.into())]
    }

    fn line_dataset() -> Dataset {
        Dataset::from_rows(
            schema(),
            vec![row(0.0, "a", "+"), row(1.0, "a", "+"), row(2.0, "a", "-")],
        )
        .unwrap()
    }

    fn query(x: f64, s: &str) -> Instance {
        Instance { id: 1000, values: row(x, s, "+") }
    }

    #[test]
    fn nearest_neighbor_on_a_line() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        let got = model.neighbors(data.schema(), &query(0.1, "a")).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 0);
        // x normalized by range 2: ((0.1 - 0.0)/2)^2 = 0.0025
        assert!((got[0].1 - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn training_row_is_its_own_nearest_neighbor() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        let got = model.neighbors(data.schema(), &query(1.0, "a")).unwrap();
        assert_eq!(got[0], (1, 0.0));
    }

    #[test]
    fn k_equals_n_returns_all_sorted() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 3, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        let got = model.neighbors(data.schema(), &query(0.0, "a")).unwrap();
        assert_eq!(got.len(), 3);
        assert!(got.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(got.iter().map(|g| g.0).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn classify_majority_and_k1() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let nn =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats.clone()), TiePolicy::LowestRowId)
                .unwrap();
        assert_eq!(nn.classify(data.schema(), &query(1.9, "a")).unwrap(), "-");
        let k3 =
            KnnModel::fit(&data, 3, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        // neighbor labels {+, +, -} -> +
        assert_eq!(k3.classify(data.schema(), &query(1.0, "a")).unwrap(), "+");
    }

    #[test]
    fn error_rate_perfect_and_constant() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        assert_eq!(model.error_rate(&data).unwrap(), 0.0);

        // 1-row training set: constant classifier on a balanced test set.
        let one = Dataset::from_rows(
            schema(),
            vec![row(0.0, "a", "+"), row(0.0, "a", "-")],
        )
        .unwrap();
        let balanced = Dataset::from_rows(
            schema(),
            vec![row(0.2, "a", "+"), row(0.4, "a", "-"), row(0.6, "a", "+"), row(0.8, "a", "-")],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&one).unwrap();
        let constant =
            KnnModel::fit(&one, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        assert_eq!(constant.error_rate(&balanced).unwrap(), 0.5);
    }

    #[test]
    fn unseen_category_counts_as_mismatch() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        let got = model.neighbors(data.schema(), &query(0.0, "zzz")).unwrap();
        assert_eq!(got[0].0, 0);
        assert!((got[0].1 - 1.0).abs() < 1e-15, "categorical mismatch adds 1");
    }

    #[test]
    fn distance_ties_resolve_by_lowest_row_id() {
        let data = Dataset::from_rows(
            schema(),
            vec![row(0.0, "a", "+"), row(2.0, "a", "-"), row(0.0, "b", "+"), row(2.0, "b", "-")],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 2, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        // Query equidistant from rows 0 and 1 on x, matching sensitive "a".
        let got = model.neighbors(data.schema(), &query(1.0, "a")).unwrap();
        assert_eq!(got.iter().map(|g| g.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn seeded_tie_policy_is_deterministic() {
        let data = Dataset::from_rows(
            schema(),
            vec![row(0.0, "a", "+"), row(0.0, "a", "-"), row(0.0, "a", "+"), row(0.0, "a", "-")],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&data).unwrap();
        let m1 = KnnModel::fit(
            &data,
            2,
            DistanceSpec::identity(stats.clone()),
            TiePolicy::SeededRandom(5),
        )
        .unwrap();
        let m2 =
            KnnModel::fit(&data, 2, DistanceSpec::identity(stats), TiePolicy::SeededRandom(5))
                .unwrap();
        let q = query(0.0, "a");
        assert_eq!(
            m1.neighbors(data.schema(), &q).unwrap(),
            m2.neighbors(data.schema(), &q).unwrap()
        );
    }

    #[test]
    fn scaling_weights_preserves_neighbor_order() {
        let data = Dataset::from_rows(
            schema(),
            vec![
                row(0.0, "a", "+"),
                row(0.3, "b", "-"),
                row(0.7, "a", "+"),
                row(1.0, "c", "-"),
                row(0.5, "b", "+"),
            ],
        )
        .unwrap();
        let stats = NormalizationStats::fit(&data).unwrap();
        let w = vec![0.7, 2.3];
        let scaled: Vec<f64> = w.iter().map(|x| x * 17.0).collect();
        let a = KnnModel::fit(
            &data,
            5,
            DistanceSpec::diagonal(stats.clone(), w).unwrap(),
            TiePolicy::LowestRowId,
        )
        .unwrap();
        let b = KnnModel::fit(
            &data,
            5,
            DistanceSpec::diagonal(stats, scaled).unwrap(),
            TiePolicy::LowestRowId,
        )
        .unwrap();
        let q = query(0.4, "b");
        let ids_a: Vec<u64> =
            a.neighbors(data.schema(), &q).unwrap().iter().map(|g| g.0).collect();
        let ids_b: Vec<u64> =
            b.neighbors(data.schema(), &q).unwrap().iter().map(|g| g.0).collect();
        assert_eq!(ids_a, ids_b);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        assert!(KnnModel::fit(
            &data,
            0,
            DistanceSpec::identity(stats.clone()),
            TiePolicy::LowestRowId
        )
        .is_err());
        assert!(KnnModel::fit(
            &data,
            4,
            DistanceSpec::identity(stats.clone()),
            TiePolicy::LowestRowId
        )
        .is_err());
        assert!(DistanceSpec::diagonal(stats.clone(), vec![-1.0, 1.0]).is_err());
        // Wrong weight count surfaces at fit time.
        let bad = DistanceSpec::diagonal(stats, vec![1.0]).unwrap();
        assert!(KnnModel::fit(&data, 1, bad, TiePolicy::LowestRowId).is_err());
    }

    #[test]
    fn schema_mismatch_rejected() {
        let data = line_dataset();
        let stats = NormalizationStats::fit(&data).unwrap();
        let model =
            KnnModel::fit(&data, 1, DistanceSpec::identity(stats), TiePolicy::LowestRowId).unwrap();
        let other = Schema::new(vec![
            AttributeSchema::new("y", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
            AttributeSchema::new("s", AttributeKind::Categorical, AttributeRole::Sensitive),
            AttributeSchema::new("c", AttributeKind::Categorical, AttributeRole::Class),
        ])
        .unwrap();
        let q = query(0.0, "a");
        assert!(model.neighbors(&other, &q).is_err());
    }

    #[test]
    fn anatomized_training_query_hits_zero_distance_row() {
        use crate::anatomy;
        let data = Dataset::from_rows(
            schema(),
            vec![row(1.0, "x", "+"), row(2.0, "y", "+"), row(3.0, "x", "-"), row(4.0, "y", "-")],
        )
        .unwrap();
        let part = anatomy::build_groups(&data, 2, 7).unwrap();
        let (it, st) = anatomy::emit_tables(&data, &part).unwrap();
        let joined = anatomy::join_anatomized(&it, &st).unwrap();
        let stats = NormalizationStats::fit(joined.dataset()).unwrap();
        let model = KnnModel::fit(
            joined.dataset(),
            1,
            DistanceSpec::identity(stats),
            TiePolicy::LowestRowId,
        )
        .unwrap();
        // Each original instance appears verbatim among the joined rows,
        // so a training-origin query lands at distance 0 with its label.
        let class_idx = data.schema().class_index();
        for src in data.rows() {
            let got = model.neighbors(data.schema(), src).unwrap();
            assert_eq!(got[0].1, 0.0);
            let predicted = model.classify(data.schema(), src).unwrap();
            assert_eq!(predicted, src.values[class_idx].to_string());
        }
    }
}

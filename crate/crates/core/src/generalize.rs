//! Generalization-based k-anonymity baseline: per-attribute hierarchies
//! (categorical trees, numeric interval ladders), greedy full-domain
//! level ascent, and the interval/descendant distance used to classify
//! exact test rows against generalized training rows.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, Instance, Schema, Value};
use crate::knn::DistanceSpec;
use crate::{Error, Result};

/// Raw categorical hierarchy node as it appears in the JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

/// Compiled categorical hierarchy: a rooted tree of uniform leaf depth.
/// Level 0 is the leaf itself; the root (single "any" node) sits at
/// level `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalHierarchy {
    labels: Vec<String>,
    parent: Vec<Option<u32>>,
    level: Vec<u8>,
    by_label: BTreeMap<String, u32>,
    leaves: Vec<u32>,
    depth: u8,
}

impl CategoricalHierarchy {
    pub fn from_tree(root: &TreeNode) -> Result<CategoricalHierarchy> {
        let mut labels = Vec::new();
        let mut parent = Vec::new();
        let mut height = Vec::new(); // distance to deepest descendant, filled later
        let mut children_of: Vec<Vec<u32>> = Vec::new();

        fn walk(
            node: &TreeNode,
            par: Option<u32>,
            labels: &mut Vec<String>,
            parent: &mut Vec<Option<u32>>,
            children_of: &mut Vec<Vec<u32>>,
            height: &mut Vec<u8>,
        ) -> u32 {
            let id = labels.len() as u32;
            labels.push(node.label.clone());
            parent.push(par);
            children_of.push(Vec::new());
            height.push(0);
            for child in &node.children {
                let c = walk(child, Some(id), labels, parent, children_of, height);
                children_of[id as usize].push(c);
            }
            id
        }
        walk(root, None, &mut labels, &mut parent, &mut children_of, &mut height);

        let mut by_label = BTreeMap::new();
        for (id, label) in labels.iter().enumerate() {
            if by_label.insert(label.clone(), id as u32).is_some() {
                return Err(Error::Generalization(format!(
                    "duplicate node label '{label}' in hierarchy"
                )));
            }
        }

        // Leaf depths must be uniform so that "ancestor at level v" is
        // well defined for every value.
        let mut depth_of = vec![0u8; labels.len()];
        for id in 0..labels.len() {
            let mut d = 0u8;
            let mut cur = parent[id];
            while let Some(p) = cur {
                d += 1;
                cur = parent[p as usize];
            }
            depth_of[id] = d;
        }
        let leaves: Vec<u32> = (0..labels.len() as u32)
            .filter(|&id| children_of[id as usize].is_empty())
            .collect();
        let leaf_depth = depth_of[leaves[0] as usize];
        if leaves.iter().any(|&id| depth_of[id as usize] != leaf_depth) {
            return Err(Error::Generalization(
                "hierarchy leaves must all sit at the same depth".into(),
            ));
        }
        if leaf_depth == 0 {
            return Err(Error::Generalization("hierarchy must have at least two levels".into()));
        }
        // level counts upward from the leaves.
        let level: Vec<u8> = depth_of.iter().map(|d| leaf_depth - d).collect();
        Ok(CategoricalHierarchy { labels, parent, level, by_label, leaves, depth: leaf_depth })
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = &str> {
        self.leaves.iter().map(|&id| self.labels[id as usize].as_str())
    }

    pub fn label_of(&self, node: u32) -> &str {
        &self.labels[node as usize]
    }

    pub fn leaf_node(&self, value: &str) -> Result<u32> {
        let id = self
            .by_label
            .get(value)
            .copied()
            .ok_or_else(|| Error::Generalization(format!("value '{value}' outside hierarchy domain")))?;
        if self.level[id as usize] != 0 {
            return Err(Error::Generalization(format!("'{value}' is not a leaf value")));
        }
        Ok(id)
    }

    pub fn node_at_level(&self, label: &str, level: u8) -> Result<u32> {
        let id = self
            .by_label
            .get(label)
            .copied()
            .ok_or_else(|| Error::Generalization(format!("node '{label}' outside hierarchy domain")))?;
        if self.level[id as usize] != level {
            return Err(Error::Generalization(format!(
                "node '{label}' sits at level {}, not {level}",
                self.level[id as usize]
            )));
        }
        Ok(id)
    }

    /// Node ids of a leaf value's ancestors, indexed by level (entry 0
    /// is the leaf itself, entry `depth` the root).
    pub fn ancestors_of_leaf(&self, value: &str) -> Result<Vec<u32>> {
        let mut chain = Vec::with_capacity(self.depth as usize + 1);
        let mut cur = self.leaf_node(value)?;
        chain.push(cur);
        while let Some(p) = self.parent[cur as usize] {
            chain.push(p);
            cur = p;
        }
        Ok(chain)
    }

    /// Is `value` a leaf underneath the node `label` at `level`?
    pub fn is_descendant(&self, value: &str, label: &str, level: u8) -> Result<bool> {
        let node = self.node_at_level(label, level)?;
        let ancestors = self.ancestors_of_leaf(value)?;
        Ok(ancestors[level as usize] == node)
    }
}

/// Numeric generalization ladder: per level (1-based), the breakpoints
/// of an interval partition. Levels must be nested coarsenings and the
/// top level is a single all-covering interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct NumericLadder {
    levels: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for NumericLadder {
    type Error = Error;
    fn try_from(levels: Vec<Vec<f64>>) -> Result<Self> {
        NumericLadder::new(levels)
    }
}

impl From<NumericLadder> for Vec<Vec<f64>> {
    fn from(l: NumericLadder) -> Self {
        l.levels
    }
}

impl NumericLadder {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<NumericLadder> {
        if levels.is_empty() {
            return Err(Error::Generalization("numeric ladder has no levels".into()));
        }
        for breaks in &levels {
            if breaks.len() < 2 || breaks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Generalization(
                    "ladder breakpoints must be strictly increasing with at least 2 entries".into(),
                ));
            }
        }
        let lo = levels[0][0];
        let hi = *levels[0].last().unwrap();
        for breaks in &levels[1..] {
            if breaks[0] != lo || *breaks.last().unwrap() != hi {
                return Err(Error::Generalization("ladder levels must cover the same range".into()));
            }
        }
        for w in levels.windows(2) {
            if !w[1].iter().all(|b| w[0].contains(b)) {
                return Err(Error::Generalization(
                    "each ladder level must coarsen the previous one".into(),
                ));
            }
        }
        if levels.last().unwrap().len() != 2 {
            return Err(Error::Generalization(
                "top ladder level must be a single all-covering interval".into(),
            ));
        }
        Ok(NumericLadder { levels })
    }

    pub fn max_level(&self) -> u8 {
        self.levels.len() as u8
    }

    /// Interval index containing `x` at a 1-based level; values outside
    /// the covered range clamp into the first/last interval.
    pub fn interval_index(&self, x: f64, level: u8) -> usize {
        let breaks = &self.levels[level as usize - 1];
        let m = breaks.len() - 1;
        let i = breaks.partition_point(|b| *b <= x);
        i.saturating_sub(1).min(m - 1)
    }

    pub fn interval_at(&self, x: f64, level: u8) -> (f64, f64) {
        let breaks = &self.levels[level as usize - 1];
        let i = self.interval_index(x, level);
        (breaks[i], breaks[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawHierarchy {
    Categorical(TreeNode),
    Numeric(Vec<Vec<f64>>),
}

enum Compiled {
    Categorical(CategoricalHierarchy),
    Numeric(NumericLadder),
}

/// Generalization hierarchies per quasi-identifying attribute.
pub struct HierarchySet {
    by_attr: BTreeMap<String, Compiled>,
}

impl HierarchySet {
    pub fn load_json(path: &Path) -> Result<HierarchySet> {
        let text = std::fs::read_to_string(path)?;
        let raw: BTreeMap<String, RawHierarchy> = serde_json::from_str(&text)?;
        Self::compile(raw)
    }

    fn compile(raw: BTreeMap<String, RawHierarchy>) -> Result<HierarchySet> {
        let mut by_attr = BTreeMap::new();
        for (name, h) in raw {
            let compiled = match h {
                RawHierarchy::Categorical(tree) => {
                    Compiled::Categorical(CategoricalHierarchy::from_tree(&tree)?)
                }
                RawHierarchy::Numeric(levels) => Compiled::Numeric(NumericLadder::new(levels)?),
            };
            by_attr.insert(name, compiled);
        }
        Ok(HierarchySet { by_attr })
    }

    /// Deterministic fallback hierarchies built from a training split:
    /// halving interval ladders (8/4/2/1) for numeric attributes and a
    /// flat two-level tree under "*" for categorical ones.
    pub fn default_for(train: &Dataset) -> Result<HierarchySet> {
        let mut by_attr = BTreeMap::new();
        for &idx in &train.schema().quasi_indices() {
            let attr = train.schema().attribute(idx);
            match attr.kind {
                AttributeKind::Numeric => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for row in train.rows() {
                        let x = row.values[idx].as_num().unwrap();
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                    if lo == hi {
                        lo -= 0.5;
                        hi += 0.5;
                    }
                    let mut levels = Vec::new();
                    for m in [8usize, 4, 2, 1] {
                        let breaks: Vec<f64> =
                            (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
                        levels.push(breaks);
                    }
                    by_attr.insert(attr.name.clone(), Compiled::Numeric(NumericLadder::new(levels)?));
                }
                AttributeKind::Categorical => {
                    let mut seen = std::collections::BTreeSet::new();
                    for row in train.rows() {
                        seen.insert(row.values[idx].as_cat().unwrap().to_string());
                    }
                    let tree = TreeNode {
                        label: "*".into(),
                        children: seen
                            .into_iter()
                            .map(|label| TreeNode { label, children: vec![] })
                            .collect(),
                    };
                    by_attr.insert(
                        attr.name.clone(),
                        Compiled::Categorical(CategoricalHierarchy::from_tree(&tree)?),
                    );
                }
            }
        }
        Ok(HierarchySet { by_attr })
    }

    pub fn categorical(&self, name: &str) -> Result<&CategoricalHierarchy> {
        match self.by_attr.get(name) {
            Some(Compiled::Categorical(h)) => Ok(h),
            Some(Compiled::Numeric(_)) => {
                Err(Error::Generalization(format!("hierarchy for '{name}' is numeric")))
            }
            None => Err(Error::Generalization(format!("missing hierarchy for '{name}'"))),
        }
    }

    pub fn numeric(&self, name: &str) -> Result<&NumericLadder> {
        match self.by_attr.get(name) {
            Some(Compiled::Numeric(l)) => Ok(l),
            Some(Compiled::Categorical(_)) => {
                Err(Error::Generalization(format!("hierarchy for '{name}' is categorical")))
            }
            None => Err(Error::Generalization(format!("missing hierarchy for '{name}'"))),
        }
    }

    fn max_level(&self, name: &str, kind: AttributeKind) -> Result<u8> {
        match kind {
            AttributeKind::Numeric => Ok(self.numeric(name)?.max_level()),
            AttributeKind::Categorical => Ok(self.categorical(name)?.depth()),
        }
    }
}

/// A possibly generalized attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GenValue {
    Exact(Value),
    Interval { lo: f64, hi: f64 },
    Node { label: String, level: u8 },
}

impl std::fmt::Display for GenValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GenValue::Exact(v) => write!(f, "{v}"),
            GenValue::Interval { lo, hi } => write!(f, "[{lo},{hi}]"),
            GenValue::Node { label, .. } => write!(f, "{label}"),
        }
    }
}

/// One anonymized row; ids are inherited from the source rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GenInstance {
    pub id: u64,
    pub values: Vec<GenValue>,
}

/// Generalization-anonymized training data D_k: every quasi-identifier
/// tuple is shared by at least k rows.
#[derive(Debug, Clone)]
pub struct AnonymizedDataset {
    schema: Arc<Schema>,
    rows: Vec<GenInstance>,
    k: usize,
    levels: Vec<u8>,
    suppressed: usize,
}

impl AnonymizedDataset {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[GenInstance] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Final generalization level per schema attribute (0 for non-quasi).
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn suppressed(&self) -> usize {
        self.suppressed
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.attributes().iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.values.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Hash, PartialEq, Eq, Clone)]
enum KeyPart {
    Bits(u64),
    Code(u32),
    Slot(usize),
}

fn row_key(
    row: &Instance,
    quasi: &[(usize, AttributeKind, String)],
    levels: &[u8],
    hierarchies: &HierarchySet,
) -> Result<Vec<KeyPart>> {
    let mut key = Vec::with_capacity(quasi.len());
    for ((idx, kind, name), &level) in quasi.iter().zip(levels) {
        let part = match kind {
            AttributeKind::Numeric => {
                let x = row.values[*idx].as_num().unwrap();
                if level == 0 {
                    KeyPart::Bits(x.to_bits())
                } else {
                    KeyPart::Slot(hierarchies.numeric(name)?.interval_index(x, level))
                }
            }
            AttributeKind::Categorical => {
                let s = row.values[*idx].as_cat().unwrap();
                let h = hierarchies.categorical(name)?;
                KeyPart::Code(h.ancestors_of_leaf(s)?[level as usize])
            }
        };
        key.push(part);
    }
    Ok(key)
}

/// Greedy full-domain generalization: repeatedly promote the attribute
/// whose one-level ascent most reduces the number of equivalence
/// classes smaller than k, until k-anonymity holds. Rows still
/// violating with every attribute at its top level are suppressed.
pub fn generalize(train: &Dataset, k: usize, hierarchies: &HierarchySet) -> Result<AnonymizedDataset> {
    if k < 2 || k > train.n() {
        return Err(Error::InvalidParameter(format!(
            "k must be in [2, {}], got {k}",
            train.n()
        )));
    }
    let schema = train.schema();
    let quasi: Vec<(usize, AttributeKind, String)> = schema
        .quasi_indices()
        .iter()
        .map(|&i| (i, schema.attribute(i).kind, schema.attribute(i).name.clone()))
        .collect();
    let max_levels: Vec<u8> = quasi
        .iter()
        .map(|(_, kind, name)| hierarchies.max_level(name, *kind))
        .collect::<Result<_>>()?;

    let violations = |levels: &[u8]| -> Result<usize> {
        let mut classes: HashMap<Vec<KeyPart>, usize> = HashMap::new();
        for row in train.rows() {
            *classes.entry(row_key(row, &quasi, levels, hierarchies)?).or_insert(0) += 1;
        }
        Ok(classes.values().filter(|&&size| size < k).count())
    };

    let mut levels = vec![0u8; quasi.len()];
    if !quasi.is_empty() {
        loop {
            if violations(&levels)? == 0 {
                break;
            }
            let mut best: Option<(usize, usize)> = None; // (violations, attr)
            for a in 0..quasi.len() {
                if levels[a] >= max_levels[a] {
                    continue;
                }
                let mut trial = levels.clone();
                trial[a] += 1;
                let v = violations(&trial)?;
                if best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, a));
                }
            }
            match best {
                Some((_, a)) => levels[a] += 1,
                None => break, // every attribute is at its top level
            }
        }
    }

    // Materialize rows at the final level vector; suppress leftovers.
    let mut classes: HashMap<Vec<KeyPart>, usize> = HashMap::new();
    for row in train.rows() {
        *classes.entry(row_key(row, &quasi, &levels, hierarchies)?).or_insert(0) += 1;
    }
    let mut rows = Vec::with_capacity(train.n());
    let mut suppressed = 0usize;
    for row in train.rows() {
        if quasi.is_empty() {
            // No quasi attributes: one big equivalence class of size N ≥ k.
        } else if classes[&row_key(row, &quasi, &levels, hierarchies)?] < k {
            suppressed += 1;
            continue;
        }
        let mut values = Vec::with_capacity(schema.len());
        for (idx, attr) in schema.attributes().iter().enumerate() {
            let quasi_pos = quasi.iter().position(|(q, _, _)| *q == idx);
            let v = match quasi_pos {
                None => GenValue::Exact(row.values[idx].clone()),
                Some(pos) => {
                    let level = levels[pos];
                    if level == 0 {
                        GenValue::Exact(row.values[idx].clone())
                    } else {
                        match attr.kind {
                            AttributeKind::Numeric => {
                                let x = row.values[idx].as_num().unwrap();
                                let (lo, hi) = hierarchies.numeric(&attr.name)?.interval_at(x, level);
                                GenValue::Interval { lo, hi }
                            }
                            AttributeKind::Categorical => {
                                let s = row.values[idx].as_cat().unwrap();
                                let h = hierarchies.categorical(&attr.name)?;
                                let node = h.ancestors_of_leaf(s)?[level as usize];
                                GenValue::Node { label: h.label_of(node).to_string(), level }
                            }
                        }
                    }
                }
            };
            values.push(v);
        }
        rows.push(GenInstance { id: row.id, values });
    }
    if suppressed > 0 {
        log::info!("generalization suppressed {suppressed} rows still violating k={k}");
    }

    let mut level_by_attr = vec![0u8; schema.len()];
    for (pos, (idx, _, _)) in quasi.iter().enumerate() {
        level_by_attr[*idx] = levels[pos];
    }
    Ok(AnonymizedDataset {
        schema: train.schema_arc(),
        rows,
        k,
        levels: level_by_attr,
        suppressed,
    })
}

/// A quasi-identifier equivalence class smaller than k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolatingClass {
    pub key: String,
    pub size: usize,
}

/// Outcome of `verify_k_anonymity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KAnonymityReport {
    pub k: usize,
    pub ok: bool,
    pub classes: usize,
    pub violations: Vec<ViolatingClass>,
}

/// Check that every quasi-identifier equivalence class has size ≥ k.
pub fn verify_k_anonymity(data: &AnonymizedDataset) -> KAnonymityReport {
    let quasi = data.schema().quasi_indices();
    let mut classes: BTreeMap<String, usize> = BTreeMap::new();
    for row in data.rows() {
        let key = quasi
            .iter()
            .map(|&i| match &row.values[i] {
                GenValue::Exact(v) => format!("={v}"),
                GenValue::Interval { lo, hi } => format!("[{lo},{hi}]"),
                GenValue::Node { label, level } => format!("~{level}:{label}"),
            })
            .collect::<Vec<_>>()
            .join("\u{1f}");
        *classes.entry(key).or_insert(0) += 1;
    }
    let violations: Vec<ViolatingClass> = classes
        .iter()
        .filter(|(_, &size)| size < data.k())
        .map(|(key, &size)| ViolatingClass { key: key.replace('\u{1f}', " | "), size })
        .collect();
    KAnonymityReport { k: data.k(), ok: violations.is_empty(), classes: classes.len(), violations }
}

/// Distance between a generalized training row and an exact test row:
/// interval values contribute through their normalized midpoint,
/// hierarchy nodes contribute 0 when the test value is a descendant and
/// 1 otherwise, exact values use the standard metric.
pub fn generalized_distance(
    u: &GenInstance,
    u_schema: &Schema,
    v: &Instance,
    v_schema: &Schema,
    spec: &DistanceSpec,
    hierarchies: &HierarchySet,
) -> Result<f64> {
    let weights = crate::knn::resolve_weights(spec, u_schema)?;
    let mut acc = 0.0;
    for (axis_pos, &attr_idx) in u_schema.distance_indices().iter().enumerate() {
        let attr = u_schema.attribute(attr_idx);
        let v_idx = v_schema
            .index_of(&attr.name)
            .ok_or_else(|| Error::Schema(format!("test row lacks attribute '{}'", attr.name)))?;
        let term = match &u.values[attr_idx] {
            GenValue::Exact(Value::Num(x)) => {
                let q = v.values[v_idx]
                    .as_num()
                    .ok_or_else(|| Error::Schema(format!("'{}' kind mismatch", attr.name)))?;
                let d = spec.stats.normalize(attr_idx, q) - spec.stats.normalize(attr_idx, *x);
                d * d
            }
            GenValue::Interval { lo, hi } => {
                let q = v.values[v_idx]
                    .as_num()
                    .ok_or_else(|| Error::Schema(format!("'{}' kind mismatch", attr.name)))?;
                let mid = 0.5 * (lo + hi);
                let d = spec.stats.normalize(attr_idx, q) - spec.stats.normalize(attr_idx, mid);
                d * d
            }
            GenValue::Exact(Value::Cat(s)) => {
                let q = v.values[v_idx]
                    .as_cat()
                    .ok_or_else(|| Error::Schema(format!("'{}' kind mismatch", attr.name)))?;
                f64::from(q != s)
            }
            GenValue::Node { label, level } => {
                let q = v.values[v_idx]
                    .as_cat()
                    .ok_or_else(|| Error::Schema(format!("'{}' kind mismatch", attr.name)))?;
                let h = hierarchies.categorical(&attr.name)?;
                f64::from(!h.is_descendant(q, label, *level)?)
            }
        };
        acc += weights[axis_pos] * term;
    }
    Ok(acc)
}

//! Experiment harness: k-fold cross-validation comparisons between
//! original, anatomized, and anonymized classifiers; the incremental
//! convergence protocol; the synthetic bounds simulation; and paired
//! significance testing. Training folds are protected, test folds are
//! never touched.

pub mod report;
pub mod synth;

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anatomy;
use crate::dataset::{self, Dataset, MissingPolicy, Schema};
use crate::generalize::{self, HierarchySet};
use crate::knn::{DistanceSpec, KnnModel, TiePolicy};
use crate::numeric::{derive_seed, normal_cdf, student_t_two_sided_critical};
use crate::theory::{self, check_bounds};
use crate::{Error, Result, ARTIFACT_VERSION};

pub use report::{
    BoundsCell, BoundsReport, Comparison, ConvergenceReport, CurvePoint, ErrorCell, ErrorReport,
    VariantSummary, REPORT_SCHEMA_VERSION,
};

/// Confidence levels at which every pairwise comparison is reported.
pub const CONFIDENCE_LEVELS: [f64; 5] = [0.8, 0.9, 0.95, 0.98, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Cv,
    Convergence,
    BoundsSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Original,
    Anatomized,
    Anonymized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

/// A concrete classifier variant: original data, anatomized at some l,
/// or anonymized at some k-anonymity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VariantId {
    pub kind: VariantKind,
    pub l: Option<usize>,
    pub anonymity_k: Option<usize>,
}

impl VariantId {
    pub fn original() -> Self {
        Self { kind: VariantKind::Original, l: None, anonymity_k: None }
    }

    pub fn anatomized(l: usize) -> Self {
        Self { kind: VariantKind::Anatomized, l: Some(l), anonymity_k: None }
    }

    pub fn anonymized(k: usize) -> Self {
        Self { kind: VariantKind::Anonymized, l: None, anonymity_k: Some(k) }
    }

    pub fn name(&self) -> String {
        match self.kind {
            VariantKind::Original => "original".into(),
            VariantKind::Anatomized => format!("anatomized_l{}", self.l.unwrap_or(0)),
            VariantKind::Anonymized => format!("anonymized_k{}", self.anonymity_k.unwrap_or(0)),
        }
    }

    /// The l that enters the (N·l) convergence term; 1 when the variant
    /// does not anatomize.
    pub fn effective_l(&self) -> usize {
        self.l.unwrap_or(1)
    }
}

/// Experiment configuration; a JSON file mirrors this struct and CLI
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub hierarchies: Option<PathBuf>,
    pub protocol: Protocol,
    pub variants: Vec<VariantKind>,
    pub k_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub anonymity_k_values: Vec<usize>,
    pub folds: usize,
    pub partitions: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            hierarchies: None,
            protocol: Protocol::Cv,
            variants: vec![VariantKind::Original, VariantKind::Anatomized],
            k_values: vec![1],
            l_values: vec![2],
            anonymity_k_values: vec![2],
            folds: 10,
            partitions: 5,
            seed: 42,
            out_dir: None,
            format: OutputFormat::Json,
        }
    }
}

impl ExperimentConfig {
    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::InvalidParameter("at least one variant must be enabled".into()));
        }
        if self.k_values.is_empty() {
            return Err(Error::InvalidParameter("k_values must not be empty".into()));
        }
        if self.variants.contains(&VariantKind::Anatomized) && self.l_values.is_empty() {
            return Err(Error::InvalidParameter("anatomized variant needs l_values".into()));
        }
        if self.variants.contains(&VariantKind::Anonymized) && self.anonymity_k_values.is_empty() {
            return Err(Error::InvalidParameter(
                "anonymized variant needs anonymity_k_values".into(),
            ));
        }
        Ok(())
    }

    /// Expand the enabled variant kinds into concrete variant ids.
    pub fn variant_ids(&self) -> Vec<VariantId> {
        let mut ids = Vec::new();
        for kind in &self.variants {
            match kind {
                VariantKind::Original => ids.push(VariantId::original()),
                VariantKind::Anatomized => {
                    ids.extend(self.l_values.iter().map(|&l| VariantId::anatomized(l)))
                }
                VariantKind::Anonymized => {
                    ids.extend(self.anonymity_k_values.iter().map(|&k| VariantId::anonymized(k)))
                }
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }

    /// Load the dataset and schema named by the config.
    pub fn load_data(&self) -> Result<Dataset> {
        let schema_path = self
            .schema
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("config lacks a schema path".into()))?;
        let data_path = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("config lacks a data path".into()))?;
        let schema = Schema::load_json(schema_path)?;
        let outcome = Dataset::load_csv(data_path, &schema, MissingPolicy::DropRow)?;
        Ok(outcome.dataset)
    }
}

/// Stable content hash of a dataset (schema plus rows). Used to check
/// that test folds are bit-identical before and after an experiment.
pub fn dataset_fingerprint(data: &Dataset) -> u64 {
    let mut h = Fnv64::new();
    for attr in data.schema().attributes() {
        h.write(attr.name.as_bytes());
        h.write(format!("{:?}{:?}", attr.kind, attr.role).as_bytes());
    }
    for row in data.rows() {
        h.write_u64(row.id);
        for v in &row.values {
            match v {
                crate::dataset::Value::Num(x) => h.write_u64(x.to_bits()),
                crate::dataset::Value::Cat(s) => h.write(s.as_bytes()),
            }
        }
    }
    h.finish()
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// Outcome of a paired two-sided Student t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestOutcome {
    pub t: f64,
    pub significant: bool,
}

/// Paired two-sided t-test on fold-aligned error vectors:
/// t = mean(a−b) / (sd(a−b)/√n) against Student-t with n−1 degrees of
/// freedom. Zero variance of the differences degenerates to t = 0 (not
/// significant) for zero mean and t = ±∞ (significant at every level)
/// otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64], confidence: f64) -> Result<TTestOutcome> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidParameter(
            "paired t-test needs two equal-length samples of size >= 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::InvalidParameter(format!("confidence must be in [0,1), got {confidence}")));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTestOutcome { t: 0.0, significant: false }
        } else {
            TTestOutcome { t: mean.signum() * f64::INFINITY, significant: true }
        });
    }
    let t = mean / (sd / n.sqrt());
    let critical = student_t_two_sided_critical(confidence, a.len() - 1);
    Ok(TTestOutcome { t, significant: t.abs() > critical })
}

/// The training data of one variant on one fold.
enum VariantTraining {
    Exact(Dataset),
    Generalized(generalize::AnonymizedDataset, Arc<HierarchySet>),
}

fn build_variant_training(
    id: &VariantId,
    train: &Dataset,
    seed: u64,
    context: &str,
    file_hierarchies: &Option<Arc<HierarchySet>>,
    domain: &Dataset,
) -> Result<VariantTraining> {
    match id.kind {
        VariantKind::Original => Ok(VariantTraining::Exact(train.clone())),
        VariantKind::Anatomized => {
            let l = id.l.unwrap();
            let partition = anatomy::build_groups(train, l, seed)
                .map_err(|e| Error::Anatomy(format!("{context}: {e}")))?;
            let (it, st) = anatomy::emit_tables(train, &partition)?;
            Ok(VariantTraining::Exact(anatomy::join_anatomized(&it, &st)?.into_dataset()))
        }
        VariantKind::Anonymized => {
            let ak = id.anonymity_k.unwrap();
            // Hierarchies are domain knowledge: prefer the configured
            // file, otherwise derive a default set from the full
            // dataset's domain (test rows themselves are never altered).
            let h = match file_hierarchies {
                Some(h) => Arc::clone(h),
                None => Arc::new(HierarchySet::default_for(domain)?),
            };
            let anon = generalize::generalize(train, ak, &h)
                .map_err(|e| Error::Generalization(format!("{context}: {e}")))?;
            Ok(VariantTraining::Generalized(anon, h))
        }
    }
}

fn fit_and_measure(training: &VariantTraining, k: usize, test: &Dataset) -> Result<f64> {
    match training {
        VariantTraining::Exact(train) => {
            let stats = dataset::NormalizationStats::fit(train)?;
            let model = KnnModel::fit(train, k, DistanceSpec::identity(stats), TiePolicy::LowestRowId)?;
            model.error_rate(test)
        }
        VariantTraining::Generalized(anon, h) => {
            let stats = gen_stats(anon)?;
            let model = KnnModel::fit_generalized(
                anon,
                Arc::clone(h),
                k,
                DistanceSpec::identity(stats),
                TiePolicy::LowestRowId,
            )?;
            model.error_rate(test)
        }
    }
}

/// Normalization statistics over an anonymized dataset: intervals enter
/// through their midpoints.
fn gen_stats(anon: &generalize::AnonymizedDataset) -> Result<dataset::NormalizationStats> {
    use crate::dataset::{AttributeKind, Value};
    use crate::generalize::GenValue;
    let schema = anon.schema();
    let rows: Vec<Vec<Value>> = anon
        .rows()
        .iter()
        .map(|r| {
            r.values
                .iter()
                .zip(schema.attributes())
                .map(|(v, attr)| match v {
                    GenValue::Exact(v) => v.clone(),
                    GenValue::Interval { lo, hi } => Value::Num(0.5 * (lo + hi)),
                    GenValue::Node { label, .. } => match attr.kind {
                        AttributeKind::Categorical => Value::Cat(label.clone()),
                        AttributeKind::Numeric => Value::Num(0.0),
                    },
                })
                .collect()
        })
        .collect();
    // Row count and class labels were already validated on the source.
    let surrogate = Dataset::from_rows_any_labels(schema.clone(), rows)?;
    dataset::NormalizationStats::fit(&surrogate)
}

/// k-fold cross validation over the enabled variants: the training fold
/// is protected per variant, error rates are measured on the untouched
/// test fold, and paired significance tests compare every variant pair.
pub fn run_cv(data: &Dataset, cfg: &ExperimentConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let folds = dataset::split_folds(data, cfg.folds, derive_seed(cfg.seed, "folds", 0))?;
    let before: Vec<u64> = folds.iter().map(|(_, test)| dataset_fingerprint(test)).collect();
    let file_hierarchies = match &cfg.hierarchies {
        Some(path) => Some(Arc::new(HierarchySet::load_json(path)?)),
        None => None,
    };
    let ids = cfg.variant_ids();

    let mut cells = Vec::new();
    for (f, (train, test)) in folds.iter().enumerate() {
        for id in &ids {
            let seed = derive_seed(cfg.seed, &format!("cv-{}", id.name()), f as u64);
            let training = build_variant_training(
                id,
                train,
                seed,
                &format!("fold {f}"),
                &file_hierarchies,
                data,
            )?;
            for &k in &cfg.k_values {
                let error = fit_and_measure(&training, k, test)?;
                cells.push(ErrorCell {
                    variant: id.name(),
                    l: id.l,
                    anonymity_k: id.anonymity_k,
                    k,
                    fold: f,
                    error,
                });
            }
        }
    }
    let after: Vec<u64> = folds.iter().map(|(_, test)| dataset_fingerprint(test)).collect();
    if before != after {
        return Err(Error::Data("test folds changed during the experiment".into()));
    }

    let summaries = summarize(&cells, &ids, &cfg.k_values, cfg.folds);
    let comparisons = compare_all(&cells, &ids, &cfg.k_values)?;
    Ok(ErrorReport {
        schema_version: REPORT_SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        protocol: Protocol::Cv,
        seed: cfg.seed,
        config: cfg.clone(),
        cells,
        summaries,
        comparisons,
    })
}

/// Load data per the config, then `run_cv`.
pub fn run_cv_from_config(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    run_cv(&cfg.load_data()?, cfg)
}

fn summarize(
    cells: &[ErrorCell],
    ids: &[VariantId],
    k_values: &[usize],
    folds: usize,
) -> Vec<VariantSummary> {
    let mut out = Vec::new();
    for id in ids {
        for &k in k_values {
            let errors: Vec<f64> = cells
                .iter()
                .filter(|c| c.variant == id.name() && c.k == k)
                .map(|c| c.error)
                .collect();
            if errors.is_empty() {
                continue;
            }
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let std = if errors.len() > 1 {
                (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            out.push(VariantSummary { variant: id.name(), k, folds, mean, std });
        }
    }
    out
}

fn compare_all(
    cells: &[ErrorCell],
    ids: &[VariantId],
    k_values: &[usize],
) -> Result<Vec<Comparison>> {
    let fold_errors = |id: &VariantId, k: usize| -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = cells
            .iter()
            .filter(|c| c.variant == id.name() && c.k == k)
            .map(|c| (c.fold, c.error))
            .collect();
        v.sort_by_key(|&(f, _)| f);
        v.into_iter().map(|(_, e)| e).collect()
    };
    let mut out = Vec::new();
    for &k in k_values {
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let a = fold_errors(&ids[i], k);
                let b = fold_errors(&ids[j], k);
                if a.len() < 2 || a.len() != b.len() {
                    continue;
                }
                let mean_diff = a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
                let mut significant = BTreeMap::new();
                let mut t_stat = 0.0;
                for conf in CONFIDENCE_LEVELS {
                    let outcome = paired_t_test(&a, &b, conf)?;
                    t_stat = outcome.t;
                    significant.insert(format!("{conf:.2}"), outcome.significant);
                }
                out.push(Comparison {
                    a: ids[i].name(),
                    b: ids[j].name(),
                    k,
                    mean_diff,
                    t: t_stat,
                    significant,
                });
            }
        }
    }
    Ok(out)
}

/// Incremental convergence protocol: each partition serves once as test
/// data while the remaining partitions, seeded-shuffled, are consumed
/// as cumulative prefixes; errors are averaged per training size and a
/// convergence model is fitted per variant.
pub fn run_convergence(data: &Dataset, cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if cfg.partitions < 3 {
        return Err(Error::InvalidParameter(
            "convergence protocol needs >= 3 partitions (the curve fit needs >= 2 training sizes)"
                .into(),
        ));
    }
    let parts = dataset::split_partitions(data, cfg.partitions, derive_seed(cfg.seed, "partitions", 0))?;
    let steps = cfg.partitions - 1;
    let k = cfg.k_values[0];
    let file_hierarchies = match &cfg.hierarchies {
        Some(path) => Some(Arc::new(HierarchySet::load_json(path)?)),
        None => None,
    };
    let ids = cfg.variant_ids();

    // (variant, step) -> [(train size, error)] over partitions
    let mut accum: BTreeMap<(String, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for p in 0..parts.len() {
        let test = &parts[p];
        let rest: Vec<&Dataset> = parts.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, d)| d).collect();
        let pool = Dataset::concat(&rest)?;
        let mut order: Vec<usize> = (0..pool.n()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "prefix", p as u64));
        order.shuffle(&mut rng);
        for step in 1..=steps {
            let take = pool.n() * step / steps;
            let train = pool.subset(&order[..take]);
            for id in &ids {
                let seed = derive_seed(cfg.seed, &format!("conv-{}-p{p}", id.name()), step as u64);
                let training = build_variant_training(
                    id,
                    &train,
                    seed,
                    &format!("partition {p} step {step}"),
                    &file_hierarchies,
                    data,
                )?;
                let error = fit_and_measure(&training, k, test)?;
                accum.entry((id.name(), step)).or_default().push((train.n(), error));
            }
        }
    }

    let mut points = Vec::new();
    let mut models = BTreeMap::new();
    let mut max_residual = BTreeMap::new();
    let mut measured_non_increasing = BTreeMap::new();
    let d = data.schema().d();
    for id in &ids {
        let mut measured = Vec::with_capacity(steps);
        for step in 1..=steps {
            let samples = &accum[&(id.name(), step)];
            let n_avg = samples.iter().map(|&(n, _)| n).sum::<usize>() / samples.len();
            let err_avg = samples.iter().map(|&(_, e)| e).sum::<f64>() / samples.len() as f64;
            measured.push((n_avg, err_avg));
        }
        measured_non_increasing
            .insert(id.name(), measured.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        let model = theory::convergence_fit(&measured, d.max(1), id.effective_l())?;
        let mut worst: f64 = 0.0;
        for &(n, e) in &measured {
            let predicted = theory::convergence_predict(&model, n);
            worst = worst.max((e - predicted).abs());
            points.push(CurvePoint {
                variant: id.name(),
                series: "measured".into(),
                train_size: n,
                error: e,
            });
            points.push(CurvePoint {
                variant: id.name(),
                series: "predicted".into(),
                train_size: n,
                error: predicted,
            });
        }
        models.insert(id.name(), model);
        max_residual.insert(id.name(), worst);
    }
    Ok(ConvergenceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        d,
        points,
        models,
        max_residual,
        measured_non_increasing,
    })
}

/// Load data per the config, then `run_convergence`.
pub fn run_convergence_from_config(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_convergence(&cfg.load_data()?, cfg)
}

/// Parameters of the synthetic bounds simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSimParams {
    pub n_train: usize,
    pub n_test: usize,
    pub l_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub separation: f64,
    pub sensitive_values: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for BoundsSimParams {
    fn default() -> Self {
        Self {
            n_train: 50_000,
            n_test: 10_000,
            l_values: vec![1, 2, 3],
            k_values: vec![1, 3],
            separation: 2.0,
            sensitive_values: 10,
            seed: 42,
            tolerance: 0.01,
        }
    }
}

/// Sample a two-class unit-variance Gaussian pair at ±separation/2 on
/// one identifying axis with an independent synthetic sensitive
/// attribute, anatomize the training sample per l (l = 1 bypasses the
/// anatomizer), measure k-NN error on a held-out exact sample, and
/// check the measured errors against the analytic Bayes-error bounds.
pub fn run_bounds_sim(params: &BoundsSimParams) -> Result<BoundsReport> {
    if params.n_train < 1000 {
        return Err(Error::InvalidParameter("bounds simulation needs n_train >= 1000".into()));
    }
    if params.separation < 0.0 {
        return Err(Error::InvalidParameter("separation must be >= 0".into()));
    }
    if params.n_test == 0 {
        return Err(Error::InvalidParameter("n_test must be positive".into()));
    }
    for &k in &params.k_values {
        if k == 0 || k % 2 == 0 {
            return Err(Error::InvalidParameter(format!("k values must be odd, got {k}")));
        }
    }
    if params.l_values.contains(&0) {
        return Err(Error::InvalidParameter("l values must be >= 1".into()));
    }

    let train = synth::gaussian_dataset(
        params.n_train,
        1,
        params.separation,
        params.sensitive_values,
        derive_seed(params.seed, "bounds-train", 0),
    )?;
    let test = synth::gaussian_dataset(
        params.n_test,
        1,
        params.separation,
        params.sensitive_values,
        derive_seed(params.seed, "bounds-test", 0),
    )?;
    let r_star = normal_cdf(-params.separation / 2.0);

    let k_max = *params.k_values.iter().max().unwrap();
    let mut results = Vec::new();
    for &l in &params.l_values {
        let training = if l == 1 {
            train.clone()
        } else {
            let partition =
                anatomy::build_groups(&train, l, derive_seed(params.seed, "bounds-anatomy", l as u64))?;
            let (it, st) = anatomy::emit_tables(&train, &partition)?;
            anatomy::join_anatomized(&it, &st)?.into_dataset()
        };
        let stats = dataset::NormalizationStats::fit(&training)?;
        let model =
            KnnModel::fit(&training, k_max, DistanceSpec::identity(stats), TiePolicy::LowestRowId)?;
        let class_idx = training.schema().class_index();
        let label_one: BTreeMap<u64, bool> = training
            .rows()
            .iter()
            .map(|r| (r.id, r.values[class_idx].as_cat() == Some("1")))
            .collect();

        let test_class = test.schema().class_index();
        // One scan per test row serves every requested k.
        let error_counts: Vec<usize> = test
            .rows()
            .par_iter()
            .map(|row| {
                let neighbors = model.neighbors(test.schema(), row)?;
                let truth_one = row.values[test_class].as_cat() == Some("1");
                let mut errs = vec![0usize; params.k_values.len()];
                for (slot, &k) in params.k_values.iter().enumerate() {
                    let ones =
                        neighbors.iter().take(k).filter(|(id, _)| label_one[id]).count();
                    let predicted_one = 2 * ones > k;
                    errs[slot] = usize::from(predicted_one != truth_one);
                }
                Ok::<_, Error>(errs)
            })
            .try_reduce(
                || vec![0usize; params.k_values.len()],
                |mut acc, errs| {
                    for (a, e) in acc.iter_mut().zip(errs) {
                        *a += e;
                    }
                    Ok(acc)
                },
            )?;

        for (slot, &k) in params.k_values.iter().enumerate() {
            let error = error_counts[slot] as f64 / params.n_test as f64;
            let within = check_bounds(r_star, error, k, params.tolerance)?;
            results.push(BoundsCell { l, k, error, within_bounds: within });
        }
    }

    Ok(BoundsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        seed: params.seed,
        n_train: params.n_train,
        n_test: params.n_test,
        separation: params.separation,
        r_star,
        lower: r_star,
        upper: 2.0 * r_star,
        refined_upper: 2.0 * r_star * (1.0 - r_star),
        tolerance: params.tolerance,
        results,
    })
}

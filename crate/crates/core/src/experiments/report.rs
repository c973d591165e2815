//! Report types emitted by the experiment runners: per-fold error
//! cells, per-variant summaries, pairwise significance verdicts,
//! convergence curves, and bounds-simulation results. Files are
//! deterministic for a fixed config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::theory::ConvergenceModel;
use crate::Result;

use super::{ExperimentConfig, OutputFormat, Protocol};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One measured error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anonymity_k: Option<usize>,
    pub k: usize,
    pub fold: usize,
    pub error: f64,
}

/// Mean and sample standard deviation over folds for one variant/k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub k: usize,
    pub folds: usize,
    pub mean: f64,
    pub std: f64,
}

/// Paired t-test verdicts for a variant pair at one k, keyed by
/// confidence level ("0.80" … "0.99").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub k: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub significant: BTreeMap<String, bool>,
}

/// Full cross-validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub protocol: Protocol,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub cells: Vec<ErrorCell>,
    pub summaries: Vec<VariantSummary>,
    pub comparisons: Vec<Comparison>,
}

impl ErrorReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<ErrorReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Long-format CSV: per-fold rows (`record=fold`) followed by
    /// summary rows (`record=summary`, fold column empty, error=mean).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["record", "variant", "l", "anonymity_k", "k", "fold", "error", "std"])?;
        for c in &self.cells {
            w.write_record([
                "fold".to_string(),
                c.variant.clone(),
                c.l.map(|v| v.to_string()).unwrap_or_default(),
                c.anonymity_k.map(|v| v.to_string()).unwrap_or_default(),
                c.k.to_string(),
                c.fold.to_string(),
                c.error.to_string(),
                String::new(),
            ])?;
        }
        for s in &self.summaries {
            w.write_record([
                "summary".to_string(),
                s.variant.clone(),
                String::new(),
                String::new(),
                s.k.to_string(),
                String::new(),
                s.mean.to_string(),
                s.std.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write the report into `dir` as report.json and/or errors.csv.
    pub fn emit(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let p = dir.join("report.json");
            self.write_json(&p)?;
            written.push(p);
        }
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let p = dir.join("errors.csv");
            self.write_csv(&p)?;
            written.push(p);
        }
        Ok(written)
    }

    pub fn summary(&self, variant: &str, k: usize) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant && s.k == k)
    }

    pub fn fold_errors(&self, variant: &str, k: usize) -> Vec<f64> {
        let mut cells: Vec<&ErrorCell> =
            self.cells.iter().filter(|c| c.variant == variant && c.k == k).collect();
        cells.sort_by_key(|c| c.fold);
        cells.iter().map(|c| c.error).collect()
    }

    pub fn comparison(&self, a: &str, b: &str, k: usize) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b && c.k == k)
    }
}

/// One point of a measured or predicted convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub variant: String,
    pub series: String, // "measured" | "predicted"
    pub train_size: usize,
    pub error: f64,
}

/// Convergence-protocol report: averaged measured curves, fitted
/// models, predicted curves, and the per-variant maximum residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub d: usize,
    pub points: Vec<CurvePoint>,
    pub models: BTreeMap<String, ConvergenceModel>,
    pub max_residual: BTreeMap<String, f64>,
    /// Soft check, reported not enforced: whether the measured error
    /// rates were non-increasing in training size for each variant.
    pub measured_non_increasing: BTreeMap<String, bool>,
}

impl ConvergenceReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<ConvergenceReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Plot-ready long CSV: variant, series, train_size, error.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["variant", "series", "train_size", "error"])?;
        for p in &self.points {
            w.write_record([
                p.variant.clone(),
                p.series.clone(),
                p.train_size.to_string(),
                p.error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn emit(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let p = dir.join("convergence.json");
            self.write_json(&p)?;
            written.push(p);
        }
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let p = dir.join("curves.csv");
            self.write_csv(&p)?;
            written.push(p);
        }
        Ok(written)
    }

    pub fn measured(&self, variant: &str) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.variant == variant && p.series == "measured")
            .map(|p| (p.train_size, p.error))
            .collect()
    }

    pub fn predicted(&self, variant: &str) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.variant == variant && p.series == "predicted")
            .map(|p| (p.train_size, p.error))
            .collect()
    }
}

/// One bounds-simulation measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCell {
    pub l: usize,
    pub k: usize,
    pub error: f64,
    pub within_bounds: bool,
}

/// Bounds-simulation report: the analytic Bayes error of the sampled
/// Gaussian pair, the bound interval, and measured errors per (l, k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub separation: f64,
    pub r_star: f64,
    pub lower: f64,
    pub upper: f64,
    /// Asymptotic 1-NN refinement 2·R*·(1−R*), reported for reference.
    pub refined_upper: f64,
    pub tolerance: f64,
    pub results: Vec<BoundsCell>,
}

impl BoundsReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<BoundsReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("bounds.json");
        self.write_json(&p)?;
        Ok(vec![p])
    }

    pub fn error_of(&self, l: usize, k: usize) -> Option<f64> {
        self.results.iter().find(|c| c.l == l && c.k == k).map(|c| c.error)
    }
}

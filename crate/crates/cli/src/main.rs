//! Command-line entry point wiring datasets, anatomization,
//! generalization, classification, and the experiment protocols into
//! reproducible runs. Every run echoes its resolved configuration and
//! seed; outputs land only in the requested directory.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use anatomy_core::anatomy::{
    build_groups, emit_tables, join_anatomized, verify_st_l_diversity, SensitiveTable,
};
use anatomy_core::dataset::{Dataset, MissingPolicy, NormalizationStats, Schema};
use anatomy_core::experiments::{
    run_bounds_sim, run_convergence_from_config, run_cv_from_config, BoundsSimParams,
    ExperimentConfig, OutputFormat, Protocol, VariantKind,
};
use anatomy_core::generalize::{generalize, verify_k_anonymity, HierarchySet};
use anatomy_core::knn::{DistanceSpec, KnnModel, TiePolicy};
use anatomy_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "anatomy",
    version,
    about = "l-diverse anatomization, k-anonymity baseline, and k-NN error-rate experiments on tabular data"
)]
struct Cli {
    /// Master random seed; recorded in every output.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON experiment config; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format for experiment commands.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a dataset into an l-diverse identifier/sensitive table pair
    /// and materialize the joined anatomized training data.
    Anatomize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        l: usize,
    },
    /// Generalize a dataset to k-anonymity (comparison baseline).
    Generalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        k: usize,
        /// Hierarchy JSON; omitted: a default set is derived from the data.
        #[arg(long)]
        hierarchies: Option<PathBuf>,
    },
    /// Train a k-NN model and classify a test file.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Anatomize the training data at this l first.
        #[arg(long)]
        l: Option<usize>,
    },
    /// k-fold cross-validation comparison of the enabled variants.
    Cv {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        hierarchies: Option<PathBuf>,
        /// Comma-separated: original,anatomized,anonymized
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        l: Vec<usize>,
        #[arg(long = "anonymity-k", value_delimiter = ',')]
        anonymity_k: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Incremental-convergence protocol with fitted theoretical curves.
    Convergence {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        l: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        parts: Option<usize>,
    },
    /// Synthetic Gaussian-pair simulation checking the error bounds.
    BoundsSim {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "test-n")]
        test_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        l: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Check l-diversity of a serialized identifier/sensitive table pair.
    Verify {
        #[arg(long)]
        it: Option<PathBuf>,
        #[arg(long)]
        st: PathBuf,
        #[arg(long)]
        l: usize,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn load_dataset(input: &Path, schema: &Path) -> Result<Dataset> {
    let schema = Schema::load_json(schema)?;
    let outcome = Dataset::load_csv(input, &schema, MissingPolicy::DropRow)?;
    if outcome.dropped_rows > 0 {
        println!("dropped {} rows with missing values", outcome.dropped_rows);
    }
    Ok(outcome.dataset)
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn parse_variants(names: &[String]) -> Result<Vec<VariantKind>> {
    names
        .iter()
        .map(|s| match s.as_str() {
            "original" => Ok(VariantKind::Original),
            "anatomized" => Ok(VariantKind::Anatomized),
            "anonymized" => Ok(VariantKind::Anonymized),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant '{other}' (expected original, anatomized, anonymized)"
            ))),
        })
        .collect()
}

/// Resolve an experiment config: file values first, flags override.
#[allow(clippy::too_many_arguments)]
fn resolve_config(
    cli: &Cli,
    protocol: Protocol,
    input: &Option<PathBuf>,
    schema: &Option<PathBuf>,
    hierarchies: &Option<PathBuf>,
    variants: &[String],
    l: &[usize],
    anonymity_k: &[usize],
    k: &[usize],
    folds: Option<usize>,
    parts: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load_json(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.protocol = protocol;
    if input.is_some() {
        cfg.data = input.clone();
    }
    if schema.is_some() {
        cfg.schema = schema.clone();
    }
    if hierarchies.is_some() {
        cfg.hierarchies = hierarchies.clone();
    }
    if !variants.is_empty() {
        cfg.variants = parse_variants(variants)?;
    }
    if !l.is_empty() {
        cfg.l_values = l.to_vec();
    }
    if !anonymity_k.is_empty() {
        cfg.anonymity_k_values = anonymity_k.to_vec();
    }
    if !k.is_empty() {
        cfg.k_values = k.to_vec();
    }
    if let Some(folds) = folds {
        cfg.folds = folds;
    }
    if let Some(parts) = parts {
        cfg.partitions = parts;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(format) = cli.format {
        cfg.format = format.into();
    }
    Ok(cfg)
}

fn echo_config<T: serde::Serialize>(label: &str, config: &T, seed: u64) -> Result<()> {
    println!("{label} config: {}", serde_json::to_string(config)?);
    println!("seed: {seed}");
    Ok(())
}

/// Per-gid row counts of an identifier table CSV (gid is its last column).
fn gid_counts_last_column(path: &Path) -> Result<std::collections::BTreeMap<u32, usize>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut counts = std::collections::BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(record.len() - 1).unwrap_or("");
        let gid: u32 = field
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("row {i}: bad gid '{field}'")))?;
        *counts.entry(gid).or_insert(0usize) += 1;
    }
    Ok(counts)
}

fn run(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Anatomize { input, schema, l } => {
            let seed = cli.seed.unwrap_or(42);
            echo_config(
                "anatomize",
                &serde_json::json!({
                    "in": input, "schema": schema, "l": l, "out": out_dir(&cli.out),
                }),
                seed,
            )?;
            let data = load_dataset(input, schema)?;
            let partition = build_groups(&data, *l, seed)?;
            let (it, st) = emit_tables(&data, &partition)?;
            let joined = join_anatomized(&it, &st)?;
            let dir = out_dir(&cli.out);
            std::fs::create_dir_all(&dir)?;
            it.write_csv(&dir.join("it.csv"))?;
            st.write_csv(&dir.join("st.csv"))?;
            joined.write_csv(&dir.join("anatomized.csv"))?;
            partition.write_json(&dir.join("partition.json"))?;
            println!(
                "anatomized {} rows into {} groups of {l}; suppressed {}; joined rows {}",
                data.n(),
                partition.groups.len(),
                partition.suppressed_row_ids.len(),
                joined.n()
            );
            Ok(0)
        }
        Command::Generalize { input, schema, k, hierarchies } => {
            let seed = cli.seed.unwrap_or(42);
            echo_config(
                "generalize",
                &serde_json::json!({
                    "in": input, "schema": schema, "k": k,
                    "hierarchies": hierarchies, "out": out_dir(&cli.out),
                }),
                seed,
            )?;
            let data = load_dataset(input, schema)?;
            let h = match hierarchies {
                Some(path) => HierarchySet::load_json(path)?,
                None => HierarchySet::default_for(&data)?,
            };
            let anon = generalize(&data, *k, &h)?;
            let audit = verify_k_anonymity(&anon);
            let dir = out_dir(&cli.out);
            std::fs::create_dir_all(&dir)?;
            anon.write_csv(&dir.join("anonymized.csv"))?;
            let summary = serde_json::json!({
                "k": k,
                "rows": anon.n(),
                "suppressed": anon.suppressed(),
                "levels": anon.schema().attributes().iter().map(|a| a.name.clone())
                    .zip(anon.levels().iter().copied()).collect::<Vec<_>>(),
                "k_anonymous": audit.ok,
                "equivalence_classes": audit.classes,
            });
            std::fs::write(dir.join("generalization.json"), serde_json::to_string_pretty(&summary)?)?;
            println!(
                "generalized {} rows (suppressed {}), k-anonymity verified: {}",
                anon.n(),
                anon.suppressed(),
                audit.ok
            );
            Ok(0)
        }
        Command::Classify { train, test, schema, k, l } => {
            let seed = cli.seed.unwrap_or(42);
            echo_config(
                "classify",
                &serde_json::json!({
                    "train": train, "test": test, "schema": schema, "k": k, "l": l,
                }),
                seed,
            )?;
            let train_data = load_dataset(train, schema)?;
            let test_data = load_dataset(test, schema)?;
            let training = match l {
                None => train_data,
                Some(l) => {
                    let partition = build_groups(&train_data, *l, seed)?;
                    let (it, st) = emit_tables(&train_data, &partition)?;
                    join_anatomized(&it, &st)?.into_dataset()
                }
            };
            let stats = NormalizationStats::fit(&training)?;
            let model =
                KnnModel::fit(&training, *k, DistanceSpec::identity(stats), TiePolicy::LowestRowId)?;
            let dir = out_dir(&cli.out);
            std::fs::create_dir_all(&dir)?;
            let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
            w.write_record(["row_id", "predicted"])?;
            let class_idx = test_data.schema().class_index();
            let mut errors = 0usize;
            for row in test_data.rows() {
                let predicted = model.classify(test_data.schema(), row)?;
                if row.values[class_idx].as_cat() != Some(predicted.as_str()) {
                    errors += 1;
                }
                w.write_record([row.id.to_string(), predicted])?;
            }
            w.flush()?;
            let error_rate = errors as f64 / test_data.n() as f64;
            println!("error rate: {error_rate}");
            Ok(0)
        }
        Command::Cv { input, schema, hierarchies, variants, l, anonymity_k, k, folds } => {
            let cfg = resolve_config(
                &cli,
                Protocol::Cv,
                input,
                schema,
                hierarchies,
                variants,
                l,
                anonymity_k,
                k,
                *folds,
                None,
            )?;
            echo_config("cv", &cfg, cfg.seed)?;
            let report = run_cv_from_config(&cfg)?;
            let dir = cfg.out_dir.clone().unwrap_or_else(|| out_dir(&cli.out));
            let written = report.emit(&dir, cfg.format)?;
            for s in &report.summaries {
                println!("{} k={}: mean {:.4} (std {:.4})", s.variant, s.k, s.mean, s.std);
            }
            for c in &report.comparisons {
                let levels: Vec<&str> = c
                    .significant
                    .iter()
                    .filter(|(_, &sig)| sig)
                    .map(|(lvl, _)| lvl.as_str())
                    .collect();
                println!(
                    "{} vs {} (k={}): t = {:.3}, significant at {{{}}}",
                    c.a,
                    c.b,
                    c.k,
                    c.t,
                    levels.join(", ")
                );
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Convergence { input, schema, variants, l, k, parts } => {
            let cfg = resolve_config(
                &cli,
                Protocol::Convergence,
                input,
                schema,
                &None,
                variants,
                l,
                &[],
                k,
                None,
                *parts,
            )?;
            echo_config("convergence", &cfg, cfg.seed)?;
            let report = run_convergence_from_config(&cfg)?;
            let dir = cfg.out_dir.clone().unwrap_or_else(|| out_dir(&cli.out));
            let written = report.emit(&dir, cfg.format)?;
            for (variant, model) in &report.models {
                println!(
                    "{variant}: asymptote {:.4}, constant {:.4}, max residual {:.4}, measured non-increasing: {}",
                    model.asymptote,
                    model.constant,
                    report.max_residual[variant],
                    report.measured_non_increasing[variant]
                );
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::BoundsSim { n, test_n, l, k, separation, tolerance } => {
            let mut params = match &cli.config {
                Some(path) => {
                    serde_json::from_str(&std::fs::read_to_string(path)?)
                        .map_err(Error::from)?
                }
                None => BoundsSimParams::default(),
            };
            if let Some(n) = n {
                params.n_train = *n;
            }
            if let Some(test_n) = test_n {
                params.n_test = *test_n;
            }
            if !l.is_empty() {
                params.l_values = l.clone();
            }
            if !k.is_empty() {
                params.k_values = k.clone();
            }
            if let Some(sep) = separation {
                params.separation = *sep;
            }
            if let Some(tol) = tolerance {
                params.tolerance = *tol;
            }
            if let Some(seed) = cli.seed {
                params.seed = seed;
            }
            echo_config("bounds-sim", &params, params.seed)?;
            let report = run_bounds_sim(&params)?;
            let dir = out_dir(&cli.out);
            report.emit(&dir)?;
            println!(
                "R* = {:.4}, bounds [{:.4}, {:.4}] (refined upper {:.4})",
                report.r_star, report.lower, report.upper, report.refined_upper
            );
            let mut all_within = true;
            for cell in &report.results {
                all_within &= cell.within_bounds;
                println!(
                    "l={} k={}: error {:.4} within bounds: {}",
                    cell.l, cell.k, cell.error, cell.within_bounds
                );
            }
            println!("wrote {}", dir.join("bounds.json").display());
            Ok(if all_within { 0 } else { 2 })
        }
        Command::Verify { it, st, l } => {
            let seed = cli.seed.unwrap_or(42);
            echo_config("verify", &serde_json::json!({ "it": it, "st": st, "l": l }), seed)?;
            let st_table = SensitiveTable::read_csv_untyped(st)?;
            let report = verify_st_l_diversity(&st_table, *l);
            for group in report.groups.iter().filter(|g| !g.ok) {
                println!(
                    "gid {}: size {}, most frequent sensitive value occurs {} times (> size/l)",
                    group.gid, group.size, group.max_value_count
                );
            }
            // With the identifier table present, the per-gid cardinalities
            // of the two tables must agree.
            let mut tables_match = true;
            if let Some(it_path) = it {
                let it_counts = gid_counts_last_column(it_path)?;
                let mut st_counts = std::collections::BTreeMap::new();
                for row in &st_table.rows {
                    *st_counts.entry(row.gid).or_insert(0usize) += 1;
                }
                if it_counts != st_counts {
                    tables_match = false;
                    println!("identifier/sensitive tables disagree on per-gid row counts");
                }
            }
            println!(
                "{} groups checked, l = {l}, l-diverse: {}",
                report.groups.len(),
                report.ok
            );
            Ok(if report.ok && tables_match { 0 } else { 2 })
        }
    }
}

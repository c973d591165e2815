//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! (or SKIP) line. Run with `--nocapture` to see every line:
//!
//!   cargo test -p anatomy-core --test acceptance -- --nocapture
//!
//! Criteria 5 and 6 need the Adult CSV (fetched manually, see the
//! README); they print SKIP when the file is absent.

mod common;

use std::path::{Path, PathBuf};

use anatomy_core::anatomy::{build_groups_opt, emit_tables, join_anatomized, verify_l_diversity};
use anatomy_core::dataset::{Dataset, MissingPolicy, NormalizationStats, Schema};
use anatomy_core::experiments::{
    run_bounds_sim, run_convergence, run_cv, run_cv_from_config, synth, BoundsSimParams,
    ExperimentConfig, OutputFormat, VariantKind,
};
use anatomy_core::knn::{DistanceSpec, KnnModel, TiePolicy};
use anatomy_core::theory::{
    beta_constant, knn_asymptotic_error, parzen_bayes_error, ParzenKernel, PosteriorPoint,
};
use common::{naive_neighbors, random_dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(name: &str, pass: bool, details: &str) {
    println!("ACCEPTANCE {name}: {} — {details}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "ACCEPTANCE {name} FAILED — {details}");
}

fn skip(name: &str, details: &str) {
    println!("ACCEPTANCE {name}: SKIP — {details}");
}

/// Criterion 1: the closed-form k-NN voting error against a 10^6-draw
/// Monte-Carlo majority-vote oracle, the k=1 identity, the bound
/// ordering over k, and the Bayes-error envelope.
#[test]
fn acceptance_1_formula_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0acce551);
    let qs: Vec<f64> = (1..=10).map(|i| i as f64 * 0.05).collect();
    let ks = [1usize, 3, 5, 7];
    let draws = 1_000_000;
    let mut worst = 0.0f64;
    for &q1 in &qs {
        let q = PosteriorPoint::from_q1(q1).unwrap();
        let r_star = q1.min(1.0 - q1);

        // k = 1 identity, exact.
        let r1 = knn_asymptotic_error(&q, 1).unwrap();
        assert_eq!(r1, 2.0 * (q.q1() * q.q2()), "k=1 must equal 2·q1·q2 exactly");

        // Eq-ordering R^7 ≤ R^5 ≤ R^3 ≤ R^1 and the Bayes envelope.
        let errs: Vec<f64> = ks.iter().map(|&k| knn_asymptotic_error(&q, k).unwrap()).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "ordering violated at q1={q1}");
        }
        for &e in &errs {
            assert!(e >= r_star - 1e-12 && e <= 2.0 * r_star + 1e-12);
        }

        // Monte-Carlo majority-vote oracle.
        for (&k, &formula) in ks.iter().zip(&errs) {
            let mut errors = 0u32;
            for _ in 0..draws {
                let truth_one = rng.gen::<f64>() < q1;
                let mut ones = 0usize;
                for _ in 0..k {
                    ones += usize::from(rng.gen::<f64>() < q1);
                }
                let majority_one = 2 * ones > k;
                errors += u32::from(majority_one != truth_one);
            }
            let mc = f64::from(errors) / draws as f64;
            worst = worst.max((mc - formula).abs());
            assert!(
                (mc - formula).abs() <= 2e-3,
                "q1={q1} k={k}: monte-carlo {mc} vs formula {formula}"
            );
        }
    }
    verdict("1 (formula suite)", true, &format!("max |MC − formula| = {worst:.2e} ≤ 2e-3"));
}

/// Independent log-gamma oracle: Stirling series with argument shift,
/// deliberately a different algorithm from the library's Lanczos form.
fn stirling_ln_gamma(x: f64) -> f64 {
    if x < 10.0 {
        return stirling_ln_gamma(x + 1.0) - x.ln();
    }
    const COEFFS: [f64; 5] =
        [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0];
    let mut acc = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut power = x;
    for c in COEFFS {
        acc += c / power;
        power *= x * x;
    }
    acc
}

/// Criterion 2: β constant against 1/(2π) at d = 1 and the independent
/// log-gamma oracle over d ∈ [1, 64].
#[test]
fn acceptance_2_beta_constant() {
    let at_one = beta_constant(1);
    assert!(
        (at_one - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-9,
        "beta(1) = {at_one}"
    );
    let mut worst = 0.0f64;
    for d in 1..=64usize {
        let e = 2.0 / (d as f64 + 1.0);
        let oracle = (e * stirling_ln_gamma((d as f64 + 3.0) / 2.0) + stirling_ln_gamma(e + 1.0))
            .exp()
            / (std::f64::consts::PI * (d as f64 + 1.0));
        let got = beta_constant(d);
        worst = worst.max((got - oracle).abs());
        assert!((got - oracle).abs() < 1e-9, "d={d}: {got} vs oracle {oracle}");
    }
    verdict("2 (beta constant)", true, &format!("max |β − oracle| = {worst:.2e} ≤ 1e-9"));
}

/// Criterion 3: anatomizer properties over 200 random datasets.
#[test]
fn acceptance_3_anatomizer_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0acce553);
    let mut joins = 0usize;
    for trial in 0..200 {
        let n = rng.gen_range(10..=500);
        let n_sens = rng.gen_range(2..=10);
        let l = [2usize, 3, 4][rng.gen_range(0..3)];
        let data = random_dataset(n, n_sens, 0x9000 + trial);
        let part = build_groups_opt(&data, l, rng.gen(), true).unwrap();

        let report = verify_l_diversity(&part, &data).unwrap();
        assert!(report.ok, "trial {trial}: diversity violated");

        if part.groups.is_empty() {
            continue;
        }
        joins += 1;
        let (it, st) = emit_tables(&data, &part).unwrap();
        let joined = join_anatomized(&it, &st).unwrap();
        let kept = n - part.suppressed_row_ids.len();
        assert_eq!(joined.n(), l * kept, "trial {trial}: |D_A| ≠ l·(N − suppressed)");

        let mut per_gid = std::collections::BTreeMap::new();
        for &gid in joined.origin_gids() {
            *per_gid.entry(gid).or_insert(0usize) += 1;
        }
        for g in &part.groups {
            assert_eq!(per_gid[&g.gid], l * l, "trial {trial}: per-group join ≠ |G_j|²");
        }

        // Column-value multisets are preserved (l copies each).
        let suppressed: std::collections::BTreeSet<u64> =
            part.suppressed_row_ids.iter().copied().collect();
        for name in ["age", "city", "job", "label"] {
            let src = data.schema().index_of(name).unwrap();
            let dst = joined.dataset().schema().index_of(name).unwrap();
            let mut expected: Vec<String> = data
                .rows()
                .iter()
                .filter(|r| !suppressed.contains(&r.id))
                .flat_map(|r| std::iter::repeat_n(r.values[src].to_string(), l))
                .collect();
            let mut got: Vec<String> =
                joined.dataset().rows().iter().map(|r| r.values[dst].to_string()).collect();
            expected.sort();
            got.sort();
            assert_eq!(expected, got, "trial {trial}: column {name} multiset changed");
        }
    }
    verdict(
        "3 (anatomizer properties)",
        true,
        &format!("200 random datasets, {joins} non-empty joins, all invariants held"),
    );
}

/// Criterion 4: Gaussian-pair bounds simulation at full scale.
#[test]
fn acceptance_4_bounds_simulation() {
    let params = BoundsSimParams {
        n_train: 50_000,
        n_test: 10_000,
        l_values: vec![1, 2, 3],
        k_values: vec![1, 3],
        separation: 2.0,
        tolerance: 0.01,
        seed: 4242,
        ..BoundsSimParams::default()
    };
    let report = run_bounds_sim(&params).unwrap();
    assert!(
        (report.r_star - 0.15865525393145707).abs() < 1e-9,
        "analytic R* = {}",
        report.r_star
    );
    let mut lines = Vec::new();
    for &l in &params.l_values {
        let e1 = report.error_of(l, 1).unwrap();
        let e3 = report.error_of(l, 3).unwrap();
        let cell = report.results.iter().find(|c| c.l == l && c.k == 1).unwrap();
        assert!(
            cell.within_bounds,
            "l={l}: 1-NN error {e1} outside [R*−0.01, 2R*+0.01] = [{:.4}, {:.4}]",
            report.lower - 0.01,
            report.upper + 0.01
        );
        assert!(e3 <= e1 + 0.005, "l={l}: 3-NN {e3} > 1-NN {e1} + 0.005");
        lines.push(format!("l={l}: 1NN {e1:.4}, 3NN {e3:.4}"));
    }
    verdict(
        "4 (bounds simulation)",
        true,
        &format!("R* = {:.4}, bounds [{:.4}, {:.4}]; {}", report.r_star, report.lower, report.upper, lines.join("; ")),
    );
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn adult_paths() -> Option<(PathBuf, PathBuf)> {
    let data = std::env::var_os("ANATOMY_ADULT_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/adult.csv"));
    let schema = workspace_root().join("schemas/adult.json");
    if data.exists() && schema.exists() {
        Some((data, schema))
    } else {
        None
    }
}

/// Criterion 5: Adult 10-fold reproduction (original vs anatomized vs
/// anonymized 1-NN) against the reported means, with the ordinal
/// fallback for dataset revisions.
#[test]
fn acceptance_5_adult_reproduction() {
    let Some((data_path, schema_path)) = adult_paths() else {
        skip("5 (adult reproduction)", "data/adult.csv not present; see README for the fetch recipe");
        return;
    };
    let schema = Schema::load_json(&schema_path).unwrap();
    let loaded = Dataset::load_csv(&data_path, &schema, MissingPolicy::DropRow).unwrap();
    println!(
        "adult: {} rows after dropping {} with missing values (standard preprocessing yields 45222)",
        loaded.dataset.n(),
        loaded.dropped_rows
    );
    let data = loaded.dataset;

    let cfg = ExperimentConfig {
        folds: 10,
        k_values: vec![1],
        l_values: vec![2, 3],
        anonymity_k_values: vec![2],
        variants: vec![VariantKind::Original, VariantKind::Anatomized, VariantKind::Anonymized],
        seed: 42,
        ..ExperimentConfig::default()
    };
    let report = run_cv(&data, &cfg).unwrap();
    let mean = |v: &str| report.summary(v, 1).map(|s| s.mean).unwrap();
    let original = mean("original");
    let anat2 = mean("anatomized_l2");
    let anat3 = mean("anatomized_l3");
    let anon2 = mean("anonymized_k2");

    let comparison = report.comparison("original", "anatomized_l2", 1).unwrap();
    let anat2_better_significant = comparison.mean_diff > 0.0 && comparison.significant["0.95"];

    let primary = (original - 0.2456).abs() <= 0.03
        && (anat2 - 0.204).abs() <= 0.03
        && (anat3 - 0.2324).abs() <= 0.03
        && anat2_better_significant;
    let fallback = anat2 < original && original < anon2;
    let details = format!(
        "original {original:.4} (reference 0.2456), anatomized l=2 {anat2:.4} (0.204), l=3 {anat3:.4} (0.2324), anonymized {anon2:.4}; l=2 < original significant at 0.95: {anat2_better_significant}; primary={primary} fallback={fallback}"
    );
    verdict("5 (adult reproduction)", primary || fallback, &details);
}

/// Criterion 6: Adult 5-partition convergence protocol; fitted-curve
/// residuals within 0.02 and strictly decreasing predictions.
#[test]
fn acceptance_6_adult_convergence() {
    let Some((data_path, schema_path)) = adult_paths() else {
        skip("6 (adult convergence)", "data/adult.csv not present; see README for the fetch recipe");
        return;
    };
    let schema = Schema::load_json(&schema_path).unwrap();
    let data = Dataset::load_csv(&data_path, &schema, MissingPolicy::DropRow).unwrap().dataset;
    let cfg = ExperimentConfig {
        partitions: 5,
        k_values: vec![1],
        l_values: vec![2, 3],
        variants: vec![VariantKind::Original, VariantKind::Anatomized],
        seed: 42,
        ..ExperimentConfig::default()
    };
    let report = run_convergence(&data, &cfg).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (variant, residual) in &report.max_residual {
        details.push(format!("{variant}: max residual {residual:.4}"));
        ok &= *residual <= 0.02;
        let mut predicted = report.predicted(variant);
        predicted.sort_by_key(|&(n, _)| n);
        for w in predicted.windows(2) {
            ok &= w[1].1 < w[0].1;
        }
    }
    verdict("6 (adult convergence)", ok, &details.join("; "));
}

/// Criterion 7: variance-reduction check — bootstrap variance of the
/// Parzen Bayes-error estimate on anatomized resamples vs original
/// resamples, 30 bootstraps × 20 trials, pass at ≥ 60% of trials.
/// Both variances are reported regardless of the outcome.
#[test]
fn acceptance_7_parzen_variance() {
    let trials: u64 = 20;
    let bootstraps: u64 = 30;
    let mut wins = 0usize;
    let mut var_orig_sum = 0.0;
    let mut var_anat_sum = 0.0;
    for trial in 0..trials {
        let base = synth::gaussian_dataset(2000, 2, 2.0, 8, 60_000 + trial).unwrap();
        let eval = synth::gaussian_dataset(1000, 2, 2.0, 8, 61_000 + trial).unwrap();
        let mut orig = Vec::with_capacity(bootstraps as usize);
        let mut anat = Vec::with_capacity(bootstraps as usize);
        for b in 0..bootstraps {
            let seed = 62_000 + trial * 1000 + b;
            let resample = synth::bootstrap_resample(&base, seed).unwrap();
            orig.push(
                parzen_bayes_error(&resample, &eval, ParzenKernel::GaussianProduct, None).unwrap(),
            );
            let part = anatomy_core::anatomy::build_groups(&resample, 2, seed ^ 0x5a5a).unwrap();
            let (it, st) = emit_tables(&resample, &part).unwrap();
            let joined = join_anatomized(&it, &st).unwrap();
            anat.push(
                parzen_bayes_error(
                    joined.dataset(),
                    &eval,
                    ParzenKernel::GaussianProduct,
                    None,
                )
                .unwrap(),
            );
        }
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
        };
        let vo = var(&orig);
        let va = var(&anat);
        var_orig_sum += vo;
        var_anat_sum += va;
        if va <= vo {
            wins += 1;
        }
    }
    let details = format!(
        "anatomized variance ≤ original in {wins}/{trials} trials (need ≥ {}); mean var original {:.3e}, anatomized {:.3e}",
        (trials as f64 * 0.6).ceil() as usize,
        var_orig_sum / trials as f64,
        var_anat_sum / trials as f64,
    );
    // Report both variances regardless of pass/fail (printed above).
    println!("ACCEPTANCE 7 (parzen variance) measurements: {details}");
    verdict("7 (parzen variance)", wins * 10 >= trials as usize * 6, &details);
}

/// Criterion 8: accelerated neighbor scan equals the exhaustive oracle
/// on 100 random datasets (ids and distances, lowest-row-id policy).
#[test]
fn acceptance_8_knn_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0acce558);
    for trial in 0..100u64 {
        let n = rng.gen_range(4..=200);
        let data = random_dataset(n, rng.gen_range(2..=6), 0xa000 + trial);
        let stats = NormalizationStats::fit(&data).unwrap();
        let queries = random_dataset(5, 4, 0xb000 + trial);
        for &k in &[1usize, 3, 7, n] {
            if k > n {
                continue;
            }
            let model = KnnModel::fit(
                &data,
                k,
                DistanceSpec::identity(stats.clone()),
                TiePolicy::LowestRowId,
            )
            .unwrap();
            for q in queries.rows() {
                let got = model.neighbors(queries.schema(), q).unwrap();
                let want = naive_neighbors(&data, &stats, q, queries.schema(), k);
                assert_eq!(got, want, "trial {trial}, n={n}, k={k}");
            }
        }
    }
    verdict("8 (knn oracle equivalence)", true, "100 random datasets, exact id and distance agreement");
}

/// Criterion 9: the generic ingestion path runs the full comparison
/// pipeline end-to-end on an arbitrary compatible CSV (no reference
/// numbers asserted).
#[test]
fn acceptance_9_generic_pipeline() {
    use anatomy_core::dataset::{AttributeKind, AttributeRole, AttributeSchema, Value};
    let dir = tempfile::tempdir().unwrap();

    // A wider mixed-type dataset standing in for IPUMS/Fatality/Bank.
    let schema = Schema::new(vec![
        AttributeSchema::new("a_num1", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("a_num2", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("a_cat1", AttributeKind::Categorical, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("a_cat2", AttributeKind::Categorical, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("note", AttributeKind::Categorical, AttributeRole::Excluded),
        AttributeSchema::new("kind", AttributeKind::Categorical, AttributeRole::Sensitive),
        AttributeSchema::new("outcome", AttributeKind::Categorical, AttributeRole::Class),
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0acce559);
    let mut rows = Vec::new();
    for i in 0..400 {
        let y = i % 2 == 0;
        rows.push(vec![
            Value::Num(rng.gen_range(0.0..100.0) + if y { 0.0 } else { 20.0 }),
            Value::Num(rng.gen_range(-5.0..5.0)),
            Value::Cat(format!("g{}", rng.gen_range(0..5))),
            Value::Cat(format!("h{}", rng.gen_range(0..3))),
            Value::Cat("freetext".into()),
            Value::Cat(format!("s{}", rng.gen_range(0..6))),
            Value::Cat(if y { "yes".into() } else { "no".to_string() }),
        ]);
    }
    // Write through a reduced-schema dataset, then re-add the excluded
    // column by hand to exercise the raw ingestion path.
    let full_csv = dir.path().join("generic.csv");
    {
        let mut w = csv::Writer::from_path(&full_csv).unwrap();
        w.write_record(schema.attributes().iter().map(|a| a.name.as_str())).unwrap();
        for r in &rows {
            w.write_record(r.iter().map(|v| v.to_string())).unwrap();
        }
        w.flush().unwrap();
    }
    let schema_path = dir.path().join("schema.json");
    std::fs::write(&schema_path, serde_json::to_string_pretty(&schema).unwrap()).unwrap();

    let cfg = ExperimentConfig {
        data: Some(full_csv),
        schema: Some(schema_path),
        folds: 5,
        k_values: vec![1, 3],
        l_values: vec![2],
        anonymity_k_values: vec![2],
        variants: vec![VariantKind::Original, VariantKind::Anatomized, VariantKind::Anonymized],
        seed: 99,
        out_dir: Some(dir.path().join("out")),
        ..ExperimentConfig::default()
    };
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let loaded_cfg = ExperimentConfig::load_json(&cfg_path).unwrap();
    let report = run_cv_from_config(&loaded_cfg).unwrap();
    let written = report.emit(&dir.path().join("out"), OutputFormat::Both).unwrap();
    assert_eq!(written.len(), 2);
    assert!(written.iter().all(|p| p.exists()));
    assert_eq!(report.cells.len(), 3 * 2 * 5);
    verdict(
        "9 (generic pipeline)",
        true,
        "end-to-end CV over original/anatomized/anonymized on a generic CSV",
    );
}

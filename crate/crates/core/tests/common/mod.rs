//! Shared helpers for integration tests: seeded random datasets and an
//! independent exhaustive-scan neighbor oracle kept deliberately
//! separate from the library's packed scan.
#![allow(dead_code)] // each test target compiles its own copy

use anatomy_core::dataset::{
    AttributeKind, AttributeRole, AttributeSchema, Dataset, Instance, NormalizationStats, Schema,
    Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Schema with one numeric and one categorical quasi-identifier, a
/// categorical sensitive attribute, and a binary class.
pub fn mixed_schema() -> Schema {
    Schema::new(vec![
        AttributeSchema::new("age", AttributeKind::Numeric, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("city", AttributeKind::Categorical, AttributeRole::QuasiIdentifying),
        AttributeSchema::new("job", AttributeKind::Categorical, AttributeRole::Sensitive),
        AttributeSchema::new("label", AttributeKind::Categorical, AttributeRole::Class),
    ])
    .unwrap()
}

/// Random dataset over `mixed_schema` with `n_sens` distinct sensitive
/// values; both class labels always present.
pub fn random_dataset(n: usize, n_sens: usize, seed: u64) -> Dataset {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            // Force both class labels into the first two rows.
            let label = if i == 0 {
                "+"
            } else if i == 1 {
                "-"
            } else if rng.gen_bool(0.5) {
                "+"
            } else {
                "-"
            };
            vec![
                Value::Num((rng.gen_range(0..500) as f64) / 10.0),
                Value::Cat(format!("c{}", rng.gen_range(0..4))),
                Value::Cat(format!("s{}", rng.gen_range(0..n_sens))),
                Value::Cat(label.to_string()),
            ]
        })
        .collect();
    Dataset::from_rows(mixed_schema(), rows).unwrap()
}

/// Exhaustive neighbor scan, written against the schema directly: for
/// every training row, sum per-axis terms in schema order (normalized
/// numeric difference squared, 0/1 categorical mismatch), then sort by
/// (distance, row id) and take k. Lowest-row-id tie policy.
pub fn naive_neighbors(
    train: &Dataset,
    stats: &NormalizationStats,
    query: &Instance,
    query_schema: &Schema,
    k: usize,
) -> Vec<(u64, f64)> {
    let schema = train.schema();
    let mut scored: Vec<(u64, f64)> = train
        .rows()
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            for &idx in &schema.distance_indices() {
                let attr = schema.attribute(idx);
                let q_idx = query_schema.index_of(&attr.name).expect("query has attribute");
                let term = match attr.kind {
                    AttributeKind::Numeric => {
                        let a = stats.normalize(idx, query.values[q_idx].as_num().unwrap());
                        let b = stats.normalize(idx, row.values[idx].as_num().unwrap());
                        let d = a - b;
                        d * d
                    }
                    AttributeKind::Categorical => f64::from(
                        query.values[q_idx].as_cat().unwrap() != row.values[idx].as_cat().unwrap(),
                    ),
                };
                acc += 1.0 * term;
            }
            (row.id, acc)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

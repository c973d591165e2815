//! Synthetic data generators and resampling helpers shared by the
//! bounds simulation and the variance experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AttributeKind, AttributeRole, AttributeSchema, Dataset, Schema, Value};
use crate::Result;

/// Standard normal sample via the Box-Muller transform.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two-class equal-prior Gaussian data: class means sit at
/// ±separation/2 on the first of `d` numeric quasi-identifying axes
/// (the remaining axes are uninformative unit-variance noise), plus an
/// independent uniform categorical sensitive attribute with
/// `sensitive_values` distinct values. Class labels are "1" and "2";
/// the analytic Bayes error is Φ(−separation/2).
pub fn gaussian_dataset(
    n: usize,
    d: usize,
    separation: f64,
    sensitive_values: usize,
    seed: u64,
) -> Result<Dataset> {
    assert!(d >= 1 && sensitive_values >= 1);
    let mut attrs = Vec::with_capacity(d + 2);
    for i in 0..d {
        attrs.push(AttributeSchema::new(
            &format!("x{i}"),
            AttributeKind::Numeric,
            AttributeRole::QuasiIdentifying,
        ));
    }
    attrs.push(AttributeSchema::new("s", AttributeKind::Categorical, AttributeRole::Sensitive));
    attrs.push(AttributeSchema::new("c", AttributeKind::Categorical, AttributeRole::Class));
    let schema = Schema::new(attrs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let class_one = rng.gen_bool(0.5);
            let mut values = Vec::with_capacity(d + 2);
            let shift = if class_one { -separation / 2.0 } else { separation / 2.0 };
            values.push(Value::Num(shift + standard_normal(&mut rng)));
            for _ in 1..d {
                values.push(Value::Num(standard_normal(&mut rng)));
            }
            values.push(Value::Cat(format!("s{}", rng.gen_range(0..sensitive_values))));
            values.push(Value::Cat(if class_one { "1".into() } else { "2".to_string() }));
            values
        })
        .collect();
    Dataset::from_rows(schema, rows)
}

/// Bootstrap resample with replacement; row ids are reassigned.
pub fn bootstrap_resample(data: &Dataset, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..data.n())
        .map(|_| data.rows()[rng.gen_range(0..data.n())].values.clone())
        .collect();
    Dataset::from_rows_any_labels(data.schema().clone(), rows)
}

//! Asymptotic error-rate formulas for k-NN voting, Bayes-error series,
//! the Cover–Hart-style bound check, the finite-sample convergence
//! model with its gamma-function constant, and Parzen-window Bayes
//! error estimation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, Instance, NormalizationStats, Schema};
use crate::numeric::{binomial, ln_binomial, ln_gamma};
use crate::{Error, Result};

/// A binary posterior (q1, q2) with q1 + q2 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPoint {
    q1: f64,
    q2: f64,
}

impl PosteriorPoint {
    pub fn new(q1: f64, q2: f64) -> Result<PosteriorPoint> {
        if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&q2) {
            return Err(Error::InvalidParameter("posteriors must lie in [0,1]".into()));
        }
        if (q1 + q2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "posteriors must sum to 1, got {}",
                q1 + q2
            )));
        }
        Ok(PosteriorPoint { q1, q2 })
    }

    pub fn from_q1(q1: f64) -> Result<PosteriorPoint> {
        PosteriorPoint::new(q1, 1.0 - q1)
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }
}

/// Asymptotic error rate of a k-NN vote at a point with posterior `q`,
/// for odd k:
///
///   R^k = Σ_{i=1}^{(k+1)/2} (1/i)·C(2i−2, i−1)·(q1 q2)^i
///       + (1/2)·C(k+1, (k+1)/2)·(q1 q2)^{(k+1)/2}
///
/// Equal to the exact error of a majority vote over k labels drawn
/// i.i.d. from the posterior; at k = 1 it reduces to 2·q1·q2.
pub fn knn_asymptotic_error(q: &PosteriorPoint, k: usize) -> Result<f64> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("k must be odd and positive, got {k}")));
    }
    let x = q.q1 * q.q2;
    if x == 0.0 {
        return Ok(0.0);
    }
    let m = k.div_ceil(2);
    let mut acc = 0.0;
    for i in 1..=m {
        let n = 2 * i as u64 - 2;
        // Exact binomials while they fit; log-gamma terms beyond, where
        // coefficient and power would overflow/underflow separately.
        acc += if n <= 30 {
            (1.0 / i as f64) * binomial(n, i as u64 - 1) * x.powi(i as i32)
        } else {
            (ln_binomial(n, i as u64 - 1) + i as f64 * x.ln() - (i as f64).ln()).exp()
        };
    }
    acc += if k < 30 {
        0.5 * binomial(k as u64 + 1, m as u64) * x.powi(m as i32)
    } else {
        0.5 * (ln_binomial(k as u64 + 1, m as u64) + m as f64 * x.ln()).exp()
    };
    Ok(acc.clamp(0.0, 0.5))
}

/// Pointwise Bayes error: the exact value min{q1, q2} next to the
/// truncated series Σ (1/i)·C(2i−2, i−1)·(q1 q2)^i, which converges to
/// the exact value as terms grow.
pub fn bayes_error_point(q: &PosteriorPoint, series_terms: usize) -> Result<(f64, f64)> {
    if series_terms == 0 {
        return Err(Error::InvalidParameter("series needs at least one term".into()));
    }
    let exact = q.q1.min(q.q2);
    let x = q.q1 * q.q2;
    let mut series = 0.0;
    // term_i = (1/i)·C(2i−2, i−1)·x^i, kept as one product so the
    // Catalan factor (~4^i) and x^i never overflow/underflow separately.
    let mut term = x;
    for i in 1..=series_terms {
        if i > 1 {
            term *= x * (4 * i - 6) as f64 / i as f64;
        }
        series += term;
    }
    Ok((exact, series))
}

/// Bound check: r_star − tol ≤ r_measured ≤ 2·r_star + tol.
pub fn check_bounds(r_star: f64, r_measured: f64, k: usize, tolerance: f64) -> Result<bool> {
    if !(0.0..=0.5).contains(&r_star) {
        return Err(Error::InvalidParameter(format!("r_star must be in [0, 0.5], got {r_star}")));
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("k must be odd and positive, got {k}")));
    }
    Ok(r_star - tolerance <= r_measured && r_measured <= 2.0 * r_star + tolerance)
}

/// Chained bound check over increasing odd k on the same data: each
/// measurement obeys the bounds and the sequence is monotone
/// non-increasing in k within the tolerance.
pub fn check_bounds_chain(r_star: f64, measured: &[(usize, f64)], tolerance: f64) -> Result<bool> {
    let mut ok = true;
    for &(k, r) in measured {
        ok &= check_bounds(r_star, r, k, tolerance)?;
    }
    for w in measured.windows(2) {
        let ((k_lo, r_lo), (k_hi, r_hi)) = (w[0], w[1]);
        if k_hi <= k_lo {
            return Err(Error::InvalidParameter("measurements must be sorted by k".into()));
        }
        ok &= r_hi <= r_lo + tolerance;
    }
    Ok(ok)
}

/// The convergence-rate constant
/// β = Γ^{2/(d+1)}((d+3)/2) · Γ(2/(d+1) + 1) / (π·(d+1))
/// for d identifying attributes (d+1 total dimensions).
pub fn beta_constant(d: usize) -> f64 {
    assert!(d >= 1, "d must be at least 1");
    let e = 2.0 / (d as f64 + 1.0);
    (e * ln_gamma((d as f64 + 3.0) / 2.0) + ln_gamma(e + 1.0)).exp()
        / (std::f64::consts::PI * (d as f64 + 1.0))
}

/// Finite-sample error model for the anatomized 1-NN classifier:
/// asymptote plus a fitted bias constant scaled by (N·l)^{−2/(d+1)}.
/// With l = 1 this is the original-data model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceModel {
    pub asymptote: f64,
    pub constant: f64,
    pub d: usize,
    pub l: usize,
}

/// Predicted error at a given original-training-set size.
pub fn convergence_predict(model: &ConvergenceModel, n_train: usize) -> f64 {
    assert!(n_train >= 1);
    let nl = (n_train * model.l) as f64;
    model.asymptote + model.constant * nl.powf(-2.0 / (model.d as f64 + 1.0))
}

/// How the asymptote of a fitted convergence model is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoteRule {
    /// The minimum of the measured error rates (the default rule).
    MinObserved,
    /// Both parameters via least squares.
    Fitted,
}

/// Fit a convergence model to measured (training size, error) points:
/// the asymptote is the minimum observed error, and the bias constant
/// the nonnegative least-squares fit of error ≈ asymptote + c·(n·l)^{−2/(d+1)}.
pub fn convergence_fit(measured: &[(usize, f64)], d: usize, l: usize) -> Result<ConvergenceModel> {
    convergence_fit_with(measured, d, l, AsymptoteRule::MinObserved)
}

pub fn convergence_fit_with(
    measured: &[(usize, f64)],
    d: usize,
    l: usize,
    rule: AsymptoteRule,
) -> Result<ConvergenceModel> {
    if measured.len() < 2 {
        return Err(Error::InvalidParameter("convergence fit needs at least 2 points".into()));
    }
    if l < 1 || d < 1 {
        return Err(Error::InvalidParameter("d and l must be at least 1".into()));
    }
    let exponent = -2.0 / (d as f64 + 1.0);
    let xs: Vec<f64> = measured.iter().map(|&(n, _)| ((n * l) as f64).powf(exponent)).collect();
    match rule {
        AsymptoteRule::MinObserved => {
            let asymptote = measured.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
            let num: f64 = xs.iter().zip(measured).map(|(x, &(_, e))| x * (e - asymptote)).sum();
            let den: f64 = xs.iter().map(|x| x * x).sum();
            let constant = (num / den).max(0.0);
            Ok(ConvergenceModel { asymptote, constant, d, l })
        }
        AsymptoteRule::Fitted => {
            // Ordinary least squares for e = a + c·x.
            let n = measured.len() as f64;
            let sx: f64 = xs.iter().sum();
            let sy: f64 = measured.iter().map(|&(_, e)| e).sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sxy: f64 = xs.iter().zip(measured).map(|(x, &(_, e))| x * e).sum();
            let det = n * sxx - sx * sx;
            if det.abs() < 1e-300 {
                return Err(Error::InvalidParameter(
                    "degenerate fit: all training sizes equal".into(),
                ));
            }
            let constant = ((n * sxy - sx * sy) / det).max(0.0);
            let asymptote = ((sy - constant * sx) / n).clamp(0.0, 0.5);
            Ok(ConvergenceModel { asymptote, constant, d, l })
        }
    }
}

/// Parzen kernel shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParzenKernel {
    GaussianProduct,
    UniformHypercube,
}

/// Default kernel width rule: r = N^(−1/(d+5)) for d identifying
/// attributes.
pub fn default_parzen_width(n_train: usize, d: usize) -> f64 {
    (n_train as f64).powf(-1.0 / (d as f64 + 5.0))
}

struct ClassPack {
    prior: f64,
    numeric: Vec<f64>, // row-major, n_rows × n_num axes
    cats: Vec<u32>,    // row-major, n_rows × n_cat axes
    n_rows: usize,
}

/// Parzen-window density estimator per class over the distance axes
/// (normalized numeric differences, 0/1 categorical mismatches).
pub struct ParzenEstimator {
    kernel: ParzenKernel,
    width: f64,
    // Training-schema index and attribute name per axis; queries are
    // matched by name so eval column order is free.
    num_axes: Vec<(usize, String)>,
    cat_axes: Vec<(usize, String)>,
    dicts: Vec<BTreeMap<String, u32>>, // one per cat axis
    classes: Vec<(String, ClassPack)>,
    stats: NormalizationStats,
}

impl ParzenEstimator {
    /// Fit class-conditional densities on a training set; `width` of
    /// `None` applies the default width rule.
    pub fn fit(train: &Dataset, kernel: ParzenKernel, width: Option<f64>) -> Result<ParzenEstimator> {
        let schema = train.schema();
        let stats = NormalizationStats::fit(train)?;
        let width = width.unwrap_or_else(|| default_parzen_width(train.n(), schema.d()));
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel width must be > 0, got {width}")));
        }
        let mut num_axes = Vec::new();
        let mut cat_axes = Vec::new();
        for &idx in &schema.distance_indices() {
            let name = schema.attribute(idx).name.clone();
            match schema.attribute(idx).kind {
                AttributeKind::Numeric => num_axes.push((idx, name)),
                AttributeKind::Categorical => cat_axes.push((idx, name)),
            }
        }
        let mut dicts: Vec<BTreeMap<String, u32>> = vec![BTreeMap::new(); cat_axes.len()];
        for row in train.rows() {
            for (a, (idx, _)) in cat_axes.iter().enumerate() {
                let v = row.values[*idx].as_cat().unwrap();
                let next = dicts[a].len() as u32;
                dicts[a].entry(v.to_string()).or_insert(next);
            }
        }
        let labels = train.class_labels();
        if labels.len() < 2 {
            return Err(Error::Data("both classes must be present in training data".into()));
        }
        let class_idx = schema.class_index();
        let mut classes = Vec::new();
        for label in labels {
            let rows: Vec<&Instance> = train
                .rows()
                .iter()
                .filter(|r| r.values[class_idx].as_cat() == Some(label.as_str()))
                .collect();
            let mut numeric = Vec::with_capacity(rows.len() * num_axes.len());
            let mut cats = Vec::with_capacity(rows.len() * cat_axes.len());
            for r in &rows {
                for (idx, _) in &num_axes {
                    numeric.push(stats.normalize(*idx, r.values[*idx].as_num().unwrap()));
                }
                for (a, (idx, _)) in cat_axes.iter().enumerate() {
                    cats.push(dicts[a][r.values[*idx].as_cat().unwrap()]);
                }
            }
            let pack = ClassPack {
                prior: rows.len() as f64 / train.n() as f64,
                numeric,
                cats,
                n_rows: rows.len(),
            };
            classes.push((label, pack));
        }
        Ok(ParzenEstimator { kernel, width, num_axes, cat_axes, dicts, classes, stats })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn priors(&self) -> Vec<(String, f64)> {
        self.classes.iter().map(|(l, p)| (l.clone(), p.prior)).collect()
    }

    /// Class-conditional density estimates at a query point, in class
    /// label order.
    pub fn densities(&self, schema: &Schema, query: &Instance) -> Result<Vec<f64>> {
        let (qn, qc) = self.compile_query(schema, query)?;
        Ok(self.classes.iter().map(|(_, pack)| self.density_of(pack, &qn, &qc)).collect())
    }

    fn compile_query(&self, schema: &Schema, query: &Instance) -> Result<(Vec<f64>, Vec<u32>)> {
        let mut qn = Vec::with_capacity(self.num_axes.len());
        for (idx, name) in &self.num_axes {
            let col = schema
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("query lacks attribute '{name}'")))?;
            let x = query.values[col]
                .as_num()
                .ok_or_else(|| Error::Schema(format!("'{name}' kind mismatch")))?;
            qn.push(self.stats.normalize(*idx, x));
        }
        let mut qc = Vec::with_capacity(self.cat_axes.len());
        for (a, (_, name)) in self.cat_axes.iter().enumerate() {
            let col = schema
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("query lacks attribute '{name}'")))?;
            let s = query.values[col]
                .as_cat()
                .ok_or_else(|| Error::Schema(format!("'{name}' kind mismatch")))?;
            qc.push(self.dicts[a].get(s).copied().unwrap_or(u32::MAX));
        }
        Ok((qn, qc))
    }

    fn density_of(&self, pack: &ClassPack, qn: &[f64], qc: &[u32]) -> f64 {
        if pack.n_rows == 0 {
            return 0.0;
        }
        let r = self.width;
        let n_num = self.num_axes.len();
        let n_cat = self.cat_axes.len();
        let dims = (n_num + n_cat) as f64;
        let mut acc = 0.0;
        match self.kernel {
            ParzenKernel::GaussianProduct => {
                let inv = 1.0 / (2.0 * r * r);
                for row in 0..pack.n_rows {
                    let mut d2 = 0.0;
                    for (a, q) in qn.iter().enumerate() {
                        let d = q - pack.numeric[row * n_num + a];
                        d2 += d * d;
                    }
                    for (a, q) in qc.iter().enumerate() {
                        d2 += f64::from(pack.cats[row * n_cat + a] != *q);
                    }
                    acc += (-d2 * inv).exp();
                }
                let norm = ((2.0 * std::f64::consts::PI).sqrt() * r).powf(dims);
                acc / (pack.n_rows as f64 * norm)
            }
            ParzenKernel::UniformHypercube => {
                let half = r / 2.0;
                'rows: for row in 0..pack.n_rows {
                    for (a, q) in qn.iter().enumerate() {
                        if (q - pack.numeric[row * n_num + a]).abs() > half {
                            continue 'rows;
                        }
                    }
                    for (a, q) in qc.iter().enumerate() {
                        if f64::from(pack.cats[row * n_cat + a] != *q) > half {
                            continue 'rows;
                        }
                    }
                    acc += 1.0;
                }
                acc / (pack.n_rows as f64 * r.powf(dims))
            }
        }
    }

    /// Classify by the log-likelihood-ratio rule h(X) ≷ t with
    /// t = ln(P1/P2): equivalently, the larger prior-weighted density
    /// wins; an exact tie (including both densities zero) falls back to
    /// the prior-majority class.
    pub fn classify(&self, schema: &Schema, query: &Instance) -> Result<&str> {
        let (qn, qc) = self.compile_query(schema, query)?;
        let p1 = self.classes[0].1.prior * self.density_of(&self.classes[0].1, &qn, &qc);
        let p2 = self.classes[1].1.prior * self.density_of(&self.classes[1].1, &qn, &qc);
        if p1 == p2 {
            let majority =
                if self.classes[0].1.prior >= self.classes[1].1.prior { 0 } else { 1 };
            return Ok(&self.classes[majority].0);
        }
        Ok(if p1 > p2 { &self.classes[0].0 } else { &self.classes[1].0 })
    }
}

/// Empirical Bayes-error estimate: Parzen class-conditional densities
/// fitted on `train`, eval rows classified by the likelihood-ratio
/// rule, misclassification fraction returned.
pub fn parzen_bayes_error(
    train: &Dataset,
    eval: &Dataset,
    kernel: ParzenKernel,
    width: Option<f64>,
) -> Result<f64> {
    if eval.n() == 0 {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let est = ParzenEstimator::fit(train, kernel, width)?;
    let schema = eval.schema();
    let class_idx = schema.class_index();
    let errors = eval
        .rows()
        .par_iter()
        .map(|row| {
            let predicted = est.classify(schema, row)?;
            let actual = row.values[class_idx]
                .as_cat()
                .ok_or_else(|| Error::Data(format!("row {} has no class label", row.id)))?;
            Ok(usize::from(predicted != actual))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(errors.iter().sum::<usize>() as f64 / eval.n() as f64)
}

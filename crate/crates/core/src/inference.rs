//! Posterior summaries under 0–1 loss, clustering agreement, error
//! aggregation, and distances between node-wise probability matrices.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::identify::NodeProbMatrix;
use crate::model::Assignment;
use crate::sampler::Trace;

/// Canonical form of a partition: labels renumbered by first appearance.
/// Two assignments share a key iff they have the same co-membership matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionKey(Vec<usize>);

impl PartitionKey {
    pub fn new(z: &Assignment) -> Self {
        Self::from_labels(z.labels())
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: HashMap<usize, usize> = HashMap::new();
        let canon = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self(canon)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn to_assignment(&self) -> Assignment {
        Assignment::from_labels(self.0.clone())
    }
}

/// Number of non-empty communities.
pub fn effective_k(z: &Assignment) -> usize {
    z.block_sizes().iter().filter(|&&s| s > 0).count()
}

/// Most frequent value; ties go to the smallest.
pub fn mode_of(values: &[usize]) -> Result<usize> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|(va, ca), (vb, cb)| ca.cmp(cb).then(vb.cmp(va)))
        .map(|(v, _)| v)
        .ok_or(Error::Empty)
}

/// Posterior mode of the effective community count, ties to the smaller K.
pub fn posterior_mode_k(trace: &Trace) -> Result<usize> {
    let ks: Vec<usize> = trace.draws.iter().map(|d| d.k_eff).collect();
    mode_of(&ks)
}

/// Most frequent partition class among the draws, with canonical labels.
/// Ties go to the class seen first.
pub fn posterior_mode_z(trace: &Trace) -> Result<Assignment> {
    mode_partition(trace.draws.iter().map(|d| &d.z))
}

pub fn mode_partition<'a, I: IntoIterator<Item = &'a Assignment>>(draws: I) -> Result<Assignment> {
    // key -> (count, first index)
    let mut tally: HashMap<PartitionKey, (usize, usize)> = HashMap::new();
    for (idx, z) in draws.into_iter().enumerate() {
        tally.entry(PartitionKey::new(z)).or_insert((0, idx)).0 += 1;
    }
    tally
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .map(|(key, _)| key.to_assignment())
        .ok_or(Error::Empty)
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Returns 1 when the index is
/// degenerate (both partitions trivial in the same way).
pub fn adjusted_rand_index(z1: &Assignment, z2: &Assignment) -> Result<f64> {
    ari_labels(z1.labels(), z2.labels())
}

pub fn ari_labels(left: &[usize], right: &[usize]) -> Result<f64> {
    if left.len() != right.len() {
        return Err(Error::DimensionMismatch { expected: left.len(), got: right.len() });
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in left.iter().zip(right) {
        *joint.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(left.len() as u64);
    let expected = if total > 0.0 { sum_rows * sum_cols / total } else { 0.0 };
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Mean ARI of every retained draw against `z0`.
pub fn mean_ari(trace: &Trace, z0: &Assignment) -> Result<f64> {
    if trace.draws.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for draw in &trace.draws {
        total += adjusted_rand_index(&draw.z, z0)?;
    }
    Ok(total / trace.draws.len() as f64)
}

/// `(mean(K̂) − k0, sqrt(mean((K̂ − k0)²)))`.
pub fn bias_rmse(estimates: &[usize], k0: usize) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::Empty);
    }
    let m = estimates.len() as f64;
    let errs = estimates.iter().map(|&k| k as f64 - k0 as f64);
    let bias = errs.clone().sum::<f64>() / m;
    let mse = errs.map(|e| e * e).sum::<f64>() / m;
    Ok((bias, mse.sqrt()))
}

fn check_same_n(a: &NodeProbMatrix, b: &NodeProbMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: b.n() });
    }
    Ok(())
}

/// Squared Hellinger distance between Bernoulli(p) and Bernoulli(q),
/// normalized to lie in [0, 1].
pub fn bernoulli_hellinger_sq(p: f64, q: f64) -> f64 {
    0.5 * ((p.sqrt() - q.sqrt()).powi(2) + ((1.0 - p).sqrt() - (1.0 - q).sqrt()).powi(2))
}

/// Hellinger distance between the product Bernoulli measures over pairs
/// `i < j`: `H² = 2 − 2 ∏ (1 − H²_ij / 2)`.
pub fn hellinger(theta0: &NodeProbMatrix, theta1: &NodeProbMatrix) -> Result<f64> {
    check_same_n(theta0, theta1)?;
    let n = theta0.n();
    // accumulate the product of affinities in log space
    let mut ln_affinity = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            ln_affinity += (1.0 - 0.5 * bernoulli_hellinger_sq(theta0.get(i, j), theta1.get(i, j))).ln();
        }
    }
    Ok((2.0 - 2.0 * ln_affinity.exp()).max(0.0).sqrt())
}

/// KL divergence of Bernoulli(q) from Bernoulli(p), `+inf` when absolute
/// continuity fails.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// `Σ_{i<j} KL(Ber(θ⁰_ij) ‖ Ber(θ¹_ij))`.
pub fn kl_product_bernoulli(theta0: &NodeProbMatrix, theta1: &NodeProbMatrix) -> Result<f64> {
    check_same_n(theta0, theta1)?;
    let n = theta0.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += bernoulli_kl(theta0.get(i, j), theta1.get(i, j));
        }
    }
    Ok(total)
}

//! Parameter types of the diagonally dominant SBM and the factors of its
//! unnormalized log posterior.
//!
//! Labels are stored zero-based (`0..k`); files and reports use one-based
//! labels. Every density is evaluated in natural-log space and is either
//! finite or exactly `-inf`.

use crate::error::{Error, Result};
use crate::math::{ln_factorial, ln_gamma, xlogy};
use crate::netgen::AdjacencyMatrix;

/// Community labels for `n` nodes with a declared community count `k`.
/// Empty communities are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Self { labels, k })
    }

    /// Builds an assignment whose `k` is the largest label used.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
        Self { labels, k }
    }

    /// Parses one-based labels (as used in files).
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l == 0) {
            return Err(Error::LabelOutOfRange { label: bad, k: 0 });
        }
        Ok(Self::from_labels(labels.iter().map(|&l| l - 1).collect()))
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    /// Community sizes `n_c`, indexed by label.
    pub fn block_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == community).collect()
    }

    pub(crate) fn set_label(&mut self, node: usize, label: usize) {
        debug_assert!(label < self.k);
        self.labels[node] = label;
    }

    /// Opens an empty community at `pos`, shifting labels `>= pos` up by one.
    pub(crate) fn insert_community(&mut self, pos: usize) {
        debug_assert!(pos <= self.k);
        for l in &mut self.labels {
            if *l >= pos {
                *l += 1;
            }
        }
        self.k += 1;
    }

    /// Drops the (empty) community `pos`, shifting labels above it down.
    pub(crate) fn remove_community(&mut self, pos: usize) {
        debug_assert!(pos < self.k);
        for l in &mut self.labels {
            debug_assert!(*l != pos, "removing a non-empty community");
            if *l > pos {
                *l -= 1;
            }
        }
        self.k -= 1;
    }
}

/// Symmetric `k × k` matrix of connection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl ConnectivityMatrix {
    /// Validates symmetry and the `[0, 1]` range. `entries` is row-major.
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != k * k {
            return Err(Error::DimensionMismatch { expected: k * k, got: entries.len() });
        }
        for a in 0..k {
            for b in 0..k {
                let v = entries[a * k + b];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange { row: a, col: b, value: v });
                }
                if v != entries[b * k + a] {
                    return Err(Error::InvalidArgument(format!(
                        "connectivity matrix is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Self { k, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let mut entries = Vec::with_capacity(k * k);
        for row in rows {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Self::new(k, entries)
    }

    /// Diagonal `diag`, every off-diagonal entry `off`.
    pub fn constant(k: usize, diag: f64, off: f64) -> Result<Self> {
        let entries = (0..k * k)
            .map(|idx| if idx / k == idx % k { diag } else { off })
            .collect();
        Self::new(k, entries)
    }

    pub(crate) fn zeros(k: usize) -> Self {
        Self { k, entries: vec![0.0; k * k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.k + b]
    }

    pub(crate) fn set_sym(&mut self, a: usize, b: usize, value: f64) {
        self.entries[a * self.k + b] = value;
        self.entries[b * self.k + a] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k.max(1)).take(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Entrywise scaling, e.g. by a sparsity factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.k, self.entries.iter().map(|v| v * factor).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.k != other.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: other.k });
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Block sufficient statistics: edge counts `O_ab(Z)` and community sizes,
/// from which the pair counts `n_ab(Z)` follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStats {
    k: usize,
    edges: Vec<u64>,
    sizes: Vec<u64>,
}

impl BlockStats {
    pub fn k(&self) -> usize {
        self.k
    }

    /// `O_ab`; within-block edges are counted once.
    #[inline]
    pub fn edges(&self, a: usize, b: usize) -> u64 {
        self.edges[a * self.k + b]
    }

    /// `n_ab`: `n_a(n_a - 1)/2` on the diagonal, `n_a n_b` off it.
    #[inline]
    pub fn pairs(&self, a: usize, b: usize) -> u64 {
        if a == b {
            let s = self.sizes[a];
            s * s.saturating_sub(1) / 2
        } else {
            self.sizes[a] * self.sizes[b]
        }
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    #[inline]
    fn add_edges(&mut self, a: usize, b: usize, delta: i64) {
        let idx = a * self.k + b;
        self.edges[idx] = (self.edges[idx] as i64 + delta) as u64;
        if a != b {
            let idx = b * self.k + a;
            self.edges[idx] = (self.edges[idx] as i64 + delta) as u64;
        }
    }

    /// Updates the statistics for `node` moving from `from` to `to`.
    /// `neighbor_counts[c]` is the number of neighbours of `node` carrying
    /// label `c` (the node itself excluded).
    pub(crate) fn move_node(&mut self, from: usize, to: usize, neighbor_counts: &[u64]) {
        if from == to {
            return;
        }
        for (c, &cnt) in neighbor_counts.iter().enumerate() {
            if cnt > 0 {
                self.add_edges(from, c, -(cnt as i64));
                self.add_edges(to, c, cnt as i64);
            }
        }
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
    }

    pub(crate) fn insert_empty(&mut self, pos: usize) {
        let k = self.k + 1;
        let mut edges = vec![0u64; k * k];
        let old = |c: usize| if c < pos { Some(c) } else if c == pos { None } else { Some(c - 1) };
        for a in 0..k {
            for b in 0..k {
                if let (Some(oa), Some(ob)) = (old(a), old(b)) {
                    edges[a * k + b] = self.edges[oa * self.k + ob];
                }
            }
        }
        self.sizes.insert(pos, 0);
        self.edges = edges;
        self.k = k;
    }

    pub(crate) fn remove_empty(&mut self, pos: usize) {
        debug_assert_eq!(self.sizes[pos], 0);
        let k = self.k - 1;
        let old = |c: usize| if c < pos { c } else { c + 1 };
        let mut edges = vec![0u64; k * k];
        for a in 0..k {
            for b in 0..k {
                edges[a * k + b] = self.edges[old(a) * self.k + old(b)];
            }
        }
        self.sizes.remove(pos);
        self.edges = edges;
        self.k = k;
    }

    /// Folds community `src` into `dst`, leaving `src` empty.
    pub(crate) fn merge_into(&mut self, dst: usize, src: usize) {
        debug_assert_ne!(dst, src);
        let k = self.k;
        let within = self.edges(dst, dst) + self.edges(src, src) + self.edges(dst, src);
        for c in 0..k {
            if c == dst || c == src {
                continue;
            }
            let moved = self.edges(src, c);
            self.edges[dst * k + c] += moved;
            self.edges[c * k + dst] += moved;
            self.edges[src * k + c] = 0;
            self.edges[c * k + src] = 0;
        }
        self.edges[dst * k + dst] = within;
        self.edges[src * k + src] = 0;
        self.edges[dst * k + src] = 0;
        self.edges[src * k + dst] = 0;
        self.sizes[dst] += self.sizes[src];
        self.sizes[src] = 0;
    }
}

/// Counts, per label, the neighbours of `node` under `labels`.
pub fn neighbor_label_counts(a: &AdjacencyMatrix, labels: &[usize], k: usize, node: usize) -> Vec<u64> {
    let mut counts = vec![0u64; k];
    for &j in a.neighbors(node) {
        counts[labels[j]] += 1;
    }
    counts
}

/// Hyperparameters of the prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Dominance gap between each diagonal entry and its row's off-diagonals.
    pub delta: f64,
    /// Truncation of the prior on `K`.
    pub k_max: usize,
    /// Poisson rate of the prior on `K`.
    pub lambda: f64,
}

impl Hyperparams {
    /// `delta = min(0.05, ln n / n)`, `k_max = floor(sqrt n)`, `lambda = 1`.
    pub fn for_nodes(n: usize) -> Self {
        let nf = n.max(2) as f64;
        Self {
            delta: (nf.ln() / nf).min(0.05),
            k_max: ((n as f64).sqrt().floor() as usize).max(1),
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 0.5), got {}", self.delta)));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Edge and pair counts between every pair of blocks of `z`.
pub fn block_stats(a: &AdjacencyMatrix, z: &Assignment) -> Result<BlockStats> {
    if z.n() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: z.n() });
    }
    let k = z.k();
    let mut stats = BlockStats { k, edges: vec![0; k * k], sizes: z.block_sizes() };
    for (i, j) in a.edges() {
        stats.add_edges(z.label(i), z.label(j), 1);
    }
    Ok(stats)
}

fn check_dims(stats: &BlockStats, p: &ConnectivityMatrix) -> Result<()> {
    if stats.k() != p.k() {
        return Err(Error::DimensionMismatch { expected: stats.k(), got: p.k() });
    }
    Ok(())
}

/// `Σ_{a≤b} O_ab ln P_ab + (n_ab − O_ab) ln(1 − P_ab)`.
pub fn log_likelihood(stats: &BlockStats, p: &ConnectivityMatrix) -> Result<f64> {
    check_dims(stats, p)?;
    let mut total = 0.0;
    for a in 0..stats.k() {
        for b in a..stats.k() {
            let o = stats.edges(a, b) as f64;
            let m = stats.pairs(a, b) as f64;
            let pab = p.get(a, b);
            total += xlogy(o, pab) + xlogy(m - o, 1.0 - pab);
        }
    }
    Ok(total)
}

/// Log density of `P` under the dominance prior: diagonals uniform on
/// `(delta, 1]`, each off-diagonal uniform on `[0, P_aa ∧ P_bb − delta]`.
pub fn log_prior_p(p: &ConnectivityMatrix, hp: &Hyperparams) -> f64 {
    let k = p.k();
    let delta = hp.delta;
    for a in 0..k {
        let d = p.get(a, a);
        if !(d > delta && d <= 1.0) {
            return f64::NEG_INFINITY;
        }
    }
    let mut total = -(k as f64) * (1.0 - delta).ln();
    for a in 0..k {
        for b in (a + 1)..k {
            let bound = p.get(a, a).min(p.get(b, b)) - delta;
            let v = p.get(a, b);
            if !(v >= 0.0 && v <= bound) {
                return f64::NEG_INFINITY;
            }
            total -= bound.ln();
        }
    }
    total
}

/// `ln Γ(K) − ln Γ(n + K) + Σ_c ln Γ(n_c + 1)` from block sizes.
pub fn log_prior_z_sizes(sizes: &[u64]) -> f64 {
    let k = sizes.len() as f64;
    let n: u64 = sizes.iter().sum();
    ln_gamma(k) - ln_gamma(n as f64 + k) + sizes.iter().map(|&s| ln_factorial(s)).sum::<f64>()
}

/// Dirichlet-multinomial prior of a labelled assignment given its `K`.
pub fn log_prior_z(z: &Assignment) -> f64 {
    log_prior_z_sizes(&z.block_sizes())
}

/// Truncated Poisson prior on `K`, unnormalized: `K ln λ − ln K!` on
/// `1..=k_max`, `-inf` elsewhere.
pub fn log_prior_k(k: usize, hp: &Hyperparams) -> f64 {
    if k < 1 || k > hp.k_max {
        return f64::NEG_INFINITY;
    }
    k as f64 * hp.lambda.ln() - ln_factorial(k as u64)
}

/// As [`log_prior_k`], normalized over `1..=k_max`.
pub fn log_prior_k_normalized(k: usize, hp: &Hyperparams) -> f64 {
    let terms: Vec<f64> = (1..=hp.k_max).map(|j| log_prior_k(j, hp)).collect();
    log_prior_k(k, hp) - crate::math::log_sum_exp(&terms)
}

/// Unnormalized log posterior of `(Z, K, P)` given the cached statistics.
pub fn log_posterior_from_stats(stats: &BlockStats, p: &ConnectivityMatrix, hp: &Hyperparams) -> Result<f64> {
    let prior_p = log_prior_p(p, hp);
    let prior_k = log_prior_k(stats.k(), hp);
    if prior_p == f64::NEG_INFINITY || prior_k == f64::NEG_INFINITY {
        check_dims(stats, p)?;
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_likelihood(stats, p)? + prior_p + log_prior_z_sizes(stats.sizes()) + prior_k)
}

/// Unnormalized log posterior `ln Π(A|Z,P) + ln Π(P) + ln Π(Z|K) + ln Π(K)`.
pub fn log_posterior(a: &AdjacencyMatrix, z: &Assignment, p: &ConnectivityMatrix, hp: &Hyperparams) -> Result<f64> {
    let stats = block_stats(a, z)?;
    log_posterior_from_stats(&stats, p, hp)
}

/// `ln β(Z, A) = Σ_{a≤b} ln Γ(n_ab + 2) − ln Γ(O_ab + 1) − ln Γ(n_ab − O_ab + 1)`,
/// the log normalizing constant of the Beta proposal for `P`.
pub fn ln_beta_coefficient(stats: &BlockStats) -> f64 {
    let mut total = 0.0;
    for a in 0..stats.k() {
        for b in a..stats.k() {
            total += block_beta_term(stats.edges(a, b), stats.pairs(a, b));
        }
    }
    total
}

#[inline]
pub(crate) fn block_beta_term(edges: u64, pairs: u64) -> f64 {
    if pairs == 0 {
        return 0.0;
    }
    ln_gamma(pairs as f64 + 2.0) - ln_factorial(edges) - ln_factorial(pairs - edges)
}

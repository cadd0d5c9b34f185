//! Test-only oracles that evaluate densities by direct pair enumeration and
//! exact factorial arithmetic, independent of the block-statistics code path.

#![allow(dead_code)]

use ddsbm::sampler::{ChainState, MovePath, Proposal, Target};
use ddsbm::{AdjacencyMatrix, Assignment, ConnectivityMatrix, Hyperparams};

/// `ln m!` by direct summation.
pub fn ln_fact(m: u64) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

/// `ln Γ(m)` for a positive integer `m`.
pub fn ln_gamma_int(m: u64) -> f64 {
    ln_fact(m - 1)
}

pub fn sizes(labels: &[usize], k: usize) -> Vec<u64> {
    let mut s = vec![0u64; k];
    for &l in labels {
        s[l] += 1;
    }
    s
}

/// `(O_ab, n_ab)` for `a ≤ b` by enumerating every pair.
pub fn pair_counts(a: &AdjacencyMatrix, labels: &[usize], k: usize) -> Vec<(usize, usize, u64, u64)> {
    let mut o = vec![vec![0u64; k]; k];
    let mut m = vec![vec![0u64; k]; k];
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let (x, y) = (labels[i].min(labels[j]), labels[i].max(labels[j]));
            m[x][y] += 1;
            if a.has_edge(i, j) {
                o[x][y] += 1;
            }
        }
    }
    let mut out = Vec::new();
    for x in 0..k {
        for y in x..k {
            out.push((x, y, o[x][y], m[x][y]));
        }
    }
    out
}

/// Likelihood as a product of Bernoulli pmfs over the pairs of `nodes`.
pub fn loglik_nodes(a: &AdjacencyMatrix, labels: &[usize], nodes: &[usize], p: &ConnectivityMatrix) -> f64 {
    let mut total = 0.0;
    for (h, &i) in nodes.iter().enumerate() {
        for &j in &nodes[h + 1..] {
            let pij = p.get(labels[i], labels[j]);
            total += if a.has_edge(i, j) { pij.ln() } else { (1.0 - pij).ln() };
        }
    }
    total
}

pub fn loglik(a: &AdjacencyMatrix, labels: &[usize], p: &ConnectivityMatrix) -> f64 {
    let all: Vec<usize> = (0..labels.len()).collect();
    loglik_nodes(a, labels, &all, p)
}

pub fn prior_p(p: &ConnectivityMatrix, delta: f64) -> f64 {
    let k = p.k();
    let mut density = 0.0;
    for x in 0..k {
        if !(p.get(x, x) > delta && p.get(x, x) <= 1.0) {
            return f64::NEG_INFINITY;
        }
        density += (1.0 / (1.0 - delta)).ln();
    }
    for x in 0..k {
        for y in (x + 1)..k {
            let upper = p.get(x, x).min(p.get(y, y)) - delta;
            if p.get(x, y) < 0.0 || p.get(x, y) > upper {
                return f64::NEG_INFINITY;
            }
            density += (1.0 / upper).ln();
        }
    }
    density
}

pub fn prior_z(labels: &[usize], k: usize) -> f64 {
    let n = labels.len() as u64;
    ln_gamma_int(k as u64) - ln_gamma_int(n + k as u64) + sizes(labels, k).iter().map(|&s| ln_fact(s)).sum::<f64>()
}

pub fn prior_k(k: usize, hp: &Hyperparams) -> f64 {
    if k < 1 || k > hp.k_max {
        return f64::NEG_INFINITY;
    }
    k as f64 * hp.lambda.ln() - ln_fact(k as u64)
}

pub fn log_post(a: &AdjacencyMatrix, labels: &[usize], k: usize, p: &ConnectivityMatrix, hp: &Hyperparams) -> f64 {
    let pp = prior_p(p, hp.delta);
    let pk = prior_k(k, hp);
    if pp == f64::NEG_INFINITY || pk == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    loglik(a, labels, p) + pp + prior_z(labels, k) + pk
}

/// `ln β(Z, A)` from enumerated pair counts.
pub fn ln_beta_coef(a: &AdjacencyMatrix, labels: &[usize], k: usize) -> f64 {
    pair_counts(a, labels, k)
        .into_iter()
        .map(|(_, _, o, m)| ln_fact(m + 1) - ln_fact(o) - ln_fact(m - o))
        .sum()
}

/// Log density of `p` under independent `Beta(O + 1, n − O + 1)` entries.
pub fn beta_density(a: &AdjacencyMatrix, labels: &[usize], k: usize, p: &ConnectivityMatrix) -> f64 {
    pair_counts(a, labels, k)
        .into_iter()
        .map(|(x, y, o, m)| {
            let v = p.get(x, y);
            ln_fact(m + 1) - ln_fact(o) - ln_fact(m - o) + o as f64 * v.ln() + (m - o) as f64 * (1.0 - v).ln()
        })
        .sum()
}

/// Normalized GS proposal log probabilities over every label of `node`.
pub fn gs_log_probs(a: &AdjacencyMatrix, labels: &[usize], k: usize, node: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..k)
        .map(|c| {
            let mut cand = labels.to_vec();
            cand[node] = c;
            -ln_beta_coef(a, &cand, k) + prior_z(&cand, k)
        })
        .collect();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = max + weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
    weights.iter().map(|w| w - norm).collect()
}

/// Log probability of reassigning `order` (members of `c1 ∪ c2`) to
/// `targets`, evaluating each step from full sub-network likelihoods.
pub fn m3_path_log_prob(
    a: &AdjacencyMatrix,
    base: &[usize],
    c1: usize,
    c2: usize,
    order: &[usize],
    targets: &[usize],
    p: &ConnectivityMatrix,
) -> f64 {
    let n = base.len();
    let mut present: Vec<usize> = (0..n).filter(|&i| base[i] != c1 && base[i] != c2).collect();
    let mut labels = base.to_vec();
    let mut total = 0.0;
    for (h, &x) in order.iter().enumerate() {
        let n1 = present.iter().filter(|&&j| labels[j] == c1).count() as f64;
        let n2 = present.iter().filter(|&&j| labels[j] == c2).count() as f64;
        let mut with = present.clone();
        with.push(x);
        labels[x] = c1;
        let l1 = loglik_nodes(a, &labels, &with, p) + (n1 + 1.0).ln();
        labels[x] = c2;
        let l2 = loglik_nodes(a, &labels, &with, p) + (n2 + 1.0).ln();
        let chosen = if targets[h] == c1 { l1 } else { l2 };
        let max = l1.max(l2);
        total += chosen - (max + ((l1 - max).exp() + (l2 - max).exp()).ln());
        labels[x] = targets[h];
        present.push(x);
    }
    total
}

/// `ln ∫₀¹ u^s (1−u)^t du = ln s! t! / (s+t+1)!`.
pub fn ln_beta_integral(s: u64, t: u64) -> f64 {
    ln_fact(s) + ln_fact(t) - ln_fact(s + t + 1)
}

/// Log of the generic Metropolis–Hastings ratio
/// `π(x*) q(x | x*) / (π(x) q(x* | x))`, with `q` the full proposal density:
/// kernel choice (¼), branch choice, discrete path probability, and the Beta
/// density of the redrawn `P`.
pub fn generic_log_ratio(target: &Target<'_>, state: &ChainState, prop: &Proposal) -> f64 {
    let a = target.a;
    let hp = &target.hp;
    let z = state.z.labels();
    let k = state.z.k();
    let zs = prop.z.labels();
    let ks = prop.z.k();
    let n = z.len() as f64;
    let kf = k as f64;
    let quarter = 0.25f64.ln();
    let half = 0.5f64.ln();

    let (q_fwd, q_rev) = match &prop.path {
        MovePath::MkAdd { .. } => (quarter + half - (kf + 1.0).ln(), quarter + half - (ks as f64).ln()),
        MovePath::MkDelete { .. } => (quarter + half - kf.ln(), quarter + half - (ks as f64 + 1.0).ln()),
        MovePath::Gs { node, from, to, .. } => {
            let fwd = gs_log_probs(a, z, k, *node)[*to];
            let rev = gs_log_probs(a, zs, ks, *node)[*from];
            (quarter - n.ln() + fwd, quarter - n.ln() + rev)
        }
        MovePath::M3 { c1, c2, order, .. } => {
            let pair = -(kf * (kf - 1.0)).ln();
            let shuffle = -ln_fact(order.len() as u64);
            let fwd_targets: Vec<usize> = order.iter().map(|&i| zs[i]).collect();
            let rev_targets: Vec<usize> = order.iter().map(|&i| z[i]).collect();
            let fwd = m3_path_log_prob(a, z, *c1, *c2, order, &fwd_targets, &state.p);
            let rev = m3_path_log_prob(a, zs, *c1, *c2, order, &rev_targets, &prop.p);
            (quarter + pair + shuffle + fwd, quarter + pair + shuffle + rev)
        }
        MovePath::Merge { keep, absorbed } => {
            let s = sizes(z, k);
            let fwd = quarter + half - (kf * (kf - 1.0)).ln();
            let kr = ks as f64;
            let rev = quarter + half - (kr * (kr + 1.0)).ln() + ln_beta_integral(s[*keep], s[*absorbed]);
            (fwd, rev)
        }
        MovePath::Split { new_position, .. } => {
            let s = sizes(zs, ks);
            let moved = s[*new_position];
            let stay = prop_source_size(zs, ks, prop);
            let fwd = quarter + half - (kf * (kf + 1.0)).ln() + ln_beta_integral(stay, moved);
            let rev = quarter + half - ((ks as f64) * (ks as f64 - 1.0)).ln();
            (fwd, rev)
        }
    };

    let post_new = log_post(a, zs, ks, &prop.p, hp);
    let post_old = log_post(a, z, k, &state.p, hp);
    if post_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let beta_new = beta_density(a, zs, ks, &prop.p);
    let beta_old = beta_density(a, z, k, &state.p);
    (post_new + q_rev + beta_old) - (post_old + q_fwd + beta_new)
}

/// Size of the split source after the split, in the proposal's labels.
fn prop_source_size(zs: &[usize], ks: usize, prop: &Proposal) -> u64 {
    match prop.path {
        MovePath::Split { source, new_position, .. } => {
            let shifted = if source < new_position { source } else { source + 1 };
            sizes(zs, ks)[shifted]
        }
        _ => unreachable!(),
    }
}

/// Random diagonally dominant `P` with gap at least `delta`.
pub fn random_dominant_p<R: rand::Rng>(k: usize, delta: f64, rng: &mut R) -> ConnectivityMatrix {
    let diag: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..0.99)).collect();
    let mut rows = vec![vec![0.0; k]; k];
    for x in 0..k {
        rows[x][x] = diag[x];
        for y in (x + 1)..k {
            let upper = diag[x].min(diag[y]) - delta;
            let v = rng.random_range(0.01..upper);
            rows[x][y] = v;
            rows[y][x] = v;
        }
    }
    ConnectivityMatrix::from_rows(&rows).unwrap()
}

/// Random graph on `n` nodes with edge probability `density`.
pub fn random_graph<R: rand::Rng>(n: usize, density: f64, rng: &mut R) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, &edges).unwrap()
}

pub fn random_assignment<R: rand::Rng>(n: usize, k: usize, rng: &mut R) -> Assignment {
    Assignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap()
}

/// A small random network with a random finite-posterior state.
pub struct SmallCase {
    pub a: AdjacencyMatrix,
    pub hp: Hyperparams,
    pub z: Assignment,
    pub p: ConnectivityMatrix,
}

pub fn small_case(seed: u64) -> SmallCase {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=8);
    let density = rng.random_range(0.1..0.9);
    let a = random_graph(n, density, &mut rng);
    let hp = Hyperparams { delta: 0.02, k_max: 5, lambda: rng.random_range(0.5..2.0) };
    let k = rng.random_range(1..=4);
    let z = random_assignment(n, k, &mut rng);
    let p = random_dominant_p(k, hp.delta, &mut rng);
    SmallCase { a, hp, z, p }
}

/// Compares specialized and generic log ratios; `None` when they agree.
pub fn ratio_mismatch(specialized: f64, generic: f64, rel_tol: f64) -> Option<f64> {
    if specialized == f64::NEG_INFINITY && generic == f64::NEG_INFINITY {
        return None;
    }
    let diff = (specialized - generic).abs();
    if diff <= rel_tol * generic.abs().max(1.0) {
        None
    } else {
        Some(diff)
    }
}

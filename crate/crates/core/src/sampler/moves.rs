//! The four proposal kernels. Each returns the proposed `(Z*, K*, P*)`
//! together with its log acceptance ratio; the caller draws the uniform.
//!
//! Every kernel redraws `P*` from independent Beta distributions given the
//! block statistics of `Z*`. Because that proposal density is proportional to
//! the likelihood, the likelihood cancels and each ratio reduces to prior
//! ratios, `β` ratios and discrete proposal ratios.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{ChainState, Target};
use crate::math::{ln_beta_pdf, ln_factorial, ln_sigmoid, log_sum_exp};
use crate::model::{
    block_beta_term, ln_beta_coefficient, log_prior_p, log_prior_z_sizes, neighbor_label_counts, Assignment,
    BlockStats, ConnectivityMatrix,
};

/// Draws `P*_ab ~ Beta(O_ab + 1, n_ab − O_ab + 1)` for `a ≤ b` and returns it
/// with its log density. Draws that round to exactly 0 or 1 are repeated.
pub fn propose_p<R: Rng + ?Sized>(stats: &BlockStats, rng: &mut R) -> (ConnectivityMatrix, f64) {
    let k = stats.k();
    let mut p = ConnectivityMatrix::zeros(k);
    let mut ln_q = 0.0;
    for a in 0..k {
        for b in a..k {
            let o = stats.edges(a, b) as f64;
            let m = stats.pairs(a, b) as f64;
            let (alpha, beta) = (o + 1.0, m - o + 1.0);
            let dist = Beta::new(alpha, beta).expect("shape parameters are at least one");
            let x = loop {
                let x: f64 = dist.sample(rng);
                if x > 0.0 && x < 1.0 {
                    break x;
                }
            };
            ln_q += ln_beta_pdf(x, alpha, beta);
            p.set_sym(a, b, x);
        }
    }
    (p, ln_q)
}

/// Log density of `p` under the Beta proposal built from `stats`.
pub fn ln_proposal_density_p(stats: &BlockStats, p: &ConnectivityMatrix) -> f64 {
    let mut total = 0.0;
    for a in 0..stats.k() {
        for b in a..stats.k() {
            let o = stats.edges(a, b) as f64;
            let m = stats.pairs(a, b) as f64;
            total += ln_beta_pdf(p.get(a, b), o + 1.0, m - o + 1.0);
        }
    }
    total
}

/// The four kernels, chosen uniformly at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    /// Add or delete an empty community.
    Mk,
    /// Relabel one node.
    Gs,
    /// Reallocate the members of two communities sequentially.
    M3,
    /// Merge two communities or split one.
    Ae,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [MoveKind::Mk, MoveKind::Gs, MoveKind::M3, MoveKind::Ae];

    pub fn index(self) -> usize {
        match self {
            MoveKind::Mk => 0,
            MoveKind::Gs => 1,
            MoveKind::M3 => 2,
            MoveKind::Ae => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Mk => "mk",
            MoveKind::Gs => "gs",
            MoveKind::M3 => "m3",
            MoveKind::Ae => "ae",
        }
    }
}

/// Why a kernel made no proposal. Skipped moves count as rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// MK picked a non-empty community to delete.
    DeleteNonEmpty,
    /// Adding a community would exceed `k_max`.
    AddBeyondKMax,
    /// M3 or merge needs two communities.
    TooFewCommunities,
    /// Splitting would exceed `k_max`.
    SplitBeyondKMax,
}

/// The discrete choices a kernel made, enough to evaluate its proposal
/// probability in both directions.
#[derive(Debug, Clone, PartialEq)]
pub enum MovePath {
    /// New empty community opened at `position` (labels of the proposal).
    MkAdd { position: usize },
    /// Empty community `position` (current labels) removed.
    MkDelete { position: usize },
    /// `node` relabelled `from → to`; `log_probs[c]` is the normalized
    /// proposal log probability of label `c`.
    Gs { node: usize, from: usize, to: usize, log_probs: Vec<f64> },
    /// Members of `c1 ∪ c2` reassigned in `order`. `forward_steps[h]` is the
    /// log probability of the label chosen for `order[h]`; the reverse path
    /// replays the same order towards the current labels under `P*`.
    M3 { c1: usize, c2: usize, order: Vec<usize>, forward_steps: Vec<f64>, forward_log_prob: f64, reverse_log_prob: f64 },
    /// Community `absorbed` folded into `keep` (current labels), then removed.
    Merge { keep: usize, absorbed: usize },
    /// Members of `source` (current labels) moved to a new community opened
    /// at `new_position` (labels of the proposal). `ln_path_prob` is the
    /// proposal probability with the split fraction integrated out.
    Split { source: usize, new_position: usize, split_fraction: f64, ln_path_prob: f64 },
}

/// A proposed state with its specialized log acceptance ratio.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub z: Assignment,
    pub p: ConnectivityMatrix,
    pub stats: BlockStats,
    /// Log of the acceptance ratio before truncation at one.
    pub log_ratio: f64,
    /// `ln Π(P*|Z*) − ln Π(P|Z)`, the part every kernel shares.
    pub log_prior_p_ratio: f64,
    /// Log Beta density of `P*` given `Z*`.
    pub ln_q_p: f64,
    pub path: MovePath,
}

impl Proposal {
    /// `min(0, log_ratio)`.
    pub fn log_accept_prob(&self) -> f64 {
        self.log_ratio.min(0.0)
    }
}

#[derive(Debug, Clone)]
pub enum ProposalOutcome {
    Skipped(MoveKind, SkipReason),
    Proposed(Proposal),
}

impl ProposalOutcome {
    pub fn proposal(&self) -> Option<&Proposal> {
        match self {
            ProposalOutcome::Proposed(p) => Some(p),
            ProposalOutcome::Skipped(..) => None,
        }
    }
}

fn finish<R: Rng + ?Sized>(
    kind: MoveKind,
    state: &ChainState,
    target: &Target<'_>,
    z: Assignment,
    stats: BlockStats,
    path: MovePath,
    rng: &mut R,
    extra: f64,
) -> ProposalOutcome {
    let (p, ln_q_p) = propose_p(&stats, rng);
    let log_prior_p_ratio = log_prior_p(&p, &target.hp) - log_prior_p(&state.p, &target.hp);
    let log_ratio = log_prior_p_ratio + extra;
    ProposalOutcome::Proposed(Proposal { kind, z, p, stats, log_ratio, log_prior_p_ratio, ln_q_p, path })
}

fn ln_lambda(target: &Target<'_>) -> f64 {
    target.hp.lambda.ln()
}

/// MK: with probability ½ open an empty community at a uniform position in
/// `[K+1]`, otherwise pick one of `[K]` and delete it if empty.
pub fn move_mk<R: Rng + ?Sized>(state: &ChainState, target: &Target<'_>, rng: &mut R) -> ProposalOutcome {
    let k = state.z.k();
    let n = state.z.n() as f64;
    let kf = k as f64;
    if rng.random_bool(0.5) {
        let position = rng.random_range(0..=k);
        if k + 1 > target.hp.k_max {
            return ProposalOutcome::Skipped(MoveKind::Mk, SkipReason::AddBeyondKMax);
        }
        let mut z = state.z.clone();
        z.insert_community(position);
        let mut stats = state.stats.clone();
        stats.insert_empty(position);
        let extra = kf.ln() - (kf + 1.0).ln() + ln_lambda(target) - (n + kf).ln();
        finish(MoveKind::Mk, state, target, z, stats, MovePath::MkAdd { position }, rng, extra)
    } else {
        let position = rng.random_range(0..k);
        if state.stats.sizes()[position] > 0 {
            return ProposalOutcome::Skipped(MoveKind::Mk, SkipReason::DeleteNonEmpty);
        }
        let mut z = state.z.clone();
        z.remove_community(position);
        let mut stats = state.stats.clone();
        stats.remove_empty(position);
        let extra = kf.ln() - (kf - 1.0).ln() - ln_lambda(target) + (n + kf - 1.0).ln();
        finish(MoveKind::Mk, state, target, z, stats, MovePath::MkDelete { position }, rng, extra)
    }
}

/// `Σ` of block `β` terms over blocks touching any of `rows`.
fn ln_beta_touching(stats: &BlockStats, rows: &[usize]) -> f64 {
    let k = stats.k();
    let mut total = 0.0;
    for a in 0..k {
        for b in a..k {
            if rows.contains(&a) || rows.contains(&b) {
                total += block_beta_term(stats.edges(a, b), stats.pairs(a, b));
            }
        }
    }
    total
}

/// GS log weights `−ln β(Z^c, A) + ln Π(Z^c | K)` for moving `node` to each
/// label `c`, normalized, together with the moved statistics.
pub(crate) fn gs_weights(state: &ChainState, target: &Target<'_>, node: usize) -> (Vec<f64>, Vec<BlockStats>) {
    let k = state.z.k();
    let from = state.z.label(node);
    let counts = neighbor_label_counts(target.a, state.z.labels(), k, node);
    let base_beta = ln_beta_coefficient(&state.stats);
    let mut weights = Vec::with_capacity(k);
    let mut moved = Vec::with_capacity(k);
    for cand in 0..k {
        let mut stats = state.stats.clone();
        stats.move_node(from, cand, &counts);
        let rows = [from, cand];
        let ln_beta = base_beta - ln_beta_touching(&state.stats, &rows) + ln_beta_touching(&stats, &rows);
        weights.push(-ln_beta + log_prior_z_sizes(stats.sizes()));
        moved.push(stats);
    }
    let norm = log_sum_exp(&weights);
    for w in &mut weights {
        *w -= norm;
    }
    (weights, moved)
}

/// GS: relabel a uniformly chosen node from its Gibbs-like proposal.
pub fn move_gs<R: Rng + ?Sized>(state: &ChainState, target: &Target<'_>, rng: &mut R) -> ProposalOutcome {
    let node = rng.random_range(0..state.z.n());
    let from = state.z.label(node);
    let (log_probs, mut moved) = gs_weights(state, target, node);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut to = log_probs.len() - 1;
    for (c, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            to = c;
            break;
        }
    }
    let stats = moved.swap_remove(to);
    let mut z = state.z.clone();
    z.set_label(node, to);
    finish(MoveKind::Gs, state, target, z, stats, MovePath::Gs { node, from, to, log_probs }, rng, 0.0)
}

/// How labels are chosen while walking an M3 path.
pub(crate) enum M3Choice<'r, R: Rng + ?Sized> {
    Sample(&'r mut R),
    Replay(&'r [usize]),
}

/// Walks the sequential reassignment of `order` into `{c1, c2}`.
///
/// Nodes outside the two communities keep their labels and are present from
/// the start; each member of `order` joins the sub-network in turn. Returns
/// the chosen labels (aligned with `order`) and per-step log probabilities.
pub(crate) fn m3_walk<R: Rng + ?Sized>(
    target: &Target<'_>,
    base: &Assignment,
    c1: usize,
    c2: usize,
    order: &[usize],
    p: &ConnectivityMatrix,
    mut choice: M3Choice<'_, R>,
) -> (Vec<usize>, Vec<f64>) {
    let k = base.k();
    let n = base.n();
    let mut placed: Vec<Option<usize>> =
        (0..n).map(|i| if base.label(i) == c1 || base.label(i) == c2 { None } else { Some(base.label(i)) }).collect();
    let mut placed_count = vec![0u64; k];
    for l in placed.iter().flatten() {
        placed_count[*l] += 1;
    }
    let ln_p: Vec<f64> = (0..k * k).map(|idx| p.get(idx / k, idx % k).ln()).collect();
    let ln_1mp: Vec<f64> = (0..k * k).map(|idx| (-p.get(idx / k, idx % k)).ln_1p()).collect();

    let mut labels = Vec::with_capacity(order.len());
    let mut steps = Vec::with_capacity(order.len());
    let mut edge_count = vec![0u64; k];
    for (h, &x) in order.iter().enumerate() {
        edge_count.iter_mut().for_each(|e| *e = 0);
        for &j in target.a.neighbors(x) {
            if let Some(l) = placed[j] {
                edge_count[l] += 1;
            }
        }
        let loglik = |c: usize| -> f64 {
            (0..k)
                .map(|other| {
                    let e = edge_count[other] as f64;
                    let m = placed_count[other] as f64;
                    let idx = c * k + other;
                    let mut v = 0.0;
                    if e > 0.0 {
                        v += e * ln_p[idx];
                    }
                    if m - e > 0.0 {
                        v += (m - e) * ln_1mp[idx];
                    }
                    v
                })
                .sum()
        };
        let log_odds = loglik(c1) - loglik(c2) + ((placed_count[c1] + 1) as f64).ln()
            - ((placed_count[c2] + 1) as f64).ln();
        let ln_p1 = ln_sigmoid(log_odds);
        let ln_p2 = ln_sigmoid(-log_odds);
        let pick_first = match &mut choice {
            M3Choice::Sample(rng) => rng.random::<f64>() < ln_p1.exp(),
            M3Choice::Replay(targets) => targets[h] == c1,
        };
        let (label, lp) = if pick_first { (c1, ln_p1) } else { (c2, ln_p2) };
        placed[x] = Some(label);
        placed_count[label] += 1;
        labels.push(label);
        steps.push(lp);
    }
    (labels, steps)
}

/// Applies relabelings one node at a time, keeping `stats` coherent.
fn relabel(target: &Target<'_>, z: &mut Assignment, stats: &mut BlockStats, moves: impl IntoIterator<Item = (usize, usize)>) {
    for (node, to) in moves {
        let from = z.label(node);
        if from == to {
            continue;
        }
        let counts = neighbor_label_counts(target.a, z.labels(), z.k(), node);
        stats.move_node(from, to, &counts);
        z.set_label(node, to);
    }
}

/// M3: pick two communities and reallocate their members sequentially in a
/// shuffled order, each step weighing the likelihood of the node's edges into
/// the sub-network built so far (under the current `P`) against the
/// community sizes.
pub fn move_m3<R: Rng + ?Sized>(state: &ChainState, target: &Target<'_>, rng: &mut R) -> ProposalOutcome {
    let k = state.z.k();
    if k < 2 {
        return ProposalOutcome::Skipped(MoveKind::M3, SkipReason::TooFewCommunities);
    }
    let c1 = rng.random_range(0..k);
    let r = rng.random_range(0..k - 1);
    let c2 = if r < c1 { r } else { r + 1 };
    let mut order: Vec<usize> = (0..state.z.n()).filter(|&i| {
        let l = state.z.label(i);
        l == c1 || l == c2
    }).collect();
    order.shuffle(rng);

    let (new_labels, forward_steps) = m3_walk(target, &state.z, c1, c2, &order, &state.p, M3Choice::Sample(rng));
    let forward_log_prob: f64 = forward_steps.iter().sum();
    let mut z = state.z.clone();
    let mut stats = state.stats.clone();
    relabel(target, &mut z, &mut stats, order.iter().copied().zip(new_labels.iter().copied()));

    let sizes_old = state.stats.sizes();
    let sizes_new = stats.sizes();
    let ln_size_ratio = ln_factorial(sizes_new[c1]) + ln_factorial(sizes_new[c2])
        - ln_factorial(sizes_old[c1])
        - ln_factorial(sizes_old[c2]);
    let ln_beta_ratio = ln_beta_coefficient(&state.stats) - ln_beta_coefficient(&stats);
    let current_labels: Vec<usize> = order.iter().map(|&i| state.z.label(i)).collect();

    let (p_star, ln_q_p) = propose_p(&stats, rng);
    let (_, reverse_steps) = m3_walk::<R>(target, &state.z, c1, c2, &order, &p_star, M3Choice::Replay(&current_labels));
    let reverse_log_prob: f64 = reverse_steps.iter().sum();

    let log_prior_p_ratio = log_prior_p(&p_star, &target.hp) - log_prior_p(&state.p, &target.hp);
    let log_ratio = log_prior_p_ratio + reverse_log_prob - forward_log_prob + ln_size_ratio + ln_beta_ratio;
    ProposalOutcome::Proposed(Proposal {
        kind: MoveKind::M3,
        z,
        p: p_star,
        stats,
        log_ratio,
        log_prior_p_ratio,
        ln_q_p,
        path: MovePath::M3 { c1, c2, order, forward_steps, forward_log_prob, reverse_log_prob },
    })
}

/// Log probability of one split path with the split fraction integrated out:
/// `ln[Γ(n₁+1) Γ(n₂+1) / (K (K+1) Γ(n₁+n₂+2))]`, `K` counted before the split.
pub fn ln_split_path_prob(k_before: usize, stay: u64, moved: u64) -> f64 {
    let kf = k_before as f64;
    ln_factorial(stay) + ln_factorial(moved) - kf.ln() - (kf + 1.0).ln() - ln_factorial(stay + moved + 1)
}

/// AE: with probability ½ merge an ordered pair of communities, otherwise
/// split one community into two.
pub fn move_ae<R: Rng + ?Sized>(state: &ChainState, target: &Target<'_>, rng: &mut R) -> ProposalOutcome {
    let k = state.z.k();
    let n = state.z.n() as f64;
    let kf = k as f64;
    let ln_beta_old = ln_beta_coefficient(&state.stats);
    if rng.random_bool(0.5) {
        if k < 2 {
            return ProposalOutcome::Skipped(MoveKind::Ae, SkipReason::TooFewCommunities);
        }
        let keep = rng.random_range(0..k);
        let r = rng.random_range(0..k - 1);
        let absorbed = if r < keep { r } else { r + 1 };
        let merged_size = state.stats.sizes()[keep] + state.stats.sizes()[absorbed];
        let mut z = state.z.clone();
        for i in state.z.members(absorbed) {
            z.set_label(i, keep);
        }
        z.remove_community(absorbed);
        let mut stats = state.stats.clone();
        stats.merge_into(keep, absorbed);
        stats.remove_empty(absorbed);
        let k_new = kf - 1.0;
        let extra = kf.ln() - k_new.ln() - ln_lambda(target) + (k_new + n).ln() - (merged_size as f64 + 1.0).ln()
            + ln_beta_old
            - ln_beta_coefficient(&stats);
        finish(MoveKind::Ae, state, target, z, stats, MovePath::Merge { keep, absorbed }, rng, extra)
    } else {
        if k + 1 > target.hp.k_max {
            return ProposalOutcome::Skipped(MoveKind::Ae, SkipReason::SplitBeyondKMax);
        }
        let new_position = rng.random_range(0..=k);
        let source = rng.random_range(0..k);
        let split_fraction: f64 = rng.random();
        let mut z = state.z.clone();
        z.insert_community(new_position);
        let mut stats = state.stats.clone();
        stats.insert_empty(new_position);
        let shifted_source = if source < new_position { source } else { source + 1 };
        let members = z.members(shifted_source);
        let mut moved_nodes = Vec::new();
        for &i in &members {
            if rng.random::<f64>() < split_fraction {
                moved_nodes.push((i, new_position));
            }
        }
        let n_source = members.len() as u64;
        let n_moved = moved_nodes.len() as u64;
        relabel(target, &mut z, &mut stats, moved_nodes);
        let ln_path_prob = ln_split_path_prob(k, n_source - n_moved, n_moved);
        let extra = kf.ln() - (kf + 1.0).ln() + ln_lambda(target) + ln_beta_old - ln_beta_coefficient(&stats)
            + (n_source as f64 + 1.0).ln()
            - (kf + n).ln();
        let path = MovePath::Split { source, new_position, split_fraction, ln_path_prob };
        finish(MoveKind::Ae, state, target, z, stats, path, rng, extra)
    }
}

//! Reversible-jump Metropolis–Hastings over `(Z, K, P)`.
//!
//! Each step picks one of four kernels uniformly ([`MoveKind`]), proposes
//! `(Z*, K*)`, redraws `P*` from its Beta proposal, and accepts with the
//! kernel's specialized ratio, all in log space.

mod moves;

pub use moves::{
    ln_proposal_density_p, ln_split_path_prob, move_ae, move_gs, move_m3, move_mk, propose_p, MoveKind, MovePath,
    Proposal, ProposalOutcome, SkipReason,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identify::is_diagonally_dominant;
use crate::inference::effective_k;
use crate::model::{block_stats, log_posterior_from_stats, Assignment, BlockStats, ConnectivityMatrix, Hyperparams};
use crate::netgen::AdjacencyMatrix;

/// The generator driving every chain.
pub type ChainRng = ChaCha8Rng;

/// Observed network plus prior hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub a: &'a AdjacencyMatrix,
    pub hp: Hyperparams,
}

impl<'a> Target<'a> {
    pub fn new(a: &'a AdjacencyMatrix, hp: Hyperparams) -> Self {
        Self { a, hp }
    }

    pub fn log_posterior(&self, stats: &BlockStats, p: &ConnectivityMatrix) -> f64 {
        log_posterior_from_stats(stats, p, &self.hp).expect("state dimensions agree")
    }
}

/// Current `(Z, K, P)` with cached block statistics and log posterior.
/// `K` is `z.k()` and may count empty communities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Assignment,
    pub p: ConnectivityMatrix,
    pub stats: BlockStats,
    pub log_post: f64,
}

impl ChainState {
    pub fn new(target: &Target<'_>, z: Assignment, p: ConnectivityMatrix) -> Result<Self> {
        if z.k() != p.k() {
            return Err(Error::DimensionMismatch { expected: z.k(), got: p.k() });
        }
        let stats = block_stats(target.a, &z)?;
        let log_post = target.log_posterior(&stats, &p);
        Ok(Self { z, p, stats, log_post })
    }

    pub fn k(&self) -> usize {
        self.z.k()
    }

    /// Compares the caches with a from-scratch evaluation.
    pub fn audit(&self, target: &Target<'_>, tol: f64) -> std::result::Result<(), String> {
        let fresh = block_stats(target.a, &self.z).map_err(|e| e.to_string())?;
        if fresh != self.stats {
            return Err("cached block statistics differ from recomputation".into());
        }
        let lp = crate::model::log_posterior(target.a, &self.z, &self.p, &target.hp).map_err(|e| e.to_string())?;
        if !lp.is_finite() || (lp - self.log_post).abs() > tol {
            return Err(format!("cached log posterior {} differs from recomputed {}", self.log_post, lp));
        }
        Ok(())
    }
}

/// Chain length, seed and prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainConfig {
    pub n_keep: usize,
    pub n_burn: usize,
    pub seed: u64,
    #[serde(skip)]
    pub hp: Hyperparams,
    /// Keep a copy of `P` with every draw.
    pub record_p: bool,
}

impl ChainConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n_keep: 20_000, n_burn: 10_000, seed, hp: Hyperparams::for_nodes(n), record_p: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_keep < 1 {
            return Err(Error::InvalidArgument("n_keep must be at least 1".into()));
        }
        self.hp.validate()
    }
}

/// Proposed / accepted tallies for one kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub k_eff: usize,
    pub z: Assignment,
    pub p: Option<ConnectivityMatrix>,
}

/// Retained draws and per-kernel acceptance tallies (indexed by
/// [`MoveKind::index`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub draws: Vec<Draw>,
    pub accept_counts: [MoveTally; 4],
}

impl Trace {
    pub fn tally(&self, kind: MoveKind) -> MoveTally {
        self.accept_counts[kind.index()]
    }

    /// `iter k_eff z_1 … z_n` per draw, one-based labels.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (iter, d) in self.draws.iter().enumerate() {
            let _ = write!(out, "{} {}", iter + 1, d.k_eff);
            for l in d.z.labels() {
                let _ = write!(out, " {}", l + 1);
            }
            out.push('\n');
        }
        out
    }
}

/// Result of one sampler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub kind: MoveKind,
    pub accepted: bool,
}

/// Initial state: `K = 2` (capped by `k_max`), labels uniform, `P` drawn
/// from its Beta proposal until it is diagonally dominant with gap
/// `delta`. After 1000 failed draws the diagonal is set to 0.75 and the
/// off-diagonals to 0.25.
pub fn init_state<R: Rng + ?Sized>(a: &AdjacencyMatrix, hp: &Hyperparams, rng: &mut R) -> Result<ChainState> {
    let n = a.n();
    if n < 2 {
        return Err(Error::TooFewNodes { nodes: n, k: 1 });
    }
    let target = Target::new(a, *hp);
    let k = hp.k_max.min(2);
    let z = Assignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k)?;
    let stats = block_stats(a, &z)?;
    for _ in 0..1000 {
        let (p, _) = propose_p(&stats, rng);
        if is_diagonally_dominant(&p, hp.delta) {
            let log_post = target.log_posterior(&stats, &p);
            if log_post.is_finite() {
                return Ok(ChainState { z, p, stats, log_post });
            }
        }
    }
    let p = ConnectivityMatrix::constant(k, 0.75, 0.25)?;
    let log_post = target.log_posterior(&stats, &p);
    Ok(ChainState { z, p, stats, log_post })
}

/// Runs the kernel for `kind` without deciding acceptance.
pub fn propose<R: Rng + ?Sized>(kind: MoveKind, state: &ChainState, target: &Target<'_>, rng: &mut R) -> ProposalOutcome {
    match kind {
        MoveKind::Mk => move_mk(state, target, rng),
        MoveKind::Gs => move_gs(state, target, rng),
        MoveKind::M3 => move_m3(state, target, rng),
        MoveKind::Ae => move_ae(state, target, rng),
    }
}

/// One Metropolis–Hastings step with a uniformly chosen kernel. A rejected
/// or skipped proposal leaves `state` untouched.
pub fn step<R: Rng + ?Sized>(state: &mut ChainState, target: &Target<'_>, rng: &mut R) -> StepRecord {
    let kind = MoveKind::ALL[rng.random_range(0..4)];
    let outcome = propose(kind, state, target, rng);
    let accepted = match outcome {
        ProposalOutcome::Skipped(..) => false,
        ProposalOutcome::Proposed(prop) => {
            let u: f64 = rng.random();
            if u.ln() < prop.log_accept_prob() {
                let log_post = target.log_posterior(&prop.stats, &prop.p);
                debug_assert!(log_post.is_finite(), "accepted a zero-density state");
                *state = ChainState { z: prop.z, p: prop.p, stats: prop.stats, log_post };
                true
            } else {
                false
            }
        }
    };
    StepRecord { kind, accepted }
}

/// A chain bound to its target and generator.
pub struct Chain<'a> {
    pub target: Target<'a>,
    pub state: ChainState,
    pub rng: ChainRng,
    pub accept_counts: [MoveTally; 4],
}

impl<'a> Chain<'a> {
    pub fn new(a: &'a AdjacencyMatrix, hp: Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = ChainRng::seed_from_u64(seed);
        let state = init_state(a, &hp, &mut rng)?;
        Ok(Self { target: Target::new(a, hp), state, rng, accept_counts: [MoveTally::default(); 4] })
    }

    pub fn step(&mut self) -> StepRecord {
        let record = step(&mut self.state, &self.target, &mut self.rng);
        let tally = &mut self.accept_counts[record.kind.index()];
        tally.proposed += 1;
        tally.accepted += u64::from(record.accepted);
        record
    }
}

/// Initializes, discards `n_burn` steps, then records `n_keep` draws.
pub fn run_chain(a: &AdjacencyMatrix, config: &ChainConfig) -> Result<Trace> {
    config.validate()?;
    let mut chain = Chain::new(a, config.hp, config.seed)?;
    for _ in 0..config.n_burn {
        chain.step();
    }
    let mut draws = Vec::with_capacity(config.n_keep);
    for _ in 0..config.n_keep {
        chain.step();
        let z = chain.state.z.clone();
        draws.push(Draw {
            k_eff: effective_k(&z),
            z,
            p: config.record_p.then(|| chain.state.p.clone()),
        });
    }
    Ok(Trace { draws, accept_counts: chain.accept_counts })
}

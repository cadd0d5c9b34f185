//! Seeded experiment runner behind the command-line tool: network
//! generation, single-network fits, replicated simulations and ARI between
//! label files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{ari_labels, bias_rmse, mean_ari, posterior_mode_k, posterior_mode_z};
use crate::math::derive_seed;
use crate::model::{Assignment, Hyperparams};
use crate::netgen::{generate_sbm, AdjacencyMatrix, GroundTruth};
use crate::sampler::{run_chain, ChainConfig, MoveKind, MoveTally, Trace};

/// Desk-scale burn-in used unless overridden.
pub const DEFAULT_BURN: usize = 5_000;
/// Desk-scale retained draws used unless overridden.
pub const DEFAULT_KEEP: usize = 10_000;

/// One simulation cell plus chain lengths, seed and prior overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub case_id: u32,
    pub k0: usize,
    pub n: usize,
    pub rho: f64,
    pub replicates: usize,
    pub n_keep: usize,
    pub n_burn: usize,
    pub master_seed: u64,
    pub delta: Option<f64>,
    pub k_max: Option<usize>,
    pub lambda: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case_id: 1,
            k0: 3,
            n: 50,
            rho: 1.0,
            replicates: 20,
            n_keep: DEFAULT_KEEP,
            n_burn: DEFAULT_BURN,
            master_seed: 1,
            delta: None,
            k_max: None,
            lambda: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file over the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    /// Sets one field by its configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| invalid(format!("bad value `{value}` for `{key}`: {e}")))
        }
        match key {
            "case" => self.case_id = num(key, value)?,
            "k0" => self.k0 = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "keep" => self.n_keep = num(key, value)?,
            "burn" => self.n_burn = num(key, value)?,
            "seed" => self.master_seed = num(key, value)?,
            "delta" => self.delta = Some(num(key, value)?),
            "kmax" => self.k_max = Some(num(key, value)?),
            "lambda" => self.lambda = Some(num(key, value)?),
            _ => return Err(invalid(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.case_id) {
            return Err(Error::UnknownCase(self.case_id));
        }
        if self.k0 < 1 {
            return Err(invalid("k0 must be at least 1"));
        }
        if self.n < 2 * self.k0 {
            return Err(Error::TooFewNodes { nodes: self.n, k: self.k0 });
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if self.replicates < 1 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.n_keep < 1 {
            return Err(invalid("keep must be at least 1"));
        }
        self.hyperparams().map(|_| ())
    }

    /// Defaults for `n` nodes with any overrides applied.
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        hyperparams_for(self.n, self.delta, self.k_max, self.lambda)
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        GroundTruth::benchmark(self.case_id, self.k0, self.n, self.rho)
    }

    /// Seed of replicate `r`, used to generate its network.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        derive_seed(self.master_seed, r as u64)
    }
}

/// Chain seed paired with a network seed.
pub fn chain_seed(network_seed: u64) -> u64 {
    derive_seed(network_seed, u64::MAX)
}

fn hyperparams_for(n: usize, delta: Option<f64>, k_max: Option<usize>, lambda: Option<f64>) -> Result<Hyperparams> {
    let mut hp = Hyperparams::for_nodes(n);
    if let Some(d) = delta {
        hp.delta = d;
    }
    if let Some(k) = k_max {
        hp.k_max = k;
    }
    if let Some(l) = lambda {
        hp.lambda = l;
    }
    hp.validate()?;
    Ok(hp)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), msg: e.to_string() }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn format_row(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(" ")
}

/// Writes one edge-list file per replicate into `dir`, plus `manifest.txt`
/// listing the seeds and the ground truth. Returns the network paths.
pub fn cmd_generate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let truth = config.truth()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let width = (config.replicates - 1).to_string().len().max(3);
    let mut manifest = String::new();
    let _ = writeln!(manifest, "case {}", config.case_id);
    let _ = writeln!(manifest, "k0 {}", config.k0);
    let _ = writeln!(manifest, "n {}", config.n);
    let _ = writeln!(manifest, "rho {}", config.rho);
    let _ = writeln!(manifest, "master_seed {}", config.master_seed);
    let mut paths = Vec::with_capacity(config.replicates);
    for r in 0..config.replicates {
        let seed = config.replicate_seed(r);
        let name = format!("network_{r:0width$}.txt");
        let path = dir.join(&name);
        let a = generate_sbm(&truth, config.n, seed)?;
        write_text(&path, &a.to_edge_list())?;
        let _ = writeln!(manifest, "replicate {r} seed {seed} file {name}");
        paths.push(path);
    }
    let _ = writeln!(manifest, "z0");
    let _ = writeln!(manifest, "{}", format_row(truth.z0.one_based().iter().map(|l| l.to_string())));
    let _ = writeln!(manifest, "p0");
    for row in truth.p0.rows() {
        let _ = writeln!(manifest, "{}", format_row(row.iter().map(|v| v.to_string())));
    }
    write_text(&dir.join("manifest.txt"), &manifest)?;
    Ok(paths)
}

/// Options of a single-network fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub n_keep: usize,
    pub n_burn: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub k_max: Option<usize>,
    pub lambda: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_keep: DEFAULT_KEEP, n_burn: DEFAULT_BURN, seed: 1, delta: None, k_max: None, lambda: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveRate {
    pub kind: &'static str,
    pub proposed: u64,
    pub accepted: u64,
    pub rate: f64,
}

/// Posterior summary of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub seed: u64,
    pub n_burn: usize,
    pub n_keep: usize,
    pub mode_k: usize,
    /// One-based canonical labels of the modal partition.
    pub partition: Vec<usize>,
    pub acceptance: Vec<MoveRate>,
    #[serde(skip)]
    pub trace: Trace,
}

impl FitReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.n);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "burn {}", self.n_burn);
        let _ = writeln!(out, "keep {}", self.n_keep);
        let _ = writeln!(out, "mode_k {}", self.mode_k);
        let _ = writeln!(out, "partition {}", format_row(self.partition.iter().map(|l| l.to_string())));
        for m in &self.acceptance {
            let _ = writeln!(out, "accept {} {:.6} ({}/{})", m.kind, m.rate, m.accepted, m.proposed);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn cmd_fit(a: &AdjacencyMatrix, options: &FitOptions) -> Result<FitReport> {
    if a.n() < 2 {
        return Err(Error::TooFewNodes { nodes: a.n(), k: 1 });
    }
    let config = ChainConfig {
        n_keep: options.n_keep,
        n_burn: options.n_burn,
        seed: options.seed,
        hp: hyperparams_for(a.n(), options.delta, options.k_max, options.lambda)?,
        record_p: false,
    };
    let trace = run_chain(a, &config)?;
    let acceptance = MoveKind::ALL
        .iter()
        .map(|&kind| {
            let MoveTally { proposed, accepted } = trace.tally(kind);
            MoveRate { kind: kind.name(), proposed, accepted, rate: trace.tally(kind).rate() }
        })
        .collect();
    Ok(FitReport {
        n: a.n(),
        seed: options.seed,
        n_burn: options.n_burn,
        n_keep: options.n_keep,
        mode_k: posterior_mode_k(&trace)?,
        partition: posterior_mode_z(&trace)?.one_based(),
        acceptance,
        trace,
    })
}

pub fn fit_file(path: &Path, options: &FitOptions) -> Result<FitReport> {
    cmd_fit(&AdjacencyMatrix::parse_edge_list(&read_text(path)?)?, options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed: u64,
    pub k_hat: usize,
    pub mean_ari: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicateResult>,
    pub bias: f64,
    pub rmse: f64,
    pub mean_ari: f64,
}

impl Simulation {
    pub fn results_csv(&self) -> String {
        let mut out = String::from("replicate,seed,k_hat,mean_ari\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6}", r.replicate, r.seed, r.k_hat, r.mean_ari);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let c = &self.config;
        format!(
            "case,k0,n,rho,replicates,bias,rmse,mean_ari\n{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            c.case_id, c.k0, c.n, c.rho, c.replicates, self.bias, self.rmse, self.mean_ari
        )
    }

    /// Writes `results.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_text(&dir.join("results.csv"), &self.results_csv())?;
        write_text(&dir.join("summary.csv"), &self.summary_csv())
    }
}

fn run_replicate(config: &ExperimentConfig, truth: &GroundTruth, hp: Hyperparams, r: usize) -> Result<ReplicateResult> {
    let seed = config.replicate_seed(r);
    let a = generate_sbm(truth, config.n, seed)?;
    let chain = ChainConfig { n_keep: config.n_keep, n_burn: config.n_burn, seed: chain_seed(seed), hp, record_p: false };
    let trace = run_chain(&a, &chain)?;
    Ok(ReplicateResult { replicate: r, seed, k_hat: posterior_mode_k(&trace)?, mean_ari: mean_ari(&trace, &truth.z0)? })
}

/// Runs every replicate (in parallel) and aggregates bias, RMSE and mean ARI.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate()?;
    let truth = config.truth()?;
    let hp = config.hyperparams()?;
    let rows: Vec<ReplicateResult> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, &truth, hp, r))
        .collect::<Result<_>>()?;
    let ks: Vec<usize> = rows.iter().map(|r| r.k_hat).collect();
    let (bias, rmse) = bias_rmse(&ks, config.k0)?;
    let mean_ari = rows.iter().map(|r| r.mean_ari).sum::<f64>() / rows.len() as f64;
    Ok(Simulation { config: config.clone(), rows, bias, rmse, mean_ari })
}

/// Reads whitespace-separated integer labels.
pub fn parse_labels(text: &str) -> Result<Assignment> {
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: i64 =
                tok.parse().map_err(|_| Error::Parse { line: idx + 1, msg: format!("non-integer label `{tok}`") })?;
            let next = ids.len();
            labels.push(*ids.entry(v).or_insert(next));
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    Ok(Assignment::from_labels(labels))
}

pub fn cmd_ari(left: &Path, right: &Path) -> Result<f64> {
    let a = parse_labels(&read_text(left)?)?;
    let b = parse_labels(&read_text(right)?)?;
    ari_labels(a.labels(), b.labels())
}

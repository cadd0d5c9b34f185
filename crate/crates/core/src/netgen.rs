//! Synthetic SBM networks, the four benchmark connectivity designs and the
//! plain-text edge-list format.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Assignment, ConnectivityMatrix};

/// Symmetric binary adjacency matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        Self { n, bits: vec![false; n * n], neighbors: vec![Vec::new(); n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                a.insert(i, j);
            }
        }
        a
    }

    /// Builds from zero-based unordered pairs. Duplicates are ignored;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            if !a.has_edge(i, j) {
                a.insert(i, j);
            }
        }
        for list in &mut a.neighbors {
            list.sort_unstable();
        }
        Ok(a)
    }

    fn insert(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
        self.bits[j * self.n + i] = true;
        self.neighbors[i].push(j);
        self.neighbors[j].push(i);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> u8 {
        u8::from(self.has_edge(i, j))
    }

    /// Neighbours of `i` in increasing order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i].iter().copied().filter(move |&j| j > i).map(move |j| (i, j))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `n <count>` header followed by one-based `i j` lines, `i < j`, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }

    /// Reads the edge-list format back. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: line_no, msg };
            let mut tokens = line.split_whitespace();
            match n {
                None => {
                    if tokens.next() != Some("n") {
                        return Err(parse_err("expected header `n <count>`".into()));
                    }
                    let count = tokens
                        .next()
                        .ok_or_else(|| parse_err("missing node count".into()))?
                        .parse::<usize>()
                        .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                    if tokens.next().is_some() {
                        return Err(parse_err("trailing tokens after node count".into()));
                    }
                    n = Some(count);
                }
                Some(count) => {
                    let mut endpoint = || -> Result<usize> {
                        let tok = tokens.next().ok_or_else(|| parse_err("expected two node indices".into()))?;
                        let v = tok.parse::<usize>().map_err(|e| parse_err(format!("bad node index `{tok}`: {e}")))?;
                        if v == 0 || v > count {
                            return Err(parse_err(format!("node index {v} outside 1..={count}")));
                        }
                        Ok(v - 1)
                    };
                    let i = endpoint()?;
                    let j = endpoint()?;
                    if tokens.next().is_some() {
                        return Err(parse_err("trailing tokens after edge".into()));
                    }
                    if i == j {
                        return Err(parse_err(format!("self-loop at node {}", i + 1)));
                    }
                    edges.push((i.min(j), i.max(j)));
                }
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing header `n <count>`".into() })?;
        Self::from_edges(n, &edges)
    }
}

/// Generating parameters of a synthetic network.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub z0: Assignment,
    pub p0: ConnectivityMatrix,
    pub rho: f64,
    pub k0: usize,
}

impl GroundTruth {
    pub fn new(z0: Assignment, p0: ConnectivityMatrix, rho: f64) -> Result<Self> {
        if z0.k() != p0.k() {
            return Err(Error::DimensionMismatch { expected: z0.k(), got: p0.k() });
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
        }
        if let Some(c) = z0.block_sizes().iter().position(|&s| s < 2) {
            return Err(Error::InvalidArgument(format!("community {} has fewer than two nodes", c + 1)));
        }
        p0.scaled(rho)?;
        let k0 = z0.k();
        Ok(Self { z0, p0, rho, k0 })
    }

    /// Benchmark design `case_id` with balanced round-robin communities.
    pub fn benchmark(case_id: u32, k0: usize, n: usize, rho: f64) -> Result<Self> {
        Self::new(balanced_assignment(n, k0)?, make_case(case_id, k0)?, rho)
    }

    /// `ρ P⁰`, the connectivity matrix actually used for generation.
    pub fn effective_p(&self) -> ConnectivityMatrix {
        self.p0.scaled(self.rho).expect("validated at construction")
    }
}

/// Draws each pair `i < j` independently as Bernoulli(`ρ P⁰_{Z₀(i) Z₀(j)}`).
/// Pairs consume one uniform each in row-major order.
pub fn generate_sbm(truth: &GroundTruth, n: usize, seed: u64) -> Result<AdjacencyMatrix> {
    if truth.z0.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: truth.z0.n() });
    }
    let p = truth.p0.scaled(truth.rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        let zi = truth.z0.label(i);
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < p.get(zi, truth.z0.label(j)) {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, &edges)
}

/// Benchmark connectivity matrices, with `J` the all-ones matrix and
/// `h = ⌈k0/2⌉`:
///
/// 1. `0.6 I + 0.2 J`
/// 2. `0.2 I + 0.6 J`
/// 3. `0.4 I + 0.4 J`
/// 4. `0.2 I + 0.2 J + 0.4 1_h 1_hᵀ` (diagonal 0.4 past index `h`)
pub fn make_case(case_id: u32, k0: usize) -> Result<ConnectivityMatrix> {
    if k0 < 1 {
        return Err(Error::InvalidArgument("k0 must be at least 1".into()));
    }
    let (ident, ones, head) = match case_id {
        1 => (0.6, 0.2, 0.0),
        2 => (0.2, 0.6, 0.0),
        3 => (0.4, 0.4, 0.0),
        4 => (0.2, 0.2, 0.4),
        other => return Err(Error::UnknownCase(other)),
    };
    let h = k0.div_ceil(2);
    let mut entries = Vec::with_capacity(k0 * k0);
    for a in 0..k0 {
        for b in 0..k0 {
            let mut v = ones;
            if a == b {
                v += ident;
            }
            if a < h && b < h {
                v += head;
            }
            entries.push(v);
        }
    }
    ConnectivityMatrix::new(k0, entries)
}

/// Round-robin labels: node `i` joins community `i mod k0`.
pub fn balanced_assignment(n: usize, k0: usize) -> Result<Assignment> {
    if k0 == 0 {
        return Err(Error::InvalidArgument("k0 must be at least 1".into()));
    }
    if n < 2 * k0 {
        return Err(Error::TooFewNodes { nodes: n, k: k0 });
    }
    Assignment::new((0..n).map(|i| i % k0).collect(), k0)
}

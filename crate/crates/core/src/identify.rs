//! Recovering `(K, Z, P)` from node-wise connection probabilities.
//!
//! Under diagonal dominance every node connects to members of its own
//! community with the highest probability, so the set of argmax partners of
//! each node is exactly its community (minus itself).

use crate::error::{Error, Result};
use crate::model::{Assignment, ConnectivityMatrix};

/// Symmetric `n × n` node-wise probabilities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProbMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl NodeProbMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at node {i}")));
            }
            for j in (i + 1)..n {
                let v = entries[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange { row: i, col: j, value: v });
                }
                if v != entries[j * n + i] {
                    return Err(Error::InvalidArgument(format!("asymmetric entry at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds from the strict upper triangle given by `f(i, j)` for `i < j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Applies a node permutation: entry `(perm[i], perm[j])` of the result
    /// equals entry `(i, j)` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: perm.len() });
        }
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[perm[i] * n + perm[j]] = self.get(i, j);
            }
        }
        Self::new(n, entries)
    }
}

/// `θ = T(Z P Zᵀ)`: `θ_ij = P_{Z(i) Z(j)}` off the diagonal.
pub fn theta_from(z: &Assignment, p: &ConnectivityMatrix) -> Result<NodeProbMatrix> {
    if let Some(&label) = z.labels().iter().find(|&&l| l >= p.k()) {
        return Err(Error::LabelOutOfRange { label, k: p.k() });
    }
    NodeProbMatrix::from_upper(z.n(), |i, j| p.get(z.label(i), z.label(j)))
}

/// Whether every diagonal entry exceeds its row's largest off-diagonal entry
/// by strictly more than `delta`.
pub fn is_diagonally_dominant(p: &ConnectivityMatrix, delta: f64) -> bool {
    let k = p.k();
    (0..k).all(|a| {
        let row_max = (0..k).filter(|&b| b != a).map(|b| p.get(a, b)).fold(f64::NEG_INFINITY, f64::max);
        row_max == f64::NEG_INFINITY || p.get(a, a) > delta + row_max
    })
}

/// Output of [`recover`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub k: usize,
    pub z: Assignment,
    pub p: ConnectivityMatrix,
}

/// Groups nodes by mutual near-argmax membership.
///
/// For node `i`, `C_i = {j ≠ i : θ_ij ≥ max_l θ_il − tol}`. Nodes `i, j`
/// share a community iff `j ∈ C_i` and `i ∈ C_j`. Communities are labelled in
/// order of their smallest member. `P` is read back as the block mean of `θ`
/// (exact when `tol = 0` and `θ` is block constant).
///
/// Fails when some `C_i ∪ {i}` straddles a recovered community (neither
/// nested in nor disjoint from it), or when a community is a singleton.
pub fn recover(theta: &NodeProbMatrix, tol: f64) -> Result<Recovered> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {tol}")));
    }
    let n = theta.n();
    if n < 2 {
        return Err(Error::TooFewNodes { nodes: n, k: 1 });
    }
    let near_max: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            let max = (0..n).filter(|&j| j != i).map(|j| theta.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
            (0..n).map(|j| j == i || theta.get(i, j) >= max - tol).collect()
        })
        .collect();

    let mut labels = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if labels[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| labels[j] == usize::MAX && near_max[i][j] && near_max[j][i])
            .collect();
        for &j in &members {
            labels[j] = groups.len();
        }
        groups.push(members);
    }

    for group in &groups {
        for &a in group {
            for &b in group {
                if !(near_max[a][b] && near_max[b][a]) {
                    return Err(Error::InconsistentGrouping { node: a });
                }
            }
        }
    }
    for i in 0..n {
        for group in &groups {
            let inside = group.iter().filter(|&&j| near_max[i][j]).count();
            let set_size = near_max[i].iter().filter(|&&b| b).count();
            let disjoint = inside == 0;
            let set_in_group = inside == set_size;
            let group_in_set = inside == group.len();
            if !(disjoint || set_in_group || group_in_set) {
                return Err(Error::InconsistentGrouping { node: i });
            }
        }
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::SingletonCommunity { node: g[0] });
    }

    let k = groups.len();
    let mut p = ConnectivityMatrix::zeros(k);
    for a in 0..k {
        for b in a..k {
            let pairs = groups[a]
                .iter()
                .flat_map(|&i| groups[b].iter().map(move |&j| (i, j)))
                .filter(|&(i, j)| i != j);
            let value = if tol == 0.0 {
                let (i, j) = pairs.clone().next().expect("groups have at least two members");
                theta.get(i, j)
            } else {
                let (sum, count) = pairs.fold((0.0, 0usize), |(s, c), (i, j)| (s + theta.get(i, j), c + 1));
                sum / count as f64
            };
            p.set_sym(a, b, value);
        }
    }
    Ok(Recovered { k, z: Assignment::new(labels, k)?, p })
}

/// `max_{i<j} |θ¹_ij − θ²_ij|`.
pub fn sup_norm(theta1: &NodeProbMatrix, theta2: &NodeProbMatrix) -> Result<f64> {
    if theta1.n() != theta2.n() {
        return Err(Error::DimensionMismatch { expected: theta1.n(), got: theta2.n() });
    }
    let n = theta1.n();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max((theta1.get(i, j) - theta2.get(i, j)).abs());
        }
    }
    Ok(best)
}

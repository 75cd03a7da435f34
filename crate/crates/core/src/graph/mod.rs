//! Network data model: the attributed social network, teams, and the dense
//! per-team views the kernels and metrics work on.

mod io;
mod synth;

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::Csr;

pub use io::{load_names, load_network, load_teams, save_network, save_teams};
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticData};

/// Weighted undirected network with a non-negative node feature matrix.
///
/// Both matrices are stored sparse; immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    adjacency: Csr,
    features: Csr,
    node_names: BTreeMap<usize, String>,
}

impl SocialNetwork {
    pub fn new(adjacency: Csr, features: Csr) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(Error::Validation(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.cols()
            )));
        }
        if features.rows() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows, adjacency has {n}",
                features.rows()
            )));
        }
        if let Some((r, c, v)) = adjacency.iter().find(|&(_, _, v)| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("edge ({r},{c}) has invalid weight {v}")));
        }
        if let Some((r, c, v)) = features.iter().find(|&(_, _, v)| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("feature ({r},{c}) has invalid value {v}")));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::Validation("adjacency is not symmetric".into()));
        }
        Ok(SocialNetwork {
            adjacency,
            features,
            node_names: BTreeMap::new(),
        })
    }

    pub fn with_names(mut self, names: BTreeMap<usize, String>) -> Result<Self> {
        if let Some(&id) = names.keys().find(|&&id| id >= self.n()) {
            return Err(Error::Validation(format!("named node {id} out of range")));
        }
        self.node_names = names;
        Ok(self)
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn features(&self) -> &Csr {
        &self.features
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.node_names.get(&id).map(String::as_str)
    }

    pub fn node_names(&self) -> &BTreeMap<usize, String> {
        &self.node_names
    }

    /// Same adjacency, features restricted to `cols` in the given order.
    pub fn with_feature_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.d()) {
            return Err(Error::Validation(format!("feature column {c} out of range")));
        }
        Ok(SocialNetwork {
            adjacency: self.adjacency.clone(),
            features: self.features.select_columns(cols),
            node_names: self.node_names.clone(),
        })
    }
}

/// A set of node ids, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Team {
    members: Vec<usize>,
}

impl Team {
    /// Sorts and deduplicates `ids`; rejects empty sets and ids `>= n`.
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::Validation("team has no members".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= n) {
            return Err(Error::Validation(format!("node {bad} out of range (n = {n})")));
        }
        Ok(Team { members: ids })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn is_subset_of(&self, other: &Team) -> bool {
        self.members.iter().all(|&m| other.contains(m))
    }

    /// Members of `self` not in `other`, or `None` if nothing remains.
    pub fn difference(&self, other: &Team) -> Option<Team> {
        let rest: Vec<usize> = self
            .members
            .iter()
            .copied()
            .filter(|&m| !other.contains(m))
            .collect();
        (!rest.is_empty()).then_some(Team { members: rest })
    }

    pub fn union(&self, other: &Team) -> Team {
        let mut all = self.members.clone();
        all.extend_from_slice(&other.members);
        all.sort_unstable();
        all.dedup();
        Team { members: all }
    }
}

/// Dense view of one team: `A[T,T]` and `X[T,:]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamGraph {
    pub adjacency: Array2<f64>,
    pub features: Array2<f64>,
    pub origin_ids: Vec<usize>,
}

impl TeamGraph {
    pub fn len(&self) -> usize {
        self.origin_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin_ids.is_empty()
    }
}

pub fn induced_subgraph(net: &SocialNetwork, members: &Team) -> TeamGraph {
    let ids = members.members();
    let all_cols: Vec<usize> = (0..net.d()).collect();
    TeamGraph {
        adjacency: net.adjacency.select_dense(ids, ids),
        features: net.features.select_dense(ids, &all_cols),
        origin_ids: ids.to_vec(),
    }
}

/// Symmetric GCN normalization `D̃^{-1/2}(A+I)D̃^{-1/2}` with `D̃` the degree
/// of `A+I`. Self-loops exist only in the returned matrix.
pub fn normalize_adjacency(net: &SocialNetwork) -> Csr {
    let a = &net.adjacency;
    let n = a.rows();
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|s| 1.0 / (s + 1.0).sqrt())
        .collect();
    let mut t: Vec<(usize, usize, f64)> = a
        .iter()
        .map(|(r, c, v)| (r, c, v * inv_sqrt[r] * inv_sqrt[c]))
        .collect();
    t.extend((0..n).map(|i| (i, i, inv_sqrt[i] * inv_sqrt[i])));
    Csr::from_triplets(n, n, t, |x, y| x + y)
}

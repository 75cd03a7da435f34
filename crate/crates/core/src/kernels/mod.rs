//! Similarity measures between small labeled graphs.

mod baseline;
mod ged;
mod marginalized;
mod random_walk;
mod shortest_path;

pub use baseline::{baseline_decay, kernel_baseline_over, kernel_baseline_replace};
pub use ged::{graph_edit_distance, GED_MAX_NODES};
pub use marginalized::marginalized_kernel;
pub use random_walk::{random_walk_kernel, rw_guard};
pub use shortest_path::{floyd_warshall, shortest_path_kernel, SP_MAX_NODES};

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TeamGraph;

/// Weighted adjacency plus one label row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    adjacency: Array2<f64>,
    labels: Array2<f64>,
}

impl LabeledGraph {
    pub fn new(adjacency: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || labels.nrows() != n {
            return Err(Error::Validation(format!(
                "adjacency {:?} and labels {:?} do not describe one graph",
                adjacency.dim(),
                labels.dim()
            )));
        }
        if adjacency.iter().chain(labels.iter()).any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Validation("graph entries must be finite and non-negative".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if adjacency[[i, j]] != adjacency[[j, i]] {
                    return Err(Error::Validation(format!("adjacency not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(LabeledGraph { adjacency, labels })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn d(&self) -> usize {
        self.labels.ncols()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn labels(&self) -> &Array2<f64> {
        &self.labels
    }

    pub(crate) fn degrees(&self) -> Vec<f64> {
        self.adjacency.rows().into_iter().map(|r| r.sum()).collect()
    }
}

impl From<&TeamGraph> for LabeledGraph {
    fn from(t: &TeamGraph) -> Self {
        // TeamGraph is cut from a validated network, so the checks hold.
        LabeledGraph {
            adjacency: t.adjacency.clone(),
            labels: t.features.clone(),
        }
    }
}

/// Parameters shared by the walk-based kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Random-walk decay `a`.
    pub decay: f64,
    /// Per-step stopping probability of the marginalized kernel's walks.
    pub termination: f64,
    /// Terms of the truncated power series used for cross-checks.
    pub series_terms: usize,
    /// Relative accuracy target of the iterative solves.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            decay: 0.1,
            termination: 0.5,
            series_terms: 50,
            tolerance: 1e-14,
            max_iterations: 100_000,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::Validation(format!("decay must be positive, got {}", self.decay)));
        }
        if !(self.termination > 0.0 && self.termination < 1.0) {
            return Err(Error::Validation(format!(
                "termination probability must lie in (0,1), got {}",
                self.termination
            )));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Validation("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

fn check_pair(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<()> {
    if g1.n() == 0 || g2.n() == 0 {
        return Err(Error::Contract("kernels need non-empty graphs".into()));
    }
    if g1.d() != g2.d() {
        return Err(Error::Contract(format!("label widths differ: {} vs {}", g1.d(), g2.d())));
    }
    Ok(())
}

/// `L1·L2ᵀ`: label dot products between every node pair.
fn label_products(g1: &LabeledGraph, g2: &LabeledGraph) -> Array2<f64> {
    g1.labels.dot(&g2.labels.t())
}

/// Iterates `u ← b + M(u)` for a non-negative operator `M` whose weighted
/// sup-norm `max (M w)/w` is at most `q < 1`. The error then satisfies
/// `|e_i| ≤ w_i·q/(1-q)·|Δ|_w`; iteration stops once that is below
/// `tolerance·max|u|` for every entry.
fn solve_fixed_point(
    b: &Array2<f64>,
    apply: impl Fn(&Array2<f64>) -> Array2<f64>,
    w: &Array2<f64>,
    q: f64,
    cfg: &KernelConfig,
) -> Result<Array2<f64>> {
    let wnorm = |v: &Array2<f64>| Zip::from(v).and(w).fold(0.0f64, |m, &x, &wi| m.max(x.abs() / wi));
    let w_max = w.fold(0.0f64, |m, &v| m.max(v));
    let mut u = b.clone();
    if q == 0.0 {
        return Ok(u);
    }
    for _ in 0..cfg.max_iterations {
        let next = b + &apply(&u);
        let delta = wnorm(&(&next - &u));
        u = next;
        let scale = u.fold(0.0f64, |m, &v| m.max(v.abs()));
        if delta == 0.0 || q / (1.0 - q) * delta * w_max <= cfg.tolerance * scale {
            return Ok(u);
        }
    }
    Err(Error::Convergence(format!(
        "fixed-point solve did not settle within {} iterations (contraction bound {q:.6})",
        cfg.max_iterations
    )))
}

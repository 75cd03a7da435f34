//! Plain-Vec scoring and enumeration for checking the replacement search.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use subteam_core::encoder::ClusterModel;
use subteam_core::graph::Team;

fn mean(z: &Array2<f64>, rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; z.ncols()];
    for &r in rows {
        for (acc, v) in m.iter_mut().zip(z.row(r)) {
            *acc += v;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

/// Cosine between the mean of `rest` and the mean of `set`.
pub fn score(z: &Array2<f64>, rest: &[usize], set: &[usize]) -> f64 {
    let (r, g) = (mean(z, rest), mean(z, set));
    let dot: f64 = r.iter().zip(&g).map(|(a, b)| a * b).sum();
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nr < 1e-12 || ng < 1e-12 {
        0.0
    } else {
        dot / (nr * ng)
    }
}

/// Every distinct non-empty set reachable by picking one node per departing
/// member from its cluster and dropping team members.
pub fn product_sets(team: &Team, departing: &Team, model: &ClusterModel) -> BTreeSet<Vec<usize>> {
    let mut sets: BTreeSet<Vec<usize>> = BTreeSet::from([vec![]]);
    for &t in departing.members() {
        let cluster = model.container(model.hard_assign()[t]);
        sets = sets
            .iter()
            .flat_map(|s| {
                cluster.iter().map(move |&v| {
                    let mut next = s.clone();
                    if !team.contains(v) && !next.contains(&v) {
                        next.push(v);
                        next.sort_unstable();
                    }
                    next
                })
            })
            .collect();
    }
    sets.remove(&Vec::new());
    sets
}

/// Every non-empty subset of `space` with at most `k` members.
pub fn subsets(space: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << space.len()) {
        if (mask.count_ones() as usize) <= k {
            out.push((0..space.len()).filter(|i| mask >> i & 1 == 1).map(|i| space[i]).collect());
        }
    }
    out
}

/// Random embeddings in [-1, 1) and peaked random assignments over `c`
/// clusters.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, dim: usize, c: usize) -> ClusterModel {
    let z = Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0));
    let mut soft = Array2::from_shape_fn((n, c), |_| rng.gen_range(0.0..1.0f64).powi(4));
    for mut row in soft.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    ClusterModel::from_parts(z, soft).unwrap()
}

/// One-hot assignment of node `i` to cluster `cluster_of[i]` (0-based).
pub fn one_hot(cluster_of: &[usize], c: usize) -> Array2<f64> {
    let mut m = Array2::zeros((cluster_of.len(), c));
    for (i, &k) in cluster_of.iter().enumerate() {
        m[[i, k]] = 1.0;
    }
    m
}

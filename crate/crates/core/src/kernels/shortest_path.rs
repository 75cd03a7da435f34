use ndarray::Array2;

use super::{check_pair, label_products, LabeledGraph};
use crate::error::{Error, Result};

pub const SP_MAX_NODES: usize = 64;

const LENGTH_TOLERANCE: f64 = 1e-9;

/// All-pairs shortest path lengths, edge weights read as lengths.
/// Unreachable pairs are `f64::INFINITY`; the diagonal is 0.
pub fn floyd_warshall(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let mut dist = Array2::from_elem((n, n), f64::INFINITY);
    for ((i, j), &w) in adjacency.indexed_iter() {
        if w > 0.0 {
            dist[[i, j]] = w;
        }
    }
    for i in 0..n {
        dist[[i, i]] = 0.0;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[[i, k]];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let through = dik + dist[[k, j]];
                if through < dist[[i, j]] {
                    dist[[i, j]] = through;
                }
            }
        }
    }
    dist
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= LENGTH_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Sum over ordered pairs `u≠v` of `g1` and `u'≠v'` of `g2` joined by paths
/// of equal finite length of `(l1[u]·l2[u'])·(l1[v]·l2[v'])`.
pub fn shortest_path_kernel(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<f64> {
    check_pair(g1, g2)?;
    for g in [g1, g2] {
        if g.n() > SP_MAX_NODES {
            return Err(Error::CapExceeded {
                what: "shortest-path kernel nodes",
                size: g.n(),
                cap: SP_MAX_NODES,
            });
        }
    }
    let d1 = floyd_warshall(g1.adjacency());
    let d2 = floyd_warshall(g2.adjacency());
    let k = label_products(g1, g2);
    let paths = |d: &Array2<f64>| -> Vec<(usize, usize, f64)> {
        d.indexed_iter()
            .filter(|&((u, v), l)| u != v && l.is_finite())
            .map(|((u, v), &l)| (u, v, l))
            .collect()
    };
    let (p1, p2) = (paths(&d1), paths(&d2));
    let mut total = 0.0;
    for &(u, v, l) in &p1 {
        for &(u2, v2, l2) in &p2 {
            if same_length(l, l2) {
                total += k[[u, u2]] * k[[v, v2]];
            }
        }
    }
    Ok(total)
}

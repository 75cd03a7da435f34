//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use subteam_core::kernels::LabeledGraph;

pub mod replace;

/// Random symmetric graph with weights in (0, 1] and labels in [0, label_max).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, d: usize, p_edge: f64, label_max: f64) -> LabeledGraph {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_edge) {
                let w = 1.0 - rng.gen::<f64>();
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    let l = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() * label_max);
    LabeledGraph::new(a, l).unwrap()
}

pub fn dense(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Explicit `A×` and `L×` diagonal over pair index `u*n2 + v`.
pub fn kron_parts(g1: &LabeledGraph, g2: &LabeledGraph) -> (DMatrix<f64>, DVector<f64>) {
    let (a1, a2) = (dense(g1.adjacency()), dense(g2.adjacency()));
    let kron = a1.kronecker(&a2);
    let (n1, n2) = (g1.n(), g2.n());
    let lx = DVector::from_fn(n1 * n2, |p, _| {
        let (u, v) = (p / n2, p % n2);
        g1.labels().row(u).dot(&g2.labels().row(v))
    });
    let ax = DMatrix::from_diagonal(&lx) * kron;
    (ax, lx)
}

/// Partial sums `Σ_{k<terms} a^k yᵀA×^k L× x`, one entry per prefix length.
pub fn rw_series(g1: &LabeledGraph, g2: &LabeledGraph, a: f64, terms: usize) -> Vec<f64> {
    let (ax, lx) = kron_parts(g1, g2);
    let m = lx.len();
    let mass = 1.0 / m as f64;
    let mut v = lx * mass;
    let mut sums = Vec::with_capacity(terms);
    let mut acc = 0.0;
    for _ in 0..terms {
        acc += v.sum() * mass;
        sums.push(acc);
        v = &ax * v * a;
    }
    sums
}

/// `yᵀ(I − aA×)⁻¹L×x` by dense LU.
pub fn rw_dense(g1: &LabeledGraph, g2: &LabeledGraph, a: f64) -> f64 {
    let (ax, lx) = kron_parts(g1, g2);
    let m = lx.len();
    let mass = 1.0 / m as f64;
    let sys = DMatrix::identity(m, m) - ax * a;
    let sol = sys.lu().solve(&(lx * mass)).expect("non-singular");
    sol.sum() * mass
}

/// Stop probabilities and transition matrix of the marginalized walks.
pub fn walk(g: &LabeledGraph, gamma: f64) -> (Vec<f64>, Array2<f64>) {
    let n = g.n();
    let mut stop = vec![1.0; n];
    let mut t = Array2::zeros((n, n));
    for u in 0..n {
        let deg: f64 = g.adjacency().row(u).sum();
        if deg > 0.0 {
            stop[u] = gamma;
            for v in 0..n {
                t[[u, v]] = (1.0 - gamma) * g.adjacency()[[u, v]] / deg;
            }
        }
    }
    (stop, t)
}

/// Marginalized kernel via an explicit product-space linear solve.
pub fn marginalized_dense(g1: &LabeledGraph, g2: &LabeledGraph, gamma: f64) -> f64 {
    let (q1, t1) = walk(g1, gamma);
    let (q2, t2) = walk(g2, gamma);
    let (n1, n2) = (g1.n(), g2.n());
    let m = n1 * n2;
    let k = DVector::from_fn(m, |p, _| g1.labels().row(p / n2).dot(&g2.labels().row(p % n2)));
    let tk = DMatrix::from_diagonal(&k) * dense(&t1).kronecker(&dense(&t2));
    let rhs = DVector::from_fn(m, |p, _| k[p] * q1[p / n2] * q2[p % n2]);
    let r = (DMatrix::identity(m, m) - tk).lu().solve(&rhs).expect("non-singular");
    r.sum() / m as f64
}

/// One sampled walk as a node sequence.
pub fn sample_walk<R: Rng>(rng: &mut R, g: &LabeledGraph, gamma: f64) -> Vec<usize> {
    let n = g.n();
    let mut u = rng.gen_range(0..n);
    let mut path = vec![u];
    loop {
        let row = g.adjacency().row(u);
        let deg: f64 = row.sum();
        if deg == 0.0 || rng.gen_bool(gamma) {
            return path;
        }
        let mut x = rng.gen::<f64>() * deg;
        let mut next = n - 1;
        for (v, &w) in row.iter().enumerate() {
            if w > 0.0 {
                next = v;
                if x < w {
                    break;
                }
                x -= w;
            }
        }
        u = next;
        path.push(u);
    }
}

/// Brute-force shortest paths: minimum over all simple paths.
pub fn simple_path_lengths(g: &LabeledGraph) -> Array2<f64> {
    fn dfs(g: &LabeledGraph, at: usize, len: f64, seen: &mut Vec<bool>, from: usize, out: &mut Array2<f64>) {
        if len < out[[from, at]] {
            out[[from, at]] = len;
        }
        for (v, &w) in g.adjacency().row(at).iter().enumerate() {
            if w > 0.0 && !seen[v] {
                seen[v] = true;
                dfs(g, v, len + w, seen, from, out);
                seen[v] = false;
            }
        }
    }
    let n = g.n();
    let mut out = Array2::from_elem((n, n), f64::INFINITY);
    for s in 0..n {
        let mut seen = vec![false; n];
        seen[s] = true;
        dfs(g, s, 0.0, &mut seen, s, &mut out);
    }
    out
}

/// Shortest-path kernel straight from its definition.
pub fn sp_direct(g1: &LabeledGraph, g2: &LabeledGraph) -> f64 {
    let (d1, d2) = (simple_path_lengths(g1), simple_path_lengths(g2));
    let dot = |u: usize, v: usize| g1.labels().row(u).dot(&g2.labels().row(v));
    let mut total = 0.0;
    for u in 0..g1.n() {
        for v in 0..g1.n() {
            for x in 0..g2.n() {
                for y in 0..g2.n() {
                    let (l1, l2) = (d1[[u, v]], d2[[x, y]]);
                    if u != v && x != y && l1.is_finite() && (l1 - l2).abs() < 1e-9 {
                        total += dot(u, x) * dot(v, y);
                    }
                }
            }
        }
    }
    total
}

/// Edit distance by trying every partial injection of `g1` into `g2`.
pub fn ged_brute(g1: &LabeledGraph, g2: &LabeledGraph) -> f64 {
    fn edge(g: &LabeledGraph, u: usize, v: usize) -> Option<f64> {
        let w = g.adjacency()[[u, v]];
        (w > 0.0).then_some(w)
    }
    fn cost(g1: &LabeledGraph, g2: &LabeledGraph, map: &[Option<usize>]) -> usize {
        let mut c = 0;
        let mut hit = vec![false; g2.n()];
        for (u, m) in map.iter().enumerate() {
            match m {
                Some(v) => {
                    hit[*v] = true;
                    c += usize::from(g1.labels().row(u) != g2.labels().row(*v));
                }
                None => c += 1,
            }
        }
        c += hit.iter().filter(|h| !**h).count();
        // every g2 pair: find its preimage, if any
        let mut pre = vec![None; g2.n()];
        for (u, m) in map.iter().enumerate() {
            if let Some(v) = m {
                pre[*v] = Some(u);
            }
        }
        for u in 0..g1.n() {
            for v in u + 1..g1.n() {
                let e1 = edge(g1, u, v);
                let e2 = match (map[u], map[v]) {
                    (Some(a), Some(b)) => edge(g2, a, b),
                    _ => None,
                };
                c += match (e1, e2) {
                    (Some(x), Some(y)) => usize::from(x != y),
                    (None, None) => 0,
                    _ => 1,
                };
            }
        }
        for a in 0..g2.n() {
            for b in a + 1..g2.n() {
                if edge(g2, a, b).is_some() && (pre[a].is_none() || pre[b].is_none()) {
                    c += 1;
                }
            }
        }
        c
    }
    fn go(g1: &LabeledGraph, g2: &LabeledGraph, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, best: &mut usize) {
        if map.len() == g1.n() {
            *best = (*best).min(cost(g1, g2, map));
            return;
        }
        map.push(None);
        go(g1, g2, map, used, best);
        map.pop();
        for v in 0..g2.n() {
            if !used[v] {
                used[v] = true;
                map.push(Some(v));
                go(g1, g2, map, used, best);
                map.pop();
                used[v] = false;
            }
        }
    }
    let mut best = usize::MAX;
    go(g1, g2, &mut Vec::new(), &mut vec![false; g2.n()], &mut best);
    best as f64
}

use ndarray::{Array1, Array2, Zip};

use super::{check_pair, label_products, solve_fixed_point, KernelConfig, LabeledGraph};
use crate::error::{Error, Result};

const GUARD_ITERATIONS: usize = 200;

/// Per-node stop probability and transition matrix. Isolated nodes always
/// stop; elsewhere the walk stops with probability `gamma` and otherwise
/// moves along an edge chosen in proportion to its weight.
fn walk_model(g: &LabeledGraph, gamma: f64) -> (Array1<f64>, Array2<f64>) {
    let n = g.n();
    let deg = g.degrees();
    let mut stop = Array1::zeros(n);
    let mut trans = Array2::zeros((n, n));
    for u in 0..n {
        if deg[u] > 0.0 {
            stop[u] = gamma;
            for v in 0..n {
                trans[[u, v]] = (1.0 - gamma) * g.adjacency()[[u, v]] / deg[u];
            }
        } else {
            stop[u] = 1.0;
        }
    }
    (stop, trans)
}

/// Collatz–Wielandt bound: for non-negative `M` and positive `x`,
/// `ρ(M) ≤ max (Mx)/x`. Power steps sharpen `x`; the best bound and its
/// vector are returned.
fn spectral_bound(apply: &impl Fn(&Array2<f64>) -> Array2<f64>, shape: (usize, usize)) -> (f64, Array2<f64>) {
    let mut x = Array2::ones(shape);
    let mut best = (f64::INFINITY, x.clone());
    for _ in 0..GUARD_ITERATIONS {
        let y = apply(&x);
        let ratio = Zip::from(&y).and(&x).fold(0.0f64, |m, &yi, &xi| m.max(yi / xi));
        if ratio < best.0 {
            best = (ratio, x.clone());
        }
        let top = y.fold(0.0f64, |m, &v| m.max(v));
        if top == 0.0 {
            return (0.0, Array2::ones(shape));
        }
        // keep every entry positive so the bound stays valid
        x = y.mapv(|v| v / top + 1e-9);
    }
    best
}

/// Marginalized kernel: expected product of node-label dot products along
/// two independent random walks, counting only walk pairs of equal length.
/// Solved as `R = K ∘ (q q'ᵀ + T R T'ᵀ)` over node pairs, with the kernel
/// being the uniform average of `R`.
pub fn marginalized_kernel(g1: &LabeledGraph, g2: &LabeledGraph, cfg: &KernelConfig) -> Result<f64> {
    check_pair(g1, g2)?;
    cfg.validate()?;
    let k = label_products(g1, g2);
    let (q1, t1) = walk_model(g1, cfg.termination);
    let (q2, t2) = walk_model(g2, cfg.termination);
    let stop = Array2::from_shape_fn(k.dim(), |(u, v)| q1[u] * q2[v]);
    let b = &k * &stop;
    let t2t = t2.t();
    let apply = |r: &Array2<f64>| t1.dot(r).dot(&t2t) * &k;
    let (rho, w) = spectral_bound(&apply, k.dim());
    if rho >= 1.0 {
        return Err(Error::Convergence(format!(
            "walk-pair operator has spectral bound {rho:.4} after termination damping (must stay below 1)"
        )));
    }
    let r = solve_fixed_point(&b, apply, &w, rho, cfg)?;
    Ok(r.sum() / (g1.n() * g2.n()) as f64)
}

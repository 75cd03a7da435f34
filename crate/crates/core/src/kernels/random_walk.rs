use ndarray::Array2;

use super::{check_pair, label_products, solve_fixed_point, KernelConfig, LabeledGraph};
use crate::error::{Error, Result};

/// `a · max_{u,v} L×[u,v]·deg1[u]·deg2[v]`, the largest row sum of the
/// scaled product-graph operator. Below 1 the walk series converges.
pub fn rw_guard(g1: &LabeledGraph, g2: &LabeledGraph, decay: f64) -> Result<f64> {
    check_pair(g1, g2)?;
    let lx = label_products(g1, g2);
    Ok(guard_from(&lx, &g1.degrees(), &g2.degrees(), decay))
}

fn guard_from(lx: &Array2<f64>, deg1: &[f64], deg2: &[f64], decay: f64) -> f64 {
    let mut worst = 0.0f64;
    for ((u, v), &l) in lx.indexed_iter() {
        worst = worst.max(l * deg1[u] * deg2[v]);
    }
    decay * worst
}

/// Random-walk kernel `yᵀ(I − aA×)⁻¹L×x` with uniform `x`, `y`.
///
/// The product graph is never formed: a vector over node pairs is held as
/// an `n1×n2` matrix `V`, and `A×` acts as `V ↦ L× ∘ (A1·V·A2ᵀ)`.
pub fn random_walk_kernel(g1: &LabeledGraph, g2: &LabeledGraph, cfg: &KernelConfig) -> Result<f64> {
    check_pair(g1, g2)?;
    cfg.validate()?;
    let lx = label_products(g1, g2);
    let q = guard_from(&lx, &g1.degrees(), &g2.degrees(), cfg.decay);
    if q >= 1.0 {
        return Err(Error::Convergence(format!(
            "decay times the largest row sum of the product operator is {q:.4} (must stay below 1)"
        )));
    }
    let (n1, n2) = (g1.n(), g2.n());
    let mass = 1.0 / (n1 * n2) as f64;
    let b = &lx * mass;
    let a1 = g1.adjacency();
    let a2t = g2.adjacency().t();
    let apply = |v: &Array2<f64>| a1.dot(v).dot(&a2t) * &lx * cfg.decay;
    let ones = Array2::ones((n1, n2));
    let u = solve_fixed_point(&b, apply, &ones, q, cfg)?;
    Ok(u.sum() * mass)
}

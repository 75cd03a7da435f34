use std::time::Instant;

use rayon::prelude::*;

use super::{random_walk_kernel, KernelConfig, LabeledGraph};
use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, SocialNetwork, Team};
use crate::recommender::{binomial, next_combination, ReplacementResult};

/// Decay for one baseline search: `cfg.decay`, lowered when needed so the
/// convergence guard holds for every candidate team of the same size.
///
/// Bounds `L×` by the largest label-row norms (Cauchy–Schwarz) and the
/// candidate degrees by `(|T|-1)·w_max`, then keeps the guard at 1/2.
pub fn baseline_decay(team: &Team, net: &SocialNetwork, cfg: &KernelConfig) -> f64 {
    let feats = net.features();
    let row_norm = |r: usize| feats.row(r).map(|(_, v)| v * v).sum::<f64>().sqrt();
    let team_norm = team.members().iter().map(|&m| row_norm(m)).fold(0.0, f64::max);
    let any_norm = (0..net.n()).map(row_norm).fold(0.0, f64::max);
    let w_max = net.adjacency().values().iter().copied().fold(0.0, f64::max);
    let original = induced_subgraph(net, team);
    let deg0 = original.adjacency.rows().into_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let bound = team_norm * any_norm * deg0 * (team.len().saturating_sub(1)) as f64 * w_max;
    if bound > 0.0 {
        cfg.decay.min(0.5 / bound)
    } else {
        cfg.decay
    }
}

/// Kernel baseline over every node outside the team.
pub fn kernel_baseline_replace(
    team: &Team,
    departing: &Team,
    net: &SocialNetwork,
    cfg: &KernelConfig,
    budget: u128,
) -> Result<ReplacementResult> {
    let pool: Vec<usize> = (0..net.n()).filter(|&v| !team.contains(v)).collect();
    kernel_baseline_over(team, departing, net, &pool, cfg, budget)
}

/// Scores each `|ℛ|`-subset `S` of `pool` by the random-walk kernel between
/// the original team and `(T∖ℛ) ∪ S`; ties go to the lexicographically
/// smallest `S`, independent of the worker count.
pub fn kernel_baseline_over(
    team: &Team,
    departing: &Team,
    net: &SocialNetwork,
    pool: &[usize],
    cfg: &KernelConfig,
    budget: u128,
) -> Result<ReplacementResult> {
    let start = Instant::now();
    cfg.validate()?;
    if !departing.is_subset_of(team) || departing.len() == team.len() {
        return Err(Error::Contract("departing members must be a strict subset of the team".into()));
    }
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if let Some(&v) = pool.iter().find(|&&v| v >= net.n()) {
        return Err(Error::Contract(format!("candidate {v} outside the network")));
    }
    let k = departing.len();
    if pool.len() < k {
        return Err(Error::NoCandidate { examined_tuples: 0 });
    }
    let required = binomial(pool.len(), k);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let rest = team.difference(departing).expect("strict subset leaves members");
    let original = LabeledGraph::from(&induced_subgraph(net, team));
    let mut combos: Vec<Vec<usize>> = Vec::with_capacity(required as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        combos.push(idx.iter().map(|&i| pool[i]).collect());
        if !next_combination(&mut idx, pool.len()) {
            break;
        }
    }

    let score = |s: &Vec<usize>| -> Result<f64> {
        let new_team = rest.union(&Team::new(s.clone(), net.n())?);
        let g = LabeledGraph::from(&induced_subgraph(net, &new_team));
        random_walk_kernel(&original, &g, cfg)
    };
    let scored: Vec<(usize, f64)> = combos
        .par_iter()
        .enumerate()
        .map(|(i, s)| score(s).map(|v| (i, v)))
        .collect::<Result<_>>()?;
    // combos are in lexicographic order, so the lower index wins ties
    let (best, similarity) = scored
        .into_iter()
        .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .expect("at least one combination");
    Ok(ReplacementResult {
        subteam: combos.swap_remove(best),
        similarity,
        candidates_examined: combos.len() as u64 + 1,
        elapsed: start.elapsed(),
    })
}

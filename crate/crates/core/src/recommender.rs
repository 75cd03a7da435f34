//! Within-cluster replacement search and its brute-force counterpart.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView2};
use serde::Serialize;

use crate::encoder::ClusterModel;
use crate::error::{Error, Result};
use crate::graph::{SocialNetwork, Team};
use crate::objectives::{cosine, team_embedding};

/// Subset-count ceiling used when callers have no better figure.
pub const DEFAULT_ORACLE_BUDGET: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplacementResult {
    /// Sorted node ids of the recommended subteam.
    pub subteam: Vec<usize>,
    pub similarity: f64,
    pub candidates_examined: u64,
    #[serde(serialize_with = "millis")]
    pub elapsed: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

/// Checks the shared preconditions and returns the remaining team.
fn remaining_team(team: &Team, departing: &Team, model: &ClusterModel, net: &SocialNetwork) -> Result<Team> {
    if model.n() != net.n() {
        return Err(Error::Contract(format!(
            "cluster model covers {} nodes, network has {}",
            model.n(),
            net.n()
        )));
    }
    if team.members().iter().any(|&m| m >= net.n()) {
        return Err(Error::Contract("team references nodes outside the network".into()));
    }
    if !departing.is_subset_of(team) {
        return Err(Error::Contract("departing members must belong to the team".into()));
    }
    team.difference(departing)
        .ok_or_else(|| Error::Contract("the whole team is departing; nothing to compare against".into()))
}

fn score(rows: &[usize], z: ArrayView2<f64>, r: &Array1<f64>) -> f64 {
    let mut g = Array1::zeros(z.ncols());
    for &i in rows {
        g += &z.row(i);
    }
    g /= rows.len() as f64;
    cosine(r.view(), g.view()).clamp(-1.0, 1.0)
}

/// Searches the Cartesian product of the departing members' clusters.
///
/// Each tuple is stripped of current team members and deduplicated; empty
/// results are skipped and repeated sets are scored once. Ties keep the
/// first set in enumeration order (lexicographic over the sorted cluster
/// lists, departing members taken in increasing id order).
pub fn recommend(
    team: &Team,
    departing: &Team,
    model: &ClusterModel,
    net: &SocialNetwork,
) -> Result<ReplacementResult> {
    let start = Instant::now();
    let rest = remaining_team(team, departing, model, net)?;
    let z = model.embeddings().view();
    let r = team_embedding(&rest, z)?;

    let lists: Vec<&[usize]> = departing
        .members()
        .iter()
        .map(|&t| model.container(model.hard_assign()[t]))
        .collect();
    // Every departing member sits in its own cluster, so no list is empty.
    debug_assert!(lists.iter().all(|l| !l.is_empty()));

    let mut cursor = vec![0usize; lists.len()];
    let mut tuples: u64 = 0;
    let mut examined: u64 = 0;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut set = Vec::with_capacity(lists.len());
    loop {
        tuples += 1;
        set.clear();
        set.extend(
            cursor
                .iter()
                .zip(&lists)
                .map(|(&i, l)| l[i])
                .filter(|&v| !team.contains(v)),
        );
        if !set.is_empty() {
            examined += 1;
            set.sort_unstable();
            set.dedup();
            if !seen.contains(&set) {
                let s = score(&set, z, &r);
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    best = Some((set.clone(), s));
                }
                seen.insert(set.clone());
            }
        }
        // Odometer step, last position fastest.
        let mut k = cursor.len();
        let exhausted = loop {
            if k == 0 {
                break true;
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < lists[k].len() {
                break false;
            }
            cursor[k] = 0;
        };
        if exhausted {
            break;
        }
    }

    match best {
        Some((subteam, similarity)) => Ok(ReplacementResult {
            subteam,
            similarity,
            candidates_examined: examined,
            elapsed: start.elapsed(),
        }),
        None => Err(Error::NoCandidate { examined_tuples: tuples }),
    }
}

/// `m` choose `k`, saturating.
pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let mut b: u128 = 1;
    for i in 1..=k.min(m - k) {
        b = b.saturating_mul((m - i + 1) as u128) / i as u128;
    }
    b
}

/// Number of non-empty subsets of an `m`-set with at most `k` members.
pub fn subset_count(m: usize, k: usize) -> u128 {
    (1..=k.min(m)).fold(0u128, |acc, i| acc.saturating_add(binomial(m, i)))
}

/// Scores every non-empty subset of `candidate_space` with at most
/// `max_size` members. Ties go to the lexicographically smallest set.
pub fn exhaustive_oracle(
    team: &Team,
    departing: &Team,
    model: &ClusterModel,
    net: &SocialNetwork,
    candidate_space: &[usize],
    max_size: usize,
    budget: u128,
) -> Result<ReplacementResult> {
    let start = Instant::now();
    let rest = remaining_team(team, departing, model, net)?;
    if max_size == 0 {
        return Err(Error::Contract("max_size = 0 admits no non-empty subset".into()));
    }
    let mut space = candidate_space.to_vec();
    space.sort_unstable();
    space.dedup();
    if let Some(&v) = space.iter().find(|&&v| v >= net.n() || team.contains(v)) {
        return Err(Error::Contract(format!("candidate {v} is a team member or out of range")));
    }
    if space.is_empty() {
        return Err(Error::NoCandidate { examined_tuples: 0 });
    }
    let required = subset_count(space.len(), max_size);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let z = model.embeddings().view();
    let r = team_embedding(&rest, z)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut examined: u64 = 0;
    for k in 1..=max_size.min(space.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let set: Vec<usize> = idx.iter().map(|&i| space[i]).collect();
            examined += 1;
            let s = score(&set, z, &r);
            let better = match &best {
                None => true,
                Some((bs, b)) => s > *b || (s == *b && set < *bs),
            };
            if better {
                best = Some((set, s));
            }
            if !next_combination(&mut idx, space.len()) {
                break;
            }
        }
    }
    let (subteam, similarity) = best.expect("non-empty space yields at least one subset");
    Ok(ReplacementResult {
        subteam,
        similarity,
        candidates_examined: examined,
        elapsed: start.elapsed(),
    })
}

/// Advances `idx` to the next k-combination of `0..m` in lexicographic
/// order; false once exhausted.
pub(crate) fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Union of the departing members' clusters minus the team: the space the
/// within-cluster search draws from.
pub fn cluster_candidate_space(team: &Team, departing: &Team, model: &ClusterModel) -> Vec<usize> {
    let mut space: Vec<usize> = departing
        .members()
        .iter()
        .flat_map(|&t| model.container(model.hard_assign()[t]).iter().copied())
        .filter(|&v| !team.contains(v))
        .collect();
    space.sort_unstable();
    space.dedup();
    space
}

/// Every node outside the team.
pub fn outside_team(team: &Team, n: usize) -> Vec<usize> {
    (0..n).filter(|&v| !team.contains(v)).collect()
}

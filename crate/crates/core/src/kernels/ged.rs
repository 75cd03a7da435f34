use super::LabeledGraph;
use crate::error::{Error, Result};

pub const GED_MAX_NODES: usize = 12;

struct Search<'a> {
    g1: &'a LabeledGraph,
    g2: &'a LabeledGraph,
    /// Image of each assigned `g1` node; `None` means deleted.
    image: Vec<Option<usize>>,
    used: Vec<bool>,
    best: usize,
}

fn has_edge(g: &LabeledGraph, u: usize, v: usize) -> Option<f64> {
    let w = g.adjacency()[[u, v]];
    (w > 0.0).then_some(w)
}

fn node_cost(g1: &LabeledGraph, u: usize, g2: &LabeledGraph, v: usize) -> usize {
    usize::from(g1.labels().row(u) != g2.labels().row(v))
}

impl Search<'_> {
    /// Cost of assigning `g1` node `k` given the images of nodes `0..k`.
    fn step_cost(&self, k: usize, img: Option<usize>) -> usize {
        let mut cost = match img {
            Some(v) => node_cost(self.g1, k, self.g2, v),
            None => 1,
        };
        for j in 0..k {
            let e1 = has_edge(self.g1, j, k);
            let e2 = match (self.image[j], img) {
                (Some(a), Some(b)) => has_edge(self.g2, a, b),
                _ => None,
            };
            cost += match (e1, e2) {
                (Some(w1), Some(w2)) => usize::from(w1 != w2),
                (None, None) => 0,
                _ => 1,
            };
        }
        cost
    }

    /// Inserting the unused `g2` nodes and every `g2` edge touching them.
    fn completion_cost(&self) -> usize {
        let n2 = self.g2.n();
        let mut cost = self.used.iter().filter(|&&u| !u).count();
        for a in 0..n2 {
            for b in a + 1..n2 {
                if (!self.used[a] || !self.used[b]) && has_edge(self.g2, a, b).is_some() {
                    cost += 1;
                }
            }
        }
        cost
    }

    /// Admissible bound on the cost still to come after `k` assignments.
    fn lower_bound(&self, k: usize) -> usize {
        let (n1, n2) = (self.g1.n(), self.g2.n());
        let free2: Vec<usize> = (0..n2).filter(|&v| !self.used[v]).collect();
        // node part: unmatched label multiplicities
        let mut pool: Vec<usize> = free2.clone();
        let mut matched = 0;
        for u in k..n1 {
            if let Some(pos) = pool.iter().position(|&v| node_cost(self.g1, u, self.g2, v) == 0) {
                pool.swap_remove(pos);
                matched += 1;
            }
        }
        let node_lb = (n1 - k).max(free2.len()) - matched;
        // edge part: edges touching unassigned g1 nodes can only pair with
        // g2 edges touching unused g2 nodes, one to one
        let mut e1 = 0usize;
        for u in 0..n1 {
            for v in u + 1..n1 {
                if v >= k && has_edge(self.g1, u, v).is_some() {
                    e1 += 1;
                }
            }
        }
        let mut e2 = 0usize;
        for a in 0..n2 {
            for b in a + 1..n2 {
                if (!self.used[a] || !self.used[b]) && has_edge(self.g2, a, b).is_some() {
                    e2 += 1;
                }
            }
        }
        node_lb + e1.abs_diff(e2)
    }

    fn run(&mut self, k: usize, acc: usize) {
        if acc + self.lower_bound(k) >= self.best {
            return;
        }
        if k == self.g1.n() {
            self.best = self.best.min(acc + self.completion_cost());
            return;
        }
        let n2 = self.g2.n();
        let mut options: Vec<(usize, Option<usize>)> = (0..n2)
            .filter(|&v| !self.used[v])
            .map(|v| (self.step_cost(k, Some(v)), Some(v)))
            .collect();
        options.push((self.step_cost(k, None), None));
        options.sort_by_key(|&(c, _)| c);
        for (c, img) in options {
            if let Some(v) = img {
                self.used[v] = true;
            }
            self.image[k] = img;
            self.run(k + 1, acc + c);
            if let Some(v) = img {
                self.used[v] = false;
            }
        }
        self.image[k] = None;
    }
}

/// Exact edit distance with unit insertion/deletion costs; substituting a
/// node is free when label rows match, an edge when weights match, and
/// costs 1 otherwise.
pub fn graph_edit_distance(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<f64> {
    for g in [g1, g2] {
        if g.n() > GED_MAX_NODES {
            return Err(Error::CapExceeded {
                what: "edit-distance nodes",
                size: g.n(),
                cap: GED_MAX_NODES,
            });
        }
    }
    if g1.d() != g2.d() && g1.n() > 0 && g2.n() > 0 {
        return Err(Error::Contract(format!("label widths differ: {} vs {}", g1.d(), g2.d())));
    }
    let edges = |g: &LabeledGraph| {
        let n = g.n();
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|&(u, v)| has_edge(g, u, v).is_some()).count()
    };
    let mut search = Search {
        g1,
        g2,
        image: vec![None; g1.n()],
        used: vec![false; g2.n()],
        best: g1.n() + g2.n() + edges(g1) + edges(g2) + 1,
    };
    search.run(0, 0);
    Ok(search.best as f64)
}

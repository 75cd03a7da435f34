//! Team embeddings, similarity measures and the four training losses,
//! each paired with its gradient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Team;
use crate::sparse::Csr;

const NORM_FLOOR: f64 = 1e-12;

/// Balancing coefficients of the skill, structural and clustering terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl LossWeights {
    pub const DBLP: LossWeights = LossWeights {
        b1: 1.0,
        b2: 100.0,
        b3: 1.0,
    };
    pub const IMDB: LossWeights = LossWeights {
        b1: 100.0,
        b2: 100.0,
        b3: 10.0,
    };

    pub fn new(b1: f64, b2: f64, b3: f64) -> Result<Self> {
        let w = LossWeights { b1, b2, b3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b1", self.b1), ("b2", self.b2), ("b3", self.b3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights::DBLP
    }
}

/// The four loss components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub contra: f64,
    pub skill: f64,
    pub structural: f64,
    pub clustering: f64,
    pub total: f64,
}

/// Unweighted components, in `contra, skill, structural, clustering` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub contra: f64,
    pub skill: f64,
    pub structural: f64,
    pub clustering: f64,
}

pub fn total_loss(parts: LossParts, w: LossWeights) -> LossReport {
    LossReport {
        contra: parts.contra,
        skill: parts.skill,
        structural: parts.structural,
        clustering: parts.clustering,
        total: parts.contra + w.b1 * parts.skill + w.b2 * parts.structural + w.b3 * parts.clustering,
    }
}

/// Mean of the member rows of `z`.
pub fn team_embedding(members: &Team, z: ArrayView2<f64>) -> Result<Array1<f64>> {
    mean_rows(members.members(), z)
}

pub(crate) fn mean_rows(rows: &[usize], z: ArrayView2<f64>) -> Result<Array1<f64>> {
    if rows.is_empty() {
        return Err(Error::Contract("team embedding of an empty member set".into()));
    }
    let mut acc = Array1::zeros(z.ncols());
    for &r in rows {
        if r >= z.nrows() {
            return Err(Error::Contract(format!("member {r} outside embedding rows")));
        }
        acc += &z.row(r);
    }
    acc /= rows.len() as f64;
    Ok(acc)
}

/// Cosine similarity; 0 when either vector has norm below `1e-12`.
pub fn cosine(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu < NORM_FLOOR || nv < NORM_FLOOR {
        return 0.0;
    }
    u.dot(&v) / (nu * nv)
}

/// Cosine plus its gradients with respect to `u` and `v`.
fn cosine_with_grad(u: ArrayView1<f64>, v: ArrayView1<f64>) -> (f64, Array1<f64>, Array1<f64>) {
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu < NORM_FLOOR || nv < NORM_FLOOR {
        return (0.0, Array1::zeros(u.len()), Array1::zeros(v.len()));
    }
    let f = u.dot(&v) / (nu * nv);
    let du = &v / (nu * nv) - &u * (f / (nu * nu));
    let dv = &u / (nu * nv) - &v * (f / (nv * nv));
    (f, du, dv)
}

fn split_pair(team: &Team, subteam: &Team) -> Result<Team> {
    if !subteam.is_subset_of(team) {
        return Err(Error::Contract("subteam is not contained in its team".into()));
    }
    team.difference(subteam)
        .ok_or_else(|| Error::Contract("subteam equals its team; remainder is empty".into()))
}

/// Negated mean cosine between each subteam and the rest of its team.
pub fn contrastive_loss(batch: &[(Team, Team)], z: ArrayView2<f64>) -> Result<f64> {
    Ok(contrastive_grad(batch, z)?.0)
}

/// Contrastive loss and `∂L/∂Z`.
pub fn contrastive_grad(batch: &[(Team, Team)], z: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if batch.is_empty() {
        return Err(Error::Contract("contrastive loss over an empty batch".into()));
    }
    let s = batch.len() as f64;
    let mut grad = Array2::zeros(z.raw_dim());
    let mut sum = 0.0;
    for (team, sub) in batch {
        let rest = split_pair(team, sub)?;
        let gr = mean_rows(sub.members(), z)?;
        let gt = mean_rows(rest.members(), z)?;
        let (f, du, dv) = cosine_with_grad(gr.view(), gt.view());
        sum += f;
        let cu = -1.0 / (s * sub.len() as f64);
        for &m in sub.members() {
            grad.row_mut(m).scaled_add(cu, &du);
        }
        let cv = -1.0 / (s * rest.len() as f64);
        for &m in rest.members() {
            grad.row_mut(m).scaled_add(cv, &dv);
        }
    }
    Ok((-sum / s, grad))
}

/// L2-normalized rows and the original norms; zero rows stay zero.
fn normalize_rows(p: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = p.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut out = p.to_owned();
    for (mut row, &nrm) in out.rows_mut().into_iter().zip(norms.iter()) {
        if nrm > 0.0 {
            row /= nrm;
        } else {
            row.fill(0.0);
        }
    }
    (out, norms)
}

/// `P̂·Q̂ᵀ` with L2 row normalization.
pub fn pair_sim(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<Array2<f64>> {
    if p.dim() != q.dim() {
        return Err(Error::Contract(format!("pair_sim shapes {:?} and {:?}", p.dim(), q.dim())));
    }
    let (pn, _) = normalize_rows(p);
    let (qn, _) = normalize_rows(q);
    Ok(pn.dot(&qn.t()))
}

/// `PairSim(X, X)` computed from sparse rows.
pub fn feature_similarity(x: &Csr) -> Array2<f64> {
    let n = x.rows();
    let norms: Vec<f64> = (0..n).map(|i| x.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt()).collect();
    // Normalized copy, then X̂·X̂ᵀ through the column lists.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); x.cols()];
    for (r, c, v) in x.iter() {
        if norms[r] > 0.0 {
            by_col[c].push((r, v / norms[r]));
        }
    }
    let mut y = Array2::zeros((n, n));
    for entries in &by_col {
        for &(i, vi) in entries {
            for &(j, vj) in entries {
                y[[i, j]] += vi * vj;
            }
        }
    }
    y
}

/// `−tr(PairSim(PairSim(X,X), PairSim(C,C)))`.
pub fn skill_loss(x: ArrayView2<f64>, c_mat: ArrayView2<f64>) -> Result<f64> {
    if x.nrows() != c_mat.nrows() {
        return Err(Error::Contract("skill loss row counts differ".into()));
    }
    let y1 = pair_sim(x, x)?;
    Ok(skill_grad(y1.view(), c_mat).0)
}

/// Skill loss from a precomputed feature similarity `Y1`, with `∂L/∂C`.
pub fn skill_grad(y1: ArrayView2<f64>, c_mat: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let (cn, c_norms) = normalize_rows(c_mat);
    let y2 = cn.dot(&cn.t());
    let n = y1.nrows();
    let mut loss = 0.0;
    let mut g2 = Array2::zeros((n, n));
    for i in 0..n {
        let a = y1.row(i).dot(&y1.row(i)).sqrt();
        let b = y2.row(i).dot(&y2.row(i)).sqrt();
        if a == 0.0 || b == 0.0 {
            continue;
        }
        let s_i = y1.row(i).dot(&y2.row(i)) / (a * b);
        loss -= s_i;
        let mut g = g2.row_mut(i);
        g.scaled_add(-1.0 / (a * b), &y1.row(i));
        g.scaled_add(s_i / (b * b), &y2.row(i));
    }
    let g_cn = (&g2 + &g2.t()).dot(&cn);
    let mut grad = Array2::zeros(c_mat.raw_dim());
    for i in 0..n {
        if c_norms[i] == 0.0 {
            continue;
        }
        let g = g_cn.row(i);
        let proj = cn.row(i).dot(&g);
        let mut out = grad.row_mut(i);
        out.assign(&g);
        out.scaled_add(-proj, &cn.row(i));
        out /= c_norms[i];
    }
    (loss, grad)
}

/// `‖A − C·Cᵀ‖_F`.
pub fn structural_loss(a: ArrayView2<f64>, c_mat: ArrayView2<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() || a.nrows() != c_mat.nrows() {
        return Err(Error::Contract("structural loss shape mismatch".into()));
    }
    Ok(structural_grad(a, c_mat).0)
}

pub fn structural_grad(a: ArrayView2<f64>, c_mat: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let residual = &a - &c_mat.dot(&c_mat.t());
    let loss = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    if loss == 0.0 {
        return (0.0, Array2::zeros(c_mat.raw_dim()));
    }
    // residual is symmetric because A is
    let grad = residual.dot(&c_mat) * (-2.0 / loss);
    (loss, grad)
}

/// Mean natural-log row entropy, with `0·ln 0 = 0`.
pub fn clustering_loss(c_mat: ArrayView2<f64>) -> f64 {
    clustering_grad(c_mat).0
}

pub fn clustering_grad(c_mat: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = c_mat.nrows();
    if n == 0 {
        return (0.0, Array2::zeros(c_mat.raw_dim()));
    }
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(c_mat.raw_dim());
    for ((i, j), &p) in c_mat.indexed_iter() {
        if p > 0.0 {
            let lp = p.ln();
            loss -= p * lp;
            grad[[i, j]] = -(lp + 1.0) * scale;
        }
    }
    (loss * scale, grad)
}

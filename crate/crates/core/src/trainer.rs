//! Positive team contrasting: sampling of (team, subteam) pairs, the full
//! objective with hand-derived gradients, full-batch gradient descent, and
//! finite-difference verification of the gradients.

use std::time::{Duration, Instant};

use ndarray::{s, Array2, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    check_input, default_cluster_count, forward, EncoderDims, EncoderParams, ForwardTrace, GraphInput,
};
use crate::error::{Error, Result};
use crate::graph::{SocialNetwork, Team};
use crate::objectives::{
    clustering_grad, contrastive_grad, feature_similarity, skill_grad, structural_grad, total_loss, LossParts,
    LossReport, LossWeights,
};

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split fractions must lie in [0,1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    /// Bounds on the fraction of a team drawn as its subteam.
    pub subteam_fraction_range: (f64, f64),
    pub seed: u64,
    pub split: SplitFractions,
    pub hidden: Vec<usize>,
    /// `None` means `⌈√n⌉` capped at 256.
    pub clusters: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            learning_rate: 0.01,
            weights: LossWeights::DBLP,
            subteam_fraction_range: (0.1, 0.5),
            seed: 0,
            split: SplitFractions::default(),
            hidden: vec![64, 64],
            clusters: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Validation(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        self.weights.validate()?;
        let (lo, hi) = self.subteam_fraction_range;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::Validation(format!("subteam fraction range ({lo}, {hi}) must satisfy 0 < low <= high < 1")));
        }
        self.split.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Validation("hidden sizes must be non-empty and positive".into()));
        }
        if let Some(c) = self.clusters {
            if c < 2 {
                return Err(Error::Validation("cluster count must be at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn dims_for(&self, net: &SocialNetwork) -> Result<EncoderDims> {
        let c = self.clusters.unwrap_or_else(|| default_cluster_count(net.n()));
        EncoderDims::new(net.d(), self.hidden.clone(), c)
    }
}

/// Deterministic shuffled split; validation and test take `⌊f·N⌋`, the
/// remainder goes to training.
pub fn split_teams(teams: &[Team], fractions: SplitFractions, seed: u64) -> Result<(Vec<Team>, Vec<Team>, Vec<Team>)> {
    fractions.validate()?;
    if teams.is_empty() {
        return Err(Error::Validation("cannot split an empty team list".into()));
    }
    let n = teams.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (fractions.val * n as f64 + 1e-9).floor() as usize;
    let n_test = (fractions.test * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let pick = |idx: &[usize]| idx.iter().map(|&i| teams[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_val]),
        pick(&order[n_train + n_val..]),
    ))
}

/// Draws a strict, non-empty subteam; `None` for teams of fewer than two.
pub fn sample_subteam<R: Rng>(team: &Team, fraction_range: (f64, f64), rng: &mut R) -> Option<Team> {
    let size = team.len();
    if size < 2 {
        return None;
    }
    let (lo, hi) = fraction_range;
    let u = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let k = ((u * size as f64).round() as usize).clamp(1, size - 1);
    let picked: Vec<usize> = team.members().choose_multiple(rng, k).copied().collect();
    Some(Team::new(picked, usize::MAX).expect("members are valid ids"))
}

/// `(team, subteam)` pairs for one contrastive evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBatch {
    pub pairs: Vec<(Team, Team)>,
}

impl SampleBatch {
    pub fn draw<R: Rng>(teams: &[Team], fraction_range: (f64, f64), rng: &mut R) -> Self {
        let pairs = teams
            .iter()
            .filter_map(|t| sample_subteam(t, fraction_range, rng).map(|s| (t.clone(), s)))
            .collect();
        SampleBatch { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Multipliers on the four loss terms. The weighted training objective is
/// `(1, b1, b2, b3)`; single terms are isolated for gradient checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermCoefficients {
    pub contra: f64,
    pub skill: f64,
    pub structural: f64,
    pub clustering: f64,
}

impl From<LossWeights> for TermCoefficients {
    fn from(w: LossWeights) -> Self {
        TermCoefficients {
            contra: 1.0,
            skill: w.b1,
            structural: w.b2,
            clustering: w.b3,
        }
    }
}

impl TermCoefficients {
    pub const CONTRA: Self = Self::only(0);
    pub const SKILL: Self = Self::only(1);
    pub const STRUCTURAL: Self = Self::only(2);
    pub const CLUSTERING: Self = Self::only(3);

    const fn only(term: usize) -> Self {
        TermCoefficients {
            contra: if term == 0 { 1.0 } else { 0.0 },
            skill: if term == 1 { 1.0 } else { 0.0 },
            structural: if term == 2 { 1.0 } else { 0.0 },
            clustering: if term == 3 { 1.0 } else { 0.0 },
        }
    }

    fn combine(&self, p: &LossParts) -> f64 {
        self.contra * p.contra + self.skill * p.skill + self.structural * p.structural + self.clustering * p.clustering
    }
}

/// Network-dependent constants of the objective, computed once.
pub struct Objective<'a> {
    input: GraphInput<'a>,
    adjacency: Array2<f64>,
    feature_sim: Array2<f64>,
}

/// Gradient for each parameter matrix, in [`EncoderParams::matrices`] order.
pub type Gradients = Vec<Array2<f64>>;

impl<'a> Objective<'a> {
    pub fn new(net: &'a SocialNetwork) -> Self {
        Objective {
            input: GraphInput::new(net),
            adjacency: net.adjacency().to_dense(),
            feature_sim: feature_similarity(net.features()),
        }
    }

    pub fn parts(&self, params: &EncoderParams, batch: &SampleBatch) -> Result<LossParts> {
        Ok(self.evaluate(params, batch, None)?.0)
    }

    /// Loss parts and the gradient of `coeffs`-weighted objective.
    pub fn parts_and_grad(
        &self,
        params: &EncoderParams,
        batch: &SampleBatch,
        coeffs: TermCoefficients,
    ) -> Result<(LossParts, Gradients)> {
        let (parts, grads) = self.evaluate(params, batch, Some(coeffs))?;
        Ok((parts, grads.expect("requested gradients")))
    }

    fn evaluate(
        &self,
        params: &EncoderParams,
        batch: &SampleBatch,
        coeffs: Option<TermCoefficients>,
    ) -> Result<(LossParts, Option<Gradients>)> {
        check_input(&self.input, params)?;
        let trace = forward(&self.input, params)?;
        let c = &trace.soft_assign;
        let (contra, d_z) = contrastive_grad(&batch.pairs, trace.z.view())?;
        let (skill, d_skill) = skill_grad(self.feature_sim.view(), c.view());
        let (structural, d_struct) = structural_grad(self.adjacency.view(), c.view());
        let (clustering, d_clust) = clustering_grad(c.view());
        let parts = LossParts {
            contra,
            skill,
            structural,
            clustering,
        };
        let Some(k) = coeffs else {
            return Ok((parts, None));
        };

        let mut d_c = d_skill * k.skill;
        d_c.scaled_add(k.structural, &d_struct);
        d_c.scaled_add(k.clustering, &d_clust);

        // softmax backward: gE = C ⊙ (gC − Σ_j C_j gC_j)
        let mut g_e = Array2::zeros(c.raw_dim());
        for ((mut ge, cr), gr) in g_e.rows_mut().into_iter().zip(c.rows()).zip(d_c.rows()) {
            let inner = cr.dot(&gr);
            Zip::from(&mut ge).and(&cr).and(&gr).for_each(|o, &ci, &gi| *o = ci * (gi - inner));
        }
        // ReLU on the cluster logits
        Zip::from(&mut g_e)
            .and(&trace.cluster_logits)
            .for_each(|g, &p| if p <= 0.0 { *g = 0.0 });
        let g_wc = trace.z.t().dot(&g_e);
        let mut g_z = d_z * k.contra;
        g_z += &g_e.dot(&params.cluster_weight.t());

        let layers = params.dims().layers();
        let mut g_layers: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); layers];
        let mut offsets = Vec::with_capacity(layers);
        let mut acc = 0;
        for &h in &params.dims().hidden {
            offsets.push(acc..acc + h);
            acc += h;
        }
        let mut carry: Option<Array2<f64>> = None;
        for l in (0..layers).rev() {
            let mut g_h = g_z.slice(s![.., offsets[l].clone()]).to_owned();
            if let Some(c) = carry.take() {
                g_h += &c;
            }
            Zip::from(&mut g_h)
                .and(&trace.pre_activations[l])
                .for_each(|g, &q| if q <= 0.0 { *g = 0.0 });
            // Â is symmetric, so Âᵀ·gQ = Â·gQ
            let m = self.input.norm_adj.mul_dense(g_h.view());
            g_layers[l] = if l == 0 {
                self.input.features.t_mul_dense(m.view())
            } else {
                trace.hidden[l - 1].t().dot(&m)
            };
            if l > 0 {
                carry = Some(m.dot(&params.layer_weights[l].t()));
            }
        }
        g_layers.push(g_wc);
        Ok((parts, Some(g_layers)))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub contra: f64,
    pub skill: f64,
    pub structural: f64,
    pub clustering: f64,
    pub total: f64,
    /// Contrastive loss on the fixed validation batch after this epoch's update.
    pub val_contra: Option<f64>,
    pub wall_ms: f64,
}

impl EpochRecord {
    pub fn report(&self) -> LossReport {
        LossReport {
            contra: self.contra,
            skill: self.skill,
            structural: self.structural,
            clustering: self.clustering,
            total: self.total,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the kept epoch.
    pub params: EncoderParams,
    /// Parameters after the last update, whatever epoch was kept.
    pub final_params: EncoderParams,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub elapsed: Duration,
}

impl TrainOutcome {
    /// One JSON object per line.
    pub fn log_lines(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

fn check_finite(report: &LossReport, epoch: usize) -> Result<()> {
    for (term, v) in [
        ("contrastive", report.contra),
        ("skill", report.skill),
        ("structural", report.structural),
        ("clustering", report.clustering),
        ("total", report.total),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { term, epoch });
        }
    }
    Ok(())
}

const VALIDATION_STREAM: u64 = 0x005e_ed0f_7a11;

/// Trains on `train_teams`, selecting the epoch with the lowest validation
/// contrastive loss (the final epoch when no validation pairs exist).
pub fn train(net: &SocialNetwork, train_teams: &[Team], val_teams: &[Team], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let dims = cfg.dims_for(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = EncoderParams::init(dims, &mut rng)?;
    let objective = Objective::new(net);
    let coeffs = TermCoefficients::from(cfg.weights);

    let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ VALIDATION_STREAM);
    let val_batch = SampleBatch::draw(val_teams, cfg.subteam_fraction_range, &mut val_rng);

    let mut best: Option<(f64, usize, EncoderParams)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let t0 = Instant::now();
        let batch = SampleBatch::draw(train_teams, cfg.subteam_fraction_range, &mut rng);
        if batch.is_empty() {
            return Err(Error::Validation("no training team has at least two members".into()));
        }
        let (parts, grads) = objective.parts_and_grad(&params, &batch, coeffs)?;
        let report = total_loss(parts, cfg.weights);
        check_finite(&report, epoch)?;
        for (w, g) in params.matrices_mut().zip(&grads) {
            w.scaled_add(-cfg.learning_rate, g);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite { term: "parameter", epoch });
        }
        let val_contra = if val_batch.is_empty() {
            None
        } else {
            let trace = forward(&objective.input, &params)?;
            Some(contrastive_grad(&val_batch.pairs, trace.z.view())?.0)
        };
        match (val_contra, &best) {
            (Some(v), Some((b, _, _))) if v >= *b => {}
            (Some(v), _) => best = Some((v, epoch, params.clone())),
            (None, _) => {}
        }
        log.push(EpochRecord {
            epoch,
            contra: report.contra,
            skill: report.skill,
            structural: report.structural,
            clustering: report.clustering,
            total: report.total,
            val_contra,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        log::debug!("epoch {epoch}: total {:.6}", report.total);
    }
    let (best_epoch, kept) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.epochs, params.clone()),
    };
    Ok(TrainOutcome {
        params: kept,
        final_params: params,
        log,
        best_epoch,
        elapsed: started.elapsed(),
    })
}

/// Worst relative error between `analytic` and central differences of `f`
/// around `x`. Absolute error is used where both gradients are below `1e-6`.
pub fn check_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length");
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe);
        probe[i] = x[i] - eps;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * eps);
        let scale = analytic[i].abs().max(numeric.abs());
        let err = if scale < 1e-6 {
            (analytic[i] - numeric).abs()
        } else {
            (analytic[i] - numeric).abs() / scale
        };
        worst = worst.max(err);
    }
    worst
}

impl EncoderParams {
    /// All weights, matrix by matrix in row-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.matrices().flat_map(|m| m.iter().copied()).collect()
    }

    pub fn with_flat(&self, flat: &[f64]) -> EncoderParams {
        let mut out = self.clone();
        let mut it = flat.iter();
        for m in out.matrices_mut() {
            for v in m.iter_mut() {
                *v = *it.next().expect("flat vector long enough");
            }
        }
        out
    }
}

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Flat index of the parameter with the worst error.
    pub worst_parameter: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    /// Parameters whose `±eps` stencil changes some ReLU's active set; the
    /// loss is not differentiable inside such a stencil.
    pub kink_crossings: usize,
}

fn activation_pattern(trace: &ForwardTrace) -> Vec<bool> {
    trace
        .pre_activations
        .iter()
        .chain(std::iter::once(&trace.cluster_logits))
        .flat_map(|m| m.iter().map(|&v| v > 0.0))
        .collect()
}

/// Compares the analytic gradient of the `coeffs`-weighted objective with
/// central finite differences over every parameter.
pub fn gradient_check(
    net: &SocialNetwork,
    batch: &SampleBatch,
    params: &EncoderParams,
    coeffs: TermCoefficients,
    eps: f64,
) -> Result<GradientCheck> {
    let objective = Objective::new(net);
    let (_, grads) = objective.parts_and_grad(params, batch, coeffs)?;
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.iter().copied()).collect();
    let x = params.to_flat();
    let mut probe = x.clone();
    let eval = |flat: &[f64]| -> Result<(f64, Vec<bool>)> {
        let p = params.with_flat(flat);
        let parts = objective.parts(&p, batch)?;
        let trace = forward(&objective.input, &p)?;
        Ok((coeffs.combine(&parts), activation_pattern(&trace)))
    };
    let mut report = GradientCheck {
        max_relative_error: 0.0,
        worst_parameter: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        kink_crossings: 0,
    };
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let (up, up_pattern) = eval(&probe)?;
        probe[i] = x[i] - eps;
        let (down, down_pattern) = eval(&probe)?;
        probe[i] = x[i];
        if up_pattern != down_pattern {
            report.kink_crossings += 1;
        }
        let numeric = (up - down) / (2.0 * eps);
        let scale = analytic[i].abs().max(numeric.abs());
        let err = if scale < 1e-6 {
            (analytic[i] - numeric).abs()
        } else {
            (analytic[i] - numeric).abs() / scale
        };
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_parameter = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}

//! Comparison harness: shared replacement cases, disparity metrics, timing.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::ClusterModel;
use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, SocialNetwork, Team};
use crate::kernels::{
    baseline_decay, graph_edit_distance, kernel_baseline_replace, marginalized_kernel, shortest_path_kernel,
    KernelConfig, LabeledGraph, GED_MAX_NODES,
};
use crate::recommender::{recommend, ReplacementResult, DEFAULT_ORACLE_BUDGET};

/// A replacement strategy under evaluation.
pub trait ReplacementMethod: Sync {
    fn name(&self) -> &str;
    /// One-off preparation cost, spread over the test teams.
    fn training_time(&self) -> Duration;
    fn replace(&self, net: &SocialNetwork, team: &Team, departing: &Team) -> Result<ReplacementResult>;
}

/// Within-cluster search over a trained model.
pub struct Genius {
    pub model: ClusterModel,
    pub training_time: Duration,
}

impl ReplacementMethod for Genius {
    fn name(&self) -> &str {
        "genius"
    }

    fn training_time(&self) -> Duration {
        self.training_time
    }

    fn replace(&self, net: &SocialNetwork, team: &Team, departing: &Team) -> Result<ReplacementResult> {
        recommend(team, departing, &self.model, net)
    }
}

/// Exhaustive random-walk-kernel search over every outsider.
pub struct KernelBaseline {
    pub cfg: KernelConfig,
    pub budget: u128,
    /// Lower the decay per case so the series converges for every candidate.
    pub auto_decay: bool,
}

impl Default for KernelBaseline {
    fn default() -> Self {
        KernelBaseline {
            cfg: KernelConfig::default(),
            budget: DEFAULT_ORACLE_BUDGET,
            auto_decay: true,
        }
    }
}

impl ReplacementMethod for KernelBaseline {
    fn name(&self) -> &str {
        "kernel"
    }

    fn training_time(&self) -> Duration {
        Duration::ZERO
    }

    fn replace(&self, net: &SocialNetwork, team: &Team, departing: &Team) -> Result<ReplacementResult> {
        let mut cfg = self.cfg;
        if self.auto_decay {
            cfg.decay = baseline_decay(team, net, &self.cfg);
        }
        kernel_baseline_replace(team, departing, net, &cfg, self.budget)
    }
}

/// Hands the departing members straight back; the new team equals the old
/// one, so every disparity must come out 0.
pub struct IdentityReplacement;

impl ReplacementMethod for IdentityReplacement {
    fn name(&self) -> &str {
        "identity"
    }

    fn training_time(&self) -> Duration {
        Duration::ZERO
    }

    fn replace(&self, _net: &SocialNetwork, _team: &Team, departing: &Team) -> Result<ReplacementResult> {
        Ok(ReplacementResult {
            subteam: departing.members().to_vec(),
            similarity: 1.0,
            candidates_examined: 1,
            elapsed: Duration::ZERO,
        })
    }
}

/// `|K(t0,t1) − K(t0,t0)| / K(t0,t0)`, or `None` when `K(t0,t0) = 0`.
fn relative_disparity(k01: f64, k00: f64) -> Option<f64> {
    (k00 > 0.0).then(|| (k01 - k00).abs() / k00)
}

/// Shortest-path disparity; `None` marks a zero self-kernel.
pub fn disparity_sp(t0: &LabeledGraph, t1: &LabeledGraph) -> Result<Option<f64>> {
    Ok(relative_disparity(shortest_path_kernel(t0, t1)?, shortest_path_kernel(t0, t0)?))
}

/// Marginalized-kernel disparity; `None` marks a zero self-kernel.
pub fn disparity_marg(t0: &LabeledGraph, t1: &LabeledGraph, cfg: &KernelConfig) -> Result<Option<f64>> {
    Ok(relative_disparity(marginalized_kernel(t0, t1, cfg)?, marginalized_kernel(t0, t0, cfg)?))
}

/// Keeps `d_sub` feature columns chosen uniformly by `seed`, in their
/// original order.
pub fn feature_subsample(net: &SocialNetwork, d_sub: usize, seed: u64) -> Result<SocialNetwork> {
    if d_sub > net.d() {
        return Err(Error::Validation(format!("cannot keep {d_sub} of {} features", net.d())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = sample(&mut rng, net.d(), d_sub).into_vec();
    cols.sort_unstable();
    net.with_feature_columns(&cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Fractions of each team to replace.
    pub percentages: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Settings of the marginalized kernel behind D2.
    pub kernel: KernelConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            percentages: vec![0.01, 0.10, 0.25, 0.50],
            seeds: vec![0],
            kernel: KernelConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.percentages.is_empty() || self.seeds.is_empty() {
            return Err(Error::Validation("need at least one percentage and one seed".into()));
        }
        if let Some(p) = self.percentages.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Validation(format!("percentage {p} outside (0,1)")));
        }
        self.kernel.validate()
    }
}

/// Departing subteam of `team`: `max(1, round(p·|T|))` members, at most
/// `|T|-1`, drawn uniformly. `None` for single-member teams.
pub fn draw_departing(team: &Team, percentage: f64, seed: u64, stream: u64, n: usize) -> Option<Team> {
    if team.len() < 2 {
        return None;
    }
    let k = ((percentage * team.len() as f64).round() as usize).clamp(1, team.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let picks = sample(&mut rng, team.len(), k).into_iter().map(|i| team.members()[i]).collect();
    Team::new(picks, n).ok()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OutcomeTiming {
    pub inference_ms: f64,
    /// Inference plus the amortized training share.
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: String,
    pub subteam: Option<Vec<usize>>,
    pub similarity: Option<f64>,
    pub ged: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    /// Refusal or failure message; metrics are absent when set.
    pub error: Option<String>,
    pub timing: OutcomeTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub team_index: usize,
    pub percentage: f64,
    pub seed: u64,
    pub team: Vec<usize>,
    pub departing: Vec<usize>,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MethodSummary {
    pub mean_ged: Option<f64>,
    pub mean_d1: Option<f64>,
    pub mean_d2: Option<f64>,
    /// Cases every method completed.
    pub cases: usize,
    pub refusals: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Exclusions {
    /// Teams with fewer than two members, which cannot lose a subteam.
    pub single_member_teams: usize,
    /// Cases some method refused or failed.
    pub incomplete_cases: usize,
    pub ged_over_cap: usize,
    pub d1_zero_self_kernel: usize,
    pub d2_zero_self_kernel: usize,
    pub d2_not_convergent: usize,
    /// Cases entering each mean.
    pub ged_cases: usize,
    pub d1_cases: usize,
    pub d2_cases: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TimingSummary {
    pub mean_inference_ms: f64,
    pub mean_total_ms: f64,
    pub training_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub percentages: Vec<f64>,
    pub seeds: Vec<u64>,
    pub feature_dims: usize,
    pub test_teams: usize,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub methods: BTreeMap<String, MethodSummary>,
    pub exclusions: Exclusions,
    /// Wall-clock figures; everything outside `timing` fields is
    /// reproducible from the seeds.
    pub timing: BTreeMap<String, TimingSummary>,
    pub cases: Vec<CaseRecord>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    team_index: usize,
    percentage: f64,
    seed: u64,
    method: &'a str,
    team: String,
    departing: String,
    subteam: String,
    similarity: Option<f64>,
    ged: Option<f64>,
    d1: Option<f64>,
    d2: Option<f64>,
    error: &'a str,
    timing_inference_ms: f64,
    timing_total_ms: f64,
}

fn join(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per (case, method).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for case in &self.cases {
            for o in &case.outcomes {
                w.serialize(CsvRow {
                    team_index: case.team_index,
                    percentage: case.percentage,
                    seed: case.seed,
                    method: &o.method,
                    team: join(&case.team),
                    departing: join(&case.departing),
                    subteam: o.subteam.as_deref().map(join).unwrap_or_default(),
                    similarity: o.similarity,
                    ged: o.ged,
                    d1: o.d1,
                    d2: o.d2,
                    error: o.error.as_deref().unwrap_or(""),
                    timing_inference_ms: o.timing.inference_ms,
                    timing_total_ms: o.timing.total_ms,
                })
                .expect("in-memory csv write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    /// Copy with every timing field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> EvalReport {
        let mut r = self.clone();
        for t in r.timing.values_mut() {
            *t = TimingSummary::default();
        }
        for case in &mut r.cases {
            for o in &mut case.outcomes {
                o.timing = OutcomeTiming::default();
            }
        }
        r
    }

    /// Cases where every method returned a result.
    pub fn completed_cases(&self) -> usize {
        self.cases.len() - self.exclusions.incomplete_cases
    }
}

fn team_graph(net: &SocialNetwork, team: &Team) -> LabeledGraph {
    LabeledGraph::from(&induced_subgraph(net, team))
}

/// Self-kernels of an original team, computed once per team.
struct SelfKernels {
    sp: f64,
    /// `None` when the marginalized series does not converge.
    marg: Option<f64>,
}

impl SelfKernels {
    fn new(t0: &LabeledGraph, cfg: &KernelConfig) -> Result<Self> {
        let marg = match marginalized_kernel(t0, t0, cfg) {
            Ok(v) => Some(v),
            Err(Error::Convergence(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(SelfKernels {
            sp: shortest_path_kernel(t0, t0)?,
            marg,
        })
    }
}

/// Disparities of one completed replacement. GED is `None` above the cap,
/// D1/D2 are `None` for zero self-kernels or a divergent series.
fn measure(
    net: &SocialNetwork,
    t0: &LabeledGraph,
    own: &SelfKernels,
    team: &Team,
    departing: &Team,
    subteam: &[usize],
    cfg: &KernelConfig,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let s = Team::new(subteam.to_vec(), net.n())?;
    let new_team = match team.difference(departing) {
        Some(rest) => rest.union(&s),
        None => s,
    };
    let t1 = team_graph(net, &new_team);
    let ged = if t0.n() <= GED_MAX_NODES && t1.n() <= GED_MAX_NODES {
        Some(graph_edit_distance(t0, &t1)?)
    } else {
        None
    };
    let d1 = relative_disparity(shortest_path_kernel(t0, &t1)?, own.sp);
    let d2 = match own.marg {
        Some(k00) => match marginalized_kernel(t0, &t1, cfg) {
            Ok(k01) => relative_disparity(k01, k00),
            Err(Error::Convergence(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok((ged, d1, d2))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Feeds every (team, percentage, seed) case to every method and averages
/// each metric over the cases where all methods produced it.
pub fn run_comparison(
    net: &SocialNetwork,
    test_teams: &[Team],
    methods: &[&dyn ReplacementMethod],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::Validation("no methods to compare".into()));
    }
    let names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::Validation(format!("method {n} listed twice")));
        }
    }
    let amortized: Vec<f64> = methods
        .iter()
        .map(|m| m.training_time().as_secs_f64() * 1e3 / test_teams.len().max(1) as f64)
        .collect();

    let mut exclusions = Exclusions::default();
    let mut cases = Vec::new();
    for (ti, team) in test_teams.iter().enumerate() {
        if team.len() < 2 {
            exclusions.single_member_teams += 1;
            continue;
        }
        let t0 = team_graph(net, team);
        let own = SelfKernels::new(&t0, &cfg.kernel)?;
        for (pi, &p) in cfg.percentages.iter().enumerate() {
            for &seed in &cfg.seeds {
                let stream = (ti as u64) << 16 | pi as u64;
                let departing = draw_departing(team, p, seed, stream, net.n()).expect("team has two members");
                let mut outcomes = Vec::with_capacity(methods.len());
                for (mi, m) in methods.iter().enumerate() {
                    let mut o = MethodOutcome {
                        method: names[mi].clone(),
                        subteam: None,
                        similarity: None,
                        ged: None,
                        d1: None,
                        d2: None,
                        error: None,
                        timing: OutcomeTiming::default(),
                    };
                    match m.replace(net, team, &departing) {
                        Ok(res) => {
                            let inference = res.elapsed.as_secs_f64() * 1e3;
                            o.timing = OutcomeTiming {
                                inference_ms: inference,
                                total_ms: inference + amortized[mi],
                            };
                            let (ged, d1, d2) = measure(net, &t0, &own, team, &departing, &res.subteam, &cfg.kernel)?;
                            o.ged = ged;
                            o.d1 = d1;
                            o.d2 = d2;
                            o.subteam = Some(res.subteam);
                            o.similarity = Some(res.similarity);
                        }
                        Err(e) => o.error = Some(e.to_string()),
                    }
                    outcomes.push(o);
                }
                let complete = outcomes.iter().all(|o| o.error.is_none());
                if complete {
                    if outcomes.iter().any(|o| o.ged.is_none()) {
                        exclusions.ged_over_cap += 1;
                    }
                    if own.sp == 0.0 {
                        exclusions.d1_zero_self_kernel += 1;
                    }
                    match own.marg {
                        Some(0.0) => exclusions.d2_zero_self_kernel += 1,
                        None => exclusions.d2_not_convergent += 1,
                        Some(_) if outcomes.iter().any(|o| o.d2.is_none()) => exclusions.d2_not_convergent += 1,
                        Some(_) => {}
                    }
                }
                cases.push(CaseRecord {
                    team_index: ti,
                    percentage: p,
                    seed,
                    team: team.members().to_vec(),
                    departing: departing.members().to_vec(),
                    outcomes,
                });
            }
        }
    }

    let complete: Vec<&CaseRecord> = cases.iter().filter(|c| c.outcomes.iter().all(|o| o.error.is_none())).collect();
    exclusions.incomplete_cases = cases.len() - complete.len();
    let metric_cases = |pick: fn(&MethodOutcome) -> Option<f64>| -> Vec<&CaseRecord> {
        complete.iter().copied().filter(|c| c.outcomes.iter().all(|o| pick(o).is_some())).collect()
    };
    let ged_set = metric_cases(|o| o.ged);
    let d1_set = metric_cases(|o| o.d1);
    let d2_set = metric_cases(|o| o.d2);
    exclusions.ged_cases = ged_set.len();
    exclusions.d1_cases = d1_set.len();
    exclusions.d2_cases = d2_set.len();

    let mut summaries = BTreeMap::new();
    let mut timing = BTreeMap::new();
    for (mi, name) in names.iter().enumerate() {
        let pick = |set: &[&CaseRecord], f: fn(&MethodOutcome) -> Option<f64>| mean(set.iter().filter_map(|c| f(&c.outcomes[mi])));
        summaries.insert(
            name.clone(),
            MethodSummary {
                mean_ged: pick(&ged_set, |o| o.ged),
                mean_d1: pick(&d1_set, |o| o.d1),
                mean_d2: pick(&d2_set, |o| o.d2),
                cases: complete.len(),
                refusals: cases.iter().filter(|c| c.outcomes[mi].error.is_some()).count(),
            },
        );
        timing.insert(
            name.clone(),
            TimingSummary {
                mean_inference_ms: mean(complete.iter().map(|c| c.outcomes[mi].timing.inference_ms)).unwrap_or(0.0),
                mean_total_ms: mean(complete.iter().map(|c| c.outcomes[mi].timing.total_ms)).unwrap_or(0.0),
                training_ms: methods[mi].training_time().as_secs_f64() * 1e3,
            },
        );
    }

    Ok(EvalReport {
        config: ReportConfig {
            percentages: cfg.percentages.clone(),
            seeds: cfg.seeds.clone(),
            feature_dims: net.d(),
            test_teams: test_teams.len(),
            methods: names,
        },
        methods: summaries,
        exclusions,
        timing,
        cases,
    })
}

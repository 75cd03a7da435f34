//! Acceptance suite. Runs every criterion in sequence (timing checks must not
//! share the machine with each other), prints one line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::replace::{one_hot, product_sets, random_model, score, subsets};
use common::{random_graph, rw_dense, rw_series};
use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subteam_core::encoder::{
    checkpoint_to_string, softmax_rows, ClusterModel, EncoderDims, EncoderParams,
};
use subteam_core::eval::{feature_subsample, run_comparison, EvalConfig, Genius, IdentityReplacement, KernelBaseline};
use subteam_core::graph::{generate_synthetic, SocialNetwork, SyntheticConfig, SyntheticData, Team};
use subteam_core::kernels::{random_walk_kernel, KernelConfig};
use subteam_core::objectives::{clustering_loss, structural_loss, LossWeights};
use subteam_core::recommender::{
    cluster_candidate_space, exhaustive_oracle, outside_team, recommend, DEFAULT_ORACLE_BUDGET,
};
use subteam_core::sparse::Csr;
use subteam_core::trainer::{gradient_check, split_teams, train, SampleBatch, TermCoefficients, TrainConfig};
use subteam_core::Error;

/// A criterion returns a one-line summary, or panics / errors on failure.
type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn synthetic(n: usize, d: usize, blocks: usize, p_in: f64, p_out: f64, teams: usize, seed: u64) -> SyntheticData {
    generate_synthetic(&SyntheticConfig { n, d, blocks, p_in, p_out, teams, seed }).unwrap()
}

fn empty_net(n: usize) -> SocialNetwork {
    SocialNetwork::new(Csr::zeros(n, n), Csr::zeros(n, 1)).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let data = synthetic(30, 8, 2, 0.6, 0.1, 8, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = SampleBatch::draw(&data.teams, (0.2, 0.6), &mut rng);
    let params = EncoderParams::init(EncoderDims::new(8, vec![8, 8], 4).unwrap(), &mut rng).unwrap();
    let mut worst = 0.0f64;
    for (name, coeffs) in [
        ("contra", TermCoefficients::CONTRA),
        ("skill", TermCoefficients::SKILL),
        ("structural", TermCoefficients::STRUCTURAL),
        ("clustering", TermCoefficients::CLUSTERING),
        ("total", LossWeights::DBLP.into()),
    ] {
        let check = gradient_check(&data.network, &batch, &params, coeffs, 1e-4).map_err(|e| e.to_string())?;
        ensure!(check.kink_crossings == 0, "{name}: {} stencils straddle a ReLU kink", check.kink_crossings);
        ensure!(check.max_relative_error < 1e-4, "{name}: {check:?}");
        worst = worst.max(check.max_relative_error);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("worst relative error {worst:.2e} over 4 terms + total, {secs:.2} s"))
}

/// Team of 2..=6 random nodes with 1..|T| of them departing.
fn random_case(rng: &mut ChaCha8Rng, n: usize) -> (Team, Team) {
    let size = rng.gen_range(2..=6);
    let ids = sample(rng, n, size).into_vec();
    let k = rng.gen_range(1..size);
    (Team::new(ids.clone(), n).unwrap(), Team::new(ids[..k].to_vec(), n).unwrap())
}

fn subteam_size_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut calls, mut violations, mut shrunk, mut no_candidate) = (0, 0, 0, 0);
    for i in 0..25 {
        let data = synthetic(24 + 4 * (i % 5), 8, 4, 0.7, 0.1, 12, 100 + i as u64);
        let params = EncoderParams::init(EncoderDims::new(8, vec![8, 8], 4).unwrap(), &mut rng).unwrap();
        let encoded = ClusterModel::build(&data.network, &params).unwrap();
        let n = data.network.n();
        let shuffled = random_model(&mut rng, n, 8, 4);
        for model in [&encoded, &shuffled] {
            for _ in 0..25 {
                let (team, departing) = random_case(&mut rng, n);
                calls += 1;
                match recommend(&team, &departing, model, &data.network) {
                    Ok(res) => {
                        violations += usize::from(res.subteam.len() > departing.len());
                        shrunk += usize::from(res.subteam.len() < departing.len());
                    }
                    Err(Error::NoCandidate { .. }) => no_candidate += 1,
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
    }
    // two departing members who share a cluster whose only outsider is node 3
    let model = ClusterModel::from_parts(
        Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64 + 0.5),
        one_hot(&[0, 1, 1, 1, 0, 0], 2),
    )
    .unwrap();
    let team = Team::new(vec![0, 1, 2], 6).unwrap();
    let departing = Team::new(vec![1, 2], 6).unwrap();
    let fixture = recommend(&team, &departing, &model, &empty_net(6)).map_err(|e| e.to_string())?;
    calls += 1;
    ensure!(fixture.subteam == vec![3], "fixture returned {:?}", fixture.subteam);
    shrunk += 1;
    ensure!(calls >= 1000, "only {calls} calls");
    ensure!(violations == 0, "{violations} violations");
    Ok(format!(
        "{calls} calls, 0 violations, {shrunk} with |S| < |R| (fixture: {{1,2}} -> {{3}}), {no_candidate} without candidates"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut instances, mut unique, mut attempts) = (0, 0, 0);
    while instances < 120 {
        attempts += 1;
        ensure!(attempts < 10_000, "could not build enough instances");
        let n = rng.gen_range(12..=30);
        let model = if instances % 2 == 0 {
            let data = synthetic(n - n % 3, 8, 3, 0.7, 0.1, 4, rng.gen());
            let params = EncoderParams::init(EncoderDims::new(8, vec![8, 8], 3).unwrap(), &mut rng).unwrap();
            ClusterModel::build(&data.network, &params).unwrap()
        } else {
            random_model(&mut rng, n, 6, 3)
        };
        let n = model.n();
        let net = empty_net(n);
        // departing members drawn from one cluster, the rest from anywhere
        let cluster = model.hard_assign()[rng.gen_range(0..n)];
        let pool = model.container(cluster);
        let leave = rng.gen_range(1..=pool.len().min(3));
        let departing: Vec<usize> = sample(&mut rng, pool.len(), leave).into_iter().map(|i| pool[i]).collect();
        let others: Vec<usize> = (0..n).filter(|v| !departing.contains(v)).collect();
        let stay = rng.gen_range(1..=3);
        let mut ids = departing.clone();
        ids.extend(sample(&mut rng, others.len(), stay).into_iter().map(|i| others[i]));
        let team = Team::new(ids, n).unwrap();
        let departing = Team::new(departing, n).unwrap();
        let space = cluster_candidate_space(&team, &departing, &model);
        if space.is_empty() {
            continue;
        }
        let res = recommend(&team, &departing, &model, &net).map_err(|e| e.to_string())?;
        let oracle = exhaustive_oracle(&team, &departing, &model, &net, &space, departing.len(), DEFAULT_ORACLE_BUDGET)
            .map_err(|e| e.to_string())?;
        ensure!(
            res.similarity == oracle.similarity,
            "instance {instances}: recommend {} vs oracle {}",
            res.similarity,
            oracle.similarity
        );
        let rest = team.difference(&departing).unwrap();
        let mut scores: Vec<f64> = subsets(&space, departing.len())
            .iter()
            .map(|s| score(model.embeddings(), rest.members(), s))
            .collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        if scores.len() == 1 || scores[0] - scores[1] > 1e-9 {
            unique += 1;
            ensure!(
                res.subteam == oracle.subteam,
                "instance {instances}: {:?} vs {:?}",
                res.subteam,
                oracle.subteam
            );
        }
        // the search space itself agrees with a test-side enumeration
        let reachable: BTreeSet<Vec<usize>> = subsets(&space, departing.len()).into_iter().collect();
        ensure!(product_sets(&team, &departing, &model) == reachable, "instance {instances}: spaces differ");
        instances += 1;
    }
    Ok(format!(
        "{instances} instances (departing members share a cluster), scores identical, {unique} unique optima with matching sets"
    ))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn cluster_speedup() -> Outcome {
    let start = Instant::now();
    let (n, c) = (200, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cluster_of: Vec<usize> = (0..n).map(|i| i % c).collect();
    let model = ClusterModel::from_parts(
        Array2::from_shape_fn((n, 128), |_| rng.gen_range(-1.0..1.0)),
        one_hot(&cluster_of, c),
    )
    .unwrap();
    let net = empty_net(n);
    let team = Team::new(vec![0, 1, 12, 23], n).unwrap();
    let departing = Team::new(vec![0, 1], n).unwrap();
    let everyone = outside_team(&team, n);
    let (mut fast, mut slow) = (Vec::new(), Vec::new());
    let mut agree = true;
    for _ in 0..15 {
        let t = Instant::now();
        let r = recommend(&team, &departing, &model, &net).map_err(|e| e.to_string())?;
        fast.push(t.elapsed());
        let t = Instant::now();
        let o = exhaustive_oracle(&team, &departing, &model, &net, &everyone, 2, DEFAULT_ORACLE_BUDGET)
            .map_err(|e| e.to_string())?;
        slow.push(t.elapsed());
        agree &= r.similarity <= o.similarity;
    }
    let (f, s) = (median(fast), median(slow));
    let ratio = s.as_secs_f64() / f.as_secs_f64();
    let secs = start.elapsed().as_secs_f64();
    ensure!(agree, "within-cluster score exceeded the whole-network optimum");
    ensure!(ratio >= 20.0, "speedup {ratio:.1}x (cluster {f:?}, whole network {s:?})");
    ensure!(secs < 300.0, "took {secs:.1} s");
    Ok(format!("speedup {ratio:.1}x (cluster {f:?}, whole network {s:?}), {secs:.2} s"))
}

fn random_walk_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = KernelConfig { decay: 0.1, ..KernelConfig::default() };
    let (mut series_err, mut dense_err) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let g1 = random_graph(&mut rng, 4, 3, 0.6, 0.5);
        let g2 = random_graph(&mut rng, 4, 3, 0.6, 0.5);
        let k = random_walk_kernel(&g1, &g2, &cfg).map_err(|e| e.to_string())?;
        series_err = series_err.max((k - rw_series(&g1, &g2, 0.1, 50)[49]).abs());
        dense_err = dense_err.max((k - rw_dense(&g1, &g2, 0.1)).abs());
    }
    ensure!(series_err < 1e-8, "series error {series_err:.2e}");
    ensure!(dense_err < 1e-10, "dense error {dense_err:.2e}");
    Ok(format!("50 pairs, max error vs series {series_err:.2e}, vs dense solve {dense_err:.2e}"))
}

fn loss_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let logits = Array2::from_shape_fn((50, 7), |_| rng.gen_range(-30.0..30.0));
    let rows = softmax_rows(&logits).sum_axis(Axis(1));
    let row_err = rows.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    ensure!(row_err < 1e-9, "softmax row sum off by {row_err:.2e}");

    let c = 5;
    let cluster_of: Vec<usize> = (0..20).map(|i| i % c).collect();
    let hard = one_hot(&cluster_of, c);
    let uniform = Array2::from_elem((20, c), 1.0 / c as f64);
    let (h0, hu) = (clustering_loss(hard.view()), clustering_loss(uniform.view()));
    ensure!(h0.abs() < 1e-12, "one-hot entropy {h0}");
    ensure!((hu - (c as f64).ln()).abs() < 1e-12, "uniform entropy {hu} vs ln {c}");

    // block adjacency equal to C·Cᵀ for its one-hot C
    let blocks: Vec<usize> = (0..12).map(|i| i / 4).collect();
    let cb = one_hot(&blocks, 3);
    let a = Array2::from_shape_fn((12, 12), |(i, j)| f64::from(blocks[i] == blocks[j]));
    let s = structural_loss(a.view(), cb.view()).map_err(|e| e.to_string())?;
    ensure!(s == 0.0, "structural loss {s} on the block fixture");

    let data = synthetic(24, 8, 4, 0.8, 0.05, 8, 6);
    let cfg = EvalConfig { percentages: vec![0.25, 0.5], seeds: vec![0, 1], ..EvalConfig::default() };
    let report = run_comparison(&data.network, &data.teams, &[&IdentityReplacement], &cfg).map_err(|e| e.to_string())?;
    let m = &report.methods["identity"];
    ensure!(m.cases > 0, "no identity cases completed");
    ensure!(
        m.mean_ged == Some(0.0) && m.mean_d1 == Some(0.0) && m.mean_d2 == Some(0.0),
        "identity means {:?} {:?} {:?}",
        m.mean_ged,
        m.mean_d1,
        m.mean_d2
    );
    for case in &report.cases {
        for o in &case.outcomes {
            ensure!(
                [o.ged, o.d1, o.d2].iter().all(|v| v.is_none_or(|x| x == 0.0)),
                "team {:?}: {:?}",
                case.team,
                o
            );
        }
    }
    Ok(format!(
        "softmax {row_err:.1e}, entropy 0 / ln {c}, structural 0, identity disparities 0 over {} cases",
        m.cases
    ))
}

/// Fraction of nodes whose cluster's majority block is their own block.
fn purity(hard: &[usize], blocks: &[usize]) -> f64 {
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&h, &b) in hard.iter().zip(blocks) {
        *counts.entry(h).or_default().entry(b).or_default() += 1;
    }
    let hits: usize = counts.values().map(|m| m.values().max().copied().unwrap_or(0)).sum();
    hits as f64 / hard.len() as f64
}

fn training_descent() -> Outcome {
    let start = Instant::now();
    let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let cfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
    let (tr, va, _) = split_teams(&data.teams, cfg.split, cfg.seed).map_err(|e| e.to_string())?;
    let out = train(&data.network, &tr, &va, &cfg).map_err(|e| e.to_string())?;
    let (first, last) = (out.log[0].total, out.log.last().unwrap().total);
    let final_model = ClusterModel::build(&data.network, &out.final_params).unwrap();
    let kept_model = ClusterModel::build(&data.network, &out.params).unwrap();
    let p = purity(final_model.hard_assign(), &data.blocks);
    let kept = purity(kept_model.hard_assign(), &data.blocks);
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "total {first:.1} -> {last:.1}, final-epoch purity {p:.3} (kept epoch {} purity {kept:.3}), {secs:.1} s",
        out.best_epoch
    );
    ensure!(last < first, "loss did not drop: {detail}");
    ensure!(p >= 0.8, "purity too low: {detail}");
    ensure!(secs < 300.0, "too slow: {detail}");
    Ok(detail)
}

fn feature_scaling() -> Outcome {
    let data = synthetic(40, 128, 4, 0.8, 0.05, 24, 8);
    // one or two departing members keeps the baseline's pool enumeration small
    let cfg = EvalConfig { percentages: vec![0.1, 0.25], seeds: vec![0, 1, 2], ..EvalConfig::default() };
    let tcfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
    let (tr, va, _) = split_teams(&data.teams, tcfg.split, tcfg.seed).map_err(|e| e.to_string())?;
    let mut kernel_ms = Vec::new();
    let mut genius_ms = Vec::new();
    let mut sizes = Vec::new();
    for d in [8, 32, 128] {
        let net = feature_subsample(&data.network, d, 8).map_err(|e| e.to_string())?;
        let out = train(&net, &tr, &va, &tcfg).map_err(|e| e.to_string())?;
        let model = ClusterModel::build(&net, &out.params).unwrap();
        sizes.push(model.containers().values().map(Vec::len).filter(|&s| s > 0).collect::<Vec<_>>());
        let genius = Genius { model, training_time: out.elapsed };
        let kernel = KernelBaseline::default();
        let report = run_comparison(&net, &data.teams, &[&genius, &kernel], &cfg).map_err(|e| e.to_string())?;
        genius_ms.push(report.timing["genius"].mean_inference_ms);
        kernel_ms.push(report.timing["kernel"].mean_inference_ms);
    }
    let (lo, hi) = genius_ms.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = hi / lo - 1.0;
    let detail = format!(
        "kernel ms {kernel_ms:.3?}, genius ms {genius_ms:.4?} (spread {:.0}%, cluster sizes {sizes:?})",
        spread * 100.0
    );
    ensure!(kernel_ms.windows(2).all(|w| w[1] > w[0]), "kernel time not increasing: {detail}");
    ensure!(spread < 0.5, "genius time varies too much: {detail}");
    Ok(detail)
}

fn determinism() -> Outcome {
    let data = synthetic(32, 8, 4, 0.8, 0.05, 16, 9);
    let cfg = TrainConfig { epochs: 40, hidden: vec![8, 8], ..TrainConfig::default() };
    let run = || -> Result<(String, String, String, String), Error> {
        let (tr, va, te) = split_teams(&data.teams, cfg.split, cfg.seed)?;
        let out = train(&data.network, &tr, &va, &cfg)?;
        let model = ClusterModel::build(&data.network, &out.params)?;
        let mut recs = Vec::new();
        for team in data.teams.iter().filter(|t| t.len() > 2) {
            let departing = Team::new(team.members()[..1].to_vec(), data.network.n())?;
            let r = recommend(team, &departing, &model, &data.network);
            recs.push(r.map(|r| (r.subteam, r.similarity.to_bits())).map_err(|e| e.to_string()));
        }
        let genius = Genius { model, training_time: out.elapsed };
        let eval = EvalConfig { percentages: vec![0.5], seeds: vec![0, 1], ..EvalConfig::default() };
        let report = run_comparison(&data.network, &te, &[&genius, &KernelBaseline::default()], &eval)?.without_timing();
        Ok((checkpoint_to_string(&out.params), format!("{recs:?}"), report.to_json(), report.to_csv()))
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    ensure!(a.0 == b.0, "checkpoints differ");
    ensure!(a.1 == b.1, "recommendations differ");
    ensure!(a.2 == b.2 && a.3 == b.3, "reports differ");
    Ok(format!("checkpoint {} bytes, report {} bytes, identical across runs", a.0.len(), a.2.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient correctness", gradients),
        ("replacement never larger than departure", subteam_size_bound),
        ("within-cluster search equals cluster oracle", oracle_equivalence),
        ("within-cluster speedup at n=200", cluster_speedup),
        ("random-walk kernel vs oracles", random_walk_oracles),
        ("loss analytics and identity disparities", loss_analytics),
        ("training descent and purity", training_descent),
        ("feature-scaling timing trend", feature_scaling),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(msg) => println!("PASS {}. {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}. {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

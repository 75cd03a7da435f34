//! `subteam`: generate data, train the encoder, recommend replacements and
//! run method comparisons.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use subteam_core::encoder::{load_checkpoint, save_checkpoint, ClusterModel};
use subteam_core::eval::{
    feature_subsample, run_comparison, EvalConfig, Genius, IdentityReplacement, KernelBaseline, ReplacementMethod,
};
use subteam_core::graph::{
    generate_synthetic, load_network, load_teams, save_network, save_teams, SocialNetwork, SyntheticConfig, Team,
};
use subteam_core::recommender::recommend;
use subteam_core::trainer::{split_teams, train, TrainConfig};
use subteam_core::Error;

use config::{EvaluateArgs, FileConfig, RecommendArgs, SynthArgs, TrainArgs};

const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.tsv";
const TEAMS: &str = "teams.txt";
const MANIFEST: &str = "manifest.json";
const CHECKPOINT: &str = "checkpoint.json";
const TRAIN_LOG: &str = "train_log.jsonl";
const TRAIN_SUMMARY: &str = "train_summary.json";
const REPORT: &str = "report.json";
const CASES: &str = "cases.csv";

#[derive(Parser)]
#[command(name = "subteam", version, about = "Subteam replacement over clustered team embeddings")]
struct Cli {
    /// TOML file with [synth], [train], [recommend] and [evaluate] tables;
    /// command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-partition network, its teams and a manifest.
    Synth(SynthArgs),
    /// Train the encoder and write a checkpoint plus the epoch log.
    Train(TrainArgs),
    /// Recommend replacements for departing team members.
    Recommend(RecommendArgs),
    /// Compare replacement methods on the held-out teams.
    Evaluate(EvaluateArgs),
}

/// Anything that ends a run early, mapped onto the exit code.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Invalid(String),
    Io(PathBuf, std::io::Error),
    Empty(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::NoCandidate { .. }) => 3,
            Failure::Core(
                Error::Validation(_)
                | Error::Contract(_)
                | Error::Parse { .. }
                | Error::Checkpoint(_)
                | Error::BudgetExceeded { .. }
                | Error::CapExceeded { .. },
            )
            | Failure::Invalid(_) => 2,
            Failure::Empty(_) => 4,
            Failure::Core(_) | Failure::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Invalid(m) | Failure::Empty(m) => f.write_str(m),
            Failure::Io(p, e) => write!(f, "i/o error on {}: {e}", p.display()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn write(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Io(path.into(), e))
}

fn create_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.into(), e))
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.into(), e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let file = match &cli.config {
        Some(path) => toml::from_str::<FileConfig>(&read(path)?)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?,
        None => FileConfig::default(),
    };
    if let Some(w) = cli.workers.or(file.workers) {
        if w == 0 {
            return Err(Failure::Invalid("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Invalid(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a.or(file.synth)),
        Command::Train(a) => cmd_train(a.or(file.train)),
        Command::Recommend(a) => cmd_recommend(a.or(file.recommend)),
        Command::Evaluate(a) => cmd_evaluate(a.or(file.evaluate)),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Outcome<T> {
    value.ok_or_else(|| Failure::Invalid(format!("missing --{flag} (flag or config file)")))
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'a SyntheticConfig,
    nodes: usize,
    features: usize,
    teams: usize,
    files: [&'static str; 3],
    /// Planted block of each node.
    blocks: &'a [usize],
}

fn cmd_synth(a: SynthArgs) -> Outcome<()> {
    let d = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        n: a.n.unwrap_or(d.n),
        d: a.d.unwrap_or(d.d),
        blocks: a.clusters.unwrap_or(d.blocks),
        p_in: a.p_in.unwrap_or(d.p_in),
        p_out: a.p_out.unwrap_or(d.p_out),
        teams: a.teams.unwrap_or(d.teams),
        seed: a.seed.unwrap_or(d.seed),
    };
    cfg.validate()?;
    let out = required(a.out, "out")?;
    let data = generate_synthetic(&cfg)?;
    create_dir(&out)?;
    save_network(&data.network, out.join(EDGES), out.join(FEATURES))?;
    save_teams(&data.teams, out.join(TEAMS))?;
    let manifest = Manifest {
        generator: &cfg,
        nodes: data.network.n(),
        features: data.network.d(),
        teams: data.teams.len(),
        files: [EDGES, FEATURES, TEAMS],
        blocks: &data.blocks,
    };
    write(&out.join(MANIFEST), &to_json(&manifest))?;
    println!(
        "wrote {} nodes, {} teams to {}",
        data.network.n(),
        data.teams.len(),
        out.display()
    );
    Ok(())
}

fn load_data(dir: &Path) -> Outcome<(SocialNetwork, Vec<Team>)> {
    let net = load_network(dir.join(EDGES), dir.join(FEATURES))?;
    let teams = load_teams(dir.join(TEAMS), &net)?;
    Ok((net, teams))
}

/// Optional feature subsampling shared by training and evaluation so both
/// see the same columns.
fn select_features(net: SocialNetwork, features: Option<usize>, seed: u64) -> Outcome<SocialNetwork> {
    match features {
        Some(k) => Ok(feature_subsample(&net, k, seed)?),
        None => Ok(net),
    }
}

#[derive(Serialize, Deserialize)]
struct TrainSummary {
    config: TrainConfig,
    /// Feature subset the model was trained on, if any.
    features: Option<usize>,
    feature_seed: u64,
    best_epoch: usize,
    train_teams: usize,
    validation_teams: usize,
    test_teams: usize,
    timing: TrainTiming,
}

#[derive(Serialize, Deserialize)]
struct TrainTiming {
    training_ms: f64,
}

fn cmd_train(a: TrainArgs) -> Outcome<()> {
    let d = TrainConfig::default();
    let mut weights = match a.preset.as_deref() {
        None => d.weights,
        Some(p) => config::preset(p)?,
    };
    weights.b1 = a.b1.unwrap_or(weights.b1);
    weights.b2 = a.b2.unwrap_or(weights.b2);
    weights.b3 = a.b3.unwrap_or(weights.b3);
    let mut split = d.split;
    split.val = a.val_fraction.unwrap_or(split.val);
    split.test = a.test_fraction.unwrap_or(split.test);
    split.train = 1.0 - split.val - split.test;
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        weights,
        subteam_fraction_range: (
            a.subteam_min.unwrap_or(d.subteam_fraction_range.0),
            a.subteam_max.unwrap_or(d.subteam_fraction_range.1),
        ),
        seed: a.seed.unwrap_or(d.seed),
        split,
        hidden: a.hidden.unwrap_or(d.hidden),
        clusters: a.clusters.or(d.clusters),
    };
    cfg.validate()?;
    let data = required(a.data, "data")?;
    let out = required(a.out, "out")?;
    let feature_seed = a.feature_seed.unwrap_or(0);

    let (net, teams) = load_data(&data)?;
    let net = select_features(net, a.features, feature_seed)?;
    let (tr, va, te) = split_teams(&teams, cfg.split, cfg.seed)?;
    let outcome = train(&net, &tr, &va, &cfg)?;
    create_dir(&out)?;
    save_checkpoint(&outcome.params, out.join(CHECKPOINT))?;
    write(&out.join(TRAIN_LOG), &outcome.log_lines())?;
    let summary = TrainSummary {
        config: cfg,
        features: a.features,
        feature_seed,
        best_epoch: outcome.best_epoch,
        train_teams: tr.len(),
        validation_teams: va.len(),
        test_teams: te.len(),
        timing: TrainTiming {
            training_ms: outcome.elapsed.as_secs_f64() * 1e3,
        },
    };
    write(&out.join(TRAIN_SUMMARY), &to_json(&summary))?;
    let last = outcome.log.last().expect("at least one epoch");
    println!(
        "trained {} epochs (kept epoch {}), final total loss {:.6}, checkpoint {}",
        summary.config.epochs,
        outcome.best_epoch,
        last.total,
        out.join(CHECKPOINT).display()
    );
    Ok(())
}

fn team_from(ids: Option<Vec<usize>>, flag: &str, n: usize) -> Outcome<Team> {
    let ids = required(ids, flag)?;
    Team::new(ids, n).map_err(|e| Failure::Invalid(format!("--{flag}: {e}")))
}

fn cmd_recommend(a: RecommendArgs) -> Outcome<()> {
    let data = required(a.data, "data")?;
    let checkpoint = required(a.checkpoint, "checkpoint")?;
    let (net, _) = load_data(&data)?;
    let params = load_checkpoint(&checkpoint)?;
    let net = select_features(net, a.features, a.feature_seed.unwrap_or(0))?;
    let team = team_from(a.team, "team", net.n())?;
    let departing = team_from(a.departing, "departing", net.n())?;
    if !departing.is_subset_of(&team) {
        return Err(Failure::Invalid("--departing must list members of --team".into()));
    }
    let model = ClusterModel::build(&net, &params)?;
    let res = recommend(&team, &departing, &model, &net)?;
    if a.json.unwrap_or(false) {
        println!("{}", serde_json::to_string(&res).expect("result serializes"));
    } else {
        let names: Vec<String> = res
            .subteam
            .iter()
            .map(|&v| match net.name(v) {
                Some(name) => format!("{v} ({name})"),
                None => v.to_string(),
            })
            .collect();
        println!("new members:         {}", names.join(", "));
        println!("similarity:          {:.6}", res.similarity);
        println!("candidates examined: {}", res.candidates_examined);
        println!("inference ms:        {:.3}", res.elapsed.as_secs_f64() * 1e3);
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Outcome<()> {
    let data = required(a.data, "data")?;
    let out = required(a.out, "out")?;
    let methods = a.methods.unwrap_or_else(|| vec!["genius".into(), "kernel".into()]);
    let defaults = EvalConfig::default();
    let percentages = match a.percent {
        Some(p) => p.iter().map(|v| v / 100.0).collect(),
        None => defaults.percentages.clone(),
    };
    let mut kernel = defaults.kernel;
    kernel.decay = a.decay.unwrap_or(kernel.decay);
    let cfg = EvalConfig {
        percentages,
        seeds: a.seeds.unwrap_or(defaults.seeds),
        kernel,
    };
    cfg.validate()?;

    let (net, teams) = load_data(&data)?;
    let needs_model = methods.iter().any(|m| m == "genius");
    let summary: Option<TrainSummary> = match &a.model {
        Some(dir) => Some(
            serde_json::from_str(&read(&dir.join(TRAIN_SUMMARY))?)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", dir.join(TRAIN_SUMMARY).display())))?,
        ),
        None if needs_model => return Err(Failure::Invalid("method genius needs --model".into())),
        None => None,
    };
    let (split, split_seed) = summary
        .as_ref()
        .map_or((TrainConfig::default().split, a.seed.unwrap_or(0)), |s| (s.config.split, s.config.seed));
    let features = a.features.or(summary.as_ref().and_then(|s| s.features));
    let feature_seed = a.feature_seed.or(summary.as_ref().map(|s| s.feature_seed)).unwrap_or(0);
    let net = select_features(net, features, feature_seed)?;
    let (_, _, test) = split_teams(&teams, split, split_seed)?;
    if test.is_empty() {
        return Err(Failure::Empty("the test split is empty".into()));
    }

    let mut owned: Vec<Box<dyn ReplacementMethod>> = Vec::new();
    for name in &methods {
        owned.push(match name.as_str() {
            "genius" => {
                let dir = a.model.as_ref().expect("checked above");
                let params = load_checkpoint(dir.join(CHECKPOINT))?;
                let training_ms = summary.as_ref().map_or(0.0, |s| s.timing.training_ms);
                Box::new(Genius {
                    model: ClusterModel::build(&net, &params)?,
                    training_time: Duration::from_secs_f64(training_ms / 1e3),
                })
            }
            "kernel" => {
                let mut k = KernelBaseline { cfg: cfg.kernel, ..KernelBaseline::default() };
                k.budget = a.budget.unwrap_or(k.budget);
                k.auto_decay = a.decay.is_none();
                Box::new(k)
            }
            "identity" => Box::new(IdentityReplacement),
            other => return Err(Failure::Invalid(format!("unknown method {other:?} (genius, kernel, identity)"))),
        });
    }
    let refs: Vec<&dyn ReplacementMethod> = owned.iter().map(|m| m.as_ref()).collect();
    let report = run_comparison(&net, &test, &refs, &cfg)?;
    create_dir(&out)?;
    write(&out.join(REPORT), &(report.to_json() + "\n"))?;
    write(&out.join(CASES), &report.to_csv())?;
    if report.completed_cases() == 0 {
        return Err(Failure::Empty(format!(
            "no case was completed by every method ({} refused or failed)",
            report.exclusions.incomplete_cases
        )));
    }
    println!("{:<10} {:>6} {:>9} {:>10} {:>10} {:>10} {:>12}", "method", "cases", "refusals", "GED", "D1", "D2", "infer ms");
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for (name, s) in &report.methods {
        let t = &report.timing[name];
        println!(
            "{:<10} {:>6} {:>9} {:>10} {:>10} {:>10} {:>12.3}",
            name,
            s.cases,
            s.refusals,
            fmt(s.mean_ged),
            fmt(s.mean_d1),
            fmt(s.mean_d2),
            t.mean_inference_ms
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

//! Flag sets shared by the command line and the TOML config file.
//!
//! Every field is optional so a flag can fall back to the file and the file
//! to the built-in default.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use subteam_core::objectives::LossWeights;

use crate::Failure;

macro_rules! fallback {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Fills every unset field from `other`.
            pub fn or(self, other: $ty) -> $ty {
                $ty { $($field: self.$field.or(other.$field)),* }
            }
        }
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub synth: SynthArgs,
    pub train: TrainArgs,
    pub recommend: RecommendArgs,
    pub evaluate: EvaluateArgs,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of planted blocks.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long)]
    pub teams: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fallback!(SynthArgs { n, d, clusters, p_in, p_out, teams, seed, out });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainArgs {
    /// Directory holding edges.tsv, features.tsv and teams.txt.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Directory for the checkpoint, log and summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Weight preset: dblp (1, 100, 1) or imdb (100, 100, 10).
    #[arg(long)]
    pub preset: Option<String>,
    /// Skill-loss weight; overrides the preset.
    #[arg(long)]
    pub b1: Option<f64>,
    /// Structural-loss weight; overrides the preset.
    #[arg(long)]
    pub b2: Option<f64>,
    /// Clustering-loss weight; overrides the preset.
    #[arg(long)]
    pub b3: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden layer widths, e.g. 64,64.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Cluster count (default ceil(sqrt(n)), at most 256).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Smallest fraction of a team drawn as a training subteam.
    #[arg(long)]
    pub subteam_min: Option<f64>,
    #[arg(long)]
    pub subteam_max: Option<f64>,
    /// Train on a random subset of this many feature columns.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub feature_seed: Option<u64>,
}

fallback!(TrainArgs {
    data,
    out,
    epochs,
    learning_rate,
    preset,
    b1,
    b2,
    b3,
    seed,
    hidden,
    clusters,
    val_fraction,
    test_fraction,
    subteam_min,
    subteam_max,
    features,
    feature_seed,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecommendArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Team member ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub team: Option<Vec<usize>>,
    /// Departing member ids, a subset of --team.
    #[arg(long, value_delimiter = ',')]
    pub departing: Option<Vec<usize>>,
    /// Must match the feature subset used in training.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub feature_seed: Option<u64>,
    /// Print the result as one JSON object.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub json: Option<bool>,
}

fallback!(RecommendArgs { data, checkpoint, team, departing, features, feature_seed, json });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training output directory (checkpoint and summary).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Methods to compare: genius, kernel, identity.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Percentages of each team to replace, e.g. 10,25.
    #[arg(long, value_delimiter = ',')]
    pub percent: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Evaluate on a random subset of this many feature columns
    /// (default: the subset the model was trained on).
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub feature_seed: Option<u64>,
    /// Split seed when no --model is given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed random-walk decay; by default it is chosen per case.
    #[arg(long)]
    pub decay: Option<f64>,
    /// Largest candidate count the kernel baseline may enumerate.
    #[arg(long)]
    pub budget: Option<u128>,
}

fallback!(EvaluateArgs {
    data,
    model,
    out,
    methods,
    percent,
    seeds,
    features,
    feature_seed,
    seed,
    decay,
    budget,
});

pub fn preset(name: &str) -> Result<LossWeights, Failure> {
    match name.to_ascii_lowercase().as_str() {
        "dblp" => Ok(LossWeights::DBLP),
        "imdb" => Ok(LossWeights::IMDB),
        other => Err(Failure::Invalid(format!("unknown weight preset {other:?} (dblp, imdb)"))),
    }
}

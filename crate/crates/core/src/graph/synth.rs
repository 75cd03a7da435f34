//! Planted-partition generator used for experiments and tests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SocialNetwork, Team};
use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Parameters of the planted-partition generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub teams: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 40,
            d: 16,
            blocks: 4,
            p_in: 0.9,
            p_out: 0.05,
            teams: 30,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.blocks == 0 || self.n == 0 || !self.n.is_multiple_of(self.blocks) {
            return bad(format!("block count {} must divide n = {}", self.blocks, self.n));
        }
        if self.d < self.blocks {
            return bad(format!("need at least one feature per block (d = {})", self.d));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!("probabilities must lie in [0,1]: p_in={}, p_out={}", self.p_in, self.p_out));
        }
        if self.p_out >= self.p_in {
            return bad(format!("p_out ({}) must be below p_in ({})", self.p_out, self.p_in));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub network: SocialNetwork,
    pub teams: Vec<Team>,
    /// Planted block of every node.
    pub blocks: Vec<usize>,
}

const FEATURES_PER_NODE: usize = 3;
const FEATURE_NOISE_PROB: f64 = 0.2;
const CROSS_BLOCK_MEMBER_PROB: f64 = 0.1;
const TEAM_SIZE: (usize, usize) = (3, 6);

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.blocks;
    let block_size = cfg.n / k;
    let blocks: Vec<usize> = (0..cfg.n).map(|i| i / block_size).collect();

    let mut edges = Vec::new();
    for i in 0..cfg.n {
        for j in (i + 1)..cfg.n {
            let p = if blocks[i] == blocks[j] { cfg.p_in } else { cfg.p_out };
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
                edges.push((j, i, 1.0));
            }
        }
    }
    let adjacency = Csr::from_triplets(cfg.n, cfg.n, edges, f64::max);

    // Block b owns feature columns [b*band, (b+1)*band).
    let band = cfg.d / k;
    let mut feats = Vec::new();
    for (i, &b) in blocks.iter().enumerate() {
        let picks = FEATURES_PER_NODE.min(band);
        for f in sample(&mut rng, band, picks).into_iter() {
            feats.push((i, b * band + f, 1.0));
        }
        if cfg.d > band && rng.gen_bool(FEATURE_NOISE_PROB) {
            let mut f = rng.gen_range(0..cfg.d - band);
            if f >= b * band {
                f += band;
            }
            feats.push((i, f, 1.0));
        }
    }
    let features = Csr::from_triplets(cfg.n, cfg.d, feats, |a, b| a + b);

    let mut teams = Vec::with_capacity(cfg.teams);
    for _ in 0..cfg.teams {
        let home = rng.gen_range(0..k);
        let size = rng.gen_range(TEAM_SIZE.0..=TEAM_SIZE.1).min(block_size.max(2));
        let mut members: Vec<usize> = Vec::with_capacity(size);
        let mut attempts = 0;
        while members.len() < size && attempts < 100 * size {
            attempts += 1;
            let block = if k > 1 && rng.gen_bool(CROSS_BLOCK_MEMBER_PROB) {
                let other = rng.gen_range(0..k - 1);
                if other >= home {
                    other + 1
                } else {
                    other
                }
            } else {
                home
            };
            let node = block * block_size + rng.gen_range(0..block_size);
            if !members.contains(&node) {
                members.push(node);
            }
        }
        teams.push(Team::new(members, cfg.n)?);
    }

    Ok(SyntheticData {
        network: SocialNetwork::new(adjacency, features)?,
        teams,
        blocks,
    })
}

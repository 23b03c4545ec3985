//! Synthetic attributed graphs for sanity checks and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Dense;

/// Stochastic block model with block-indicator features plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            block_sizes: vec![100, 100],
            p_in: 0.10,
            p_out: 0.01,
            feature_noise: 0.5,
            seed: 0,
        }
    }
}

/// Samples an SBM graph. Node `i` belongs to the block it falls in when
/// blocks are laid out consecutively; labels are block ids.
pub fn stochastic_block_model(cfg: &SbmConfig) -> Result<Graph> {
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let noise = Normal::new(0.0, cfg.feature_noise)
        .map_err(|e| Error::Argument(format!("feature noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let block: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = block.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block[u] == block[v] { cfg.p_in } else { cfg.p_out };
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let k = cfg.block_sizes.len();
    let mut features = Dense::zeros(n, k);
    for (i, &b) in block.iter().enumerate() {
        for (j, x) in features.row_mut(i).iter_mut().enumerate() {
            *x = if j == b { 1.0 } else { 0.0 } + noise.sample(&mut rng);
        }
    }
    Graph::from_edges(features, edges)?.with_labels(block.into_iter().map(Some).collect())
}

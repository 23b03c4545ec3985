//! Leakage-safe link prediction: hold out 40% of the edges, train the
//! encoder on what remains, then score held-out edges against sampled
//! non-edges with a logistic probe on concatenated endpoint embeddings.

use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::{evaluate_lp, EmbeddingView, PprConfig, ProbeConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = stochastic_block_model(&SbmConfig { block_sizes: vec![100, 100], p_in: 0.12, ..Default::default() })?;
    let cfg = TrainConfig {
        epochs: 100,
        embedding_dim: 16,
        patience: None,
        ppr: PprConfig { subgraph_size: 10, ..Default::default() },
        ..Default::default()
    };
    let report = evaluate_lp(&g, &cfg, EmbeddingView::Global, 0.4, &[0, 1, 2], &ProbeConfig::default())?;
    for row in &report.rows {
        println!("{:<9} {:.4} ± {:.4}  per split {:?}", row.metric, row.mean, row.std, row.values);
    }
    Ok(())
}

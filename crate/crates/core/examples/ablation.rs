//! Sweeps the three ablation axes of the method on one synthetic graph:
//! subgraph size, subgraph sampler and which loss terms are active.
//!
//! ```text
//! cargo run --release --example ablation [size|sampler|loss]
//! ```

use lsgcl::cli::{run_nc_point, sweep_points, RunConfig, Sweep};
use lsgcl::synth::{stochastic_block_model, SbmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sweeps: Vec<Sweep> = match std::env::args().nth(1) {
        Some(s) => vec![s.parse()?],
        None => vec![Sweep::SubgraphSize, Sweep::Sampler, Sweep::LossMode],
    };
    let g = stochastic_block_model(&SbmConfig {
        block_sizes: vec![80, 80, 80],
        p_in: 0.08,
        p_out: 0.01,
        feature_noise: 1.5,
        seed: 1,
    })?;
    let mut cfg = RunConfig::default();
    cfg.train.epochs = 100;
    cfg.train.embedding_dim = 16;
    cfg.train.patience = None;
    cfg.train.ppr.subgraph_size = 10;
    cfg.sweep_sizes = vec![2, 5, 10, 20];
    cfg.seeds = 5;

    for sweep in sweeps {
        cfg.sweep = sweep;
        println!("sweep {}", sweep.as_str());
        for (label, point) in sweep_points(&cfg) {
            let acc = run_nc_point(&g, &point)?;
            println!("  {label:<16} accuracy {:.4} ± {:.4}", acc.mean, acc.std);
        }
    }
    Ok(())
}

//! Trains the encoder on a two-block stochastic block model, saves the
//! loss trace, checkpoint and embeddings, and reports how well the blocks
//! separate.
//!
//! ```text
//! cargo run --release --example train_sbm [OUT_DIR]
//! ```

use std::path::PathBuf;

use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::trainer::{train_from, write_embeddings, write_loss_trace};
use lsgcl::{export_embeddings, init_params, precompute_subgraphs, EmbeddingView, PprConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lsgcl-train-sbm"));
    std::fs::create_dir_all(&out_dir)?;

    let g = stochastic_block_model(&SbmConfig::default())?;
    let cfg = TrainConfig {
        epochs: 100,
        embedding_dim: 16,
        patience: None,
        ppr: PprConfig { subgraph_size: 10, ..Default::default() },
        ..Default::default()
    };
    let subs = precompute_subgraphs(&g, &cfg.ppr, cfg.sampler)?;
    let init = init_params(g.num_features(), cfg.embedding_dim, cfg.seed)?;
    let out = train_from(&g, &subs, &cfg, init, |epoch, loss| {
        if (epoch + 1) % 20 == 0 {
            println!("epoch {:3}  loss {loss:.5}", epoch + 1);
        }
    })?;

    write_loss_trace(&out_dir.join("loss.csv"), &out.loss_trace)?;
    out.params.write_checkpoint(&out_dir.join("checkpoint.txt"))?;
    let emb = export_embeddings(&g, &subs, &out.params, EmbeddingView::Global)?;
    write_embeddings(&out_dir.join("embeddings.txt"), &emb)?;

    // Distance between block centroids relative to the spread inside blocks.
    let labels = g.labels().unwrap();
    let d = emb.cols();
    let mut centroid = vec![vec![0.0; d]; 2];
    for (i, row) in emb.iter_rows().enumerate() {
        let c = labels[i].unwrap();
        centroid[c].iter_mut().zip(row).for_each(|(a, x)| *a += x / 100.0);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let spread = emb.iter_rows().enumerate().map(|(i, r)| dist(r, &centroid[labels[i].unwrap()])).sum::<f64>() / 200.0;
    println!(
        "centroid gap {:.3}, mean within-block distance {spread:.3}; artifacts in {}",
        dist(&centroid[0], &centroid[1]),
        out_dir.display()
    );
    Ok(())
}

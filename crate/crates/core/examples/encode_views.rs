//! One hand-driven optimization step: encode the three views of a batch,
//! score them with the multi-level triplet loss, backpropagate to the
//! encoder parameters and apply Adam.

use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::{
    adam_step, backward, encode_views, init_params, multi_level_loss, precompute_subgraphs, sample_negatives,
    AdamState, LossConfig, PprConfig, SamplerKind, SubgraphSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = stochastic_block_model(&SbmConfig { block_sizes: vec![30, 30], ..Default::default() })?;
    let subs = precompute_subgraphs(&g, &PprConfig { subgraph_size: 8, ..Default::default() }, SamplerKind::Rank)?;
    let mut params = init_params(g.num_features(), 8, 0)?;
    let mut adam = AdamState::new(&params, 0.9, 0.999, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let batch: Vec<&SubgraphSpec> = (0..16).map(|t| subs.get(t)).collect();
    let loss_cfg = LossConfig::default();
    for step in 0..5 {
        let views = encode_views(&g, &batch, &params)?;
        let neg = sample_negatives(batch.len(), &mut rng)?;
        let out = multi_level_loss(&views, &neg, &loss_cfg)?;
        let grads = backward(&views, &out.grads, &params)?;
        let norms: Vec<String> = grads
            .blocks()
            .iter()
            .map(|(name, g)| format!("{name} {:.2e}", g.iter().map(|x| x * x).sum::<f64>().sqrt()))
            .collect();
        println!(
            "step {step}: loss {:.5} (node-subgraph {:.4}, node-global {:.4}, global-subgraph {:.4}); |grad| {}",
            out.loss,
            out.terms.node_subgraph,
            out.terms.node_global,
            out.terms.global_subgraph,
            norms.join(", ")
        );
        adam_step(&mut params, &grads, &mut adam, 0.01)?;
    }
    Ok(())
}

//! Personalized PageRank around one node, the top-K semantic subgraph it
//! induces, and how the other samplers pick members for the same node.
//!
//! Also prints the importance row as literally written in the method
//! description, `p (I − (1−p) Â)` instead of its inverse, to show why the
//! inverse is the one used for ranking.

use lsgcl::sampler::{literal_importance_row, sample_khop, sample_random_walk};
use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::{extract_subgraph, ppr_scores, precompute_subgraphs, rank_top_k, PprConfig, SamplerKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = stochastic_block_model(&SbmConfig { block_sizes: vec![50, 50], ..Default::default() })?;
    let target = 7;
    let cfg = PprConfig { subgraph_size: 10, ..Default::default() };

    let run = ppr_scores(&g, target, &cfg)?;
    println!("PPR from node {target}: {} iterations, converged {}", run.iterations, run.converged);
    let top = rank_top_k(&run.scores, target, cfg.subgraph_size);
    for &v in &top {
        println!("  node {v:3}  score {:.5}  degree {}", run.scores[v], g.degree(v));
    }

    let sub = extract_subgraph(&g, &top)?;
    let labels = g.labels().unwrap();
    let same = top.iter().filter(|&&v| labels[v] == labels[target]).count();
    println!("induced subgraph: {} members, {} edges, {same} share the target's block", sub.len(), sub.num_edges());

    let literal = literal_importance_row(&g, target, cfg.restart_prob)?;
    let negative = literal.iter().filter(|&&x| x < 0.0).count();
    println!(
        "literal row: {negative} negative entries, {} nonzero (one-hop only); the PPR row has {} nonzero",
        literal.iter().filter(|&&x| x != 0.0).count(),
        run.scores.iter().filter(|&&x| x > 0.0).count()
    );

    println!("k-hop (2 hops) members: {:?}", sample_khop(&g, target, 2, cfg.subgraph_size));
    let mut walk = sample_random_walk(&g, target, 100, 0);
    walk.truncate(cfg.subgraph_size);
    println!("random-walk members:    {walk:?}");

    let all = precompute_subgraphs(&g, &cfg, SamplerKind::Rank)?;
    let mean = all.iter().map(|s| s.len()).sum::<usize>() as f64 / all.len() as f64;
    println!("precomputed {} subgraphs, mean size {mean:.2}", all.len());
    Ok(())
}

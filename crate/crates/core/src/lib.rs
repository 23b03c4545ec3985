//! Self-supervised node embeddings from local semantic subgraphs.
//!
//! Each node gets a semantic subgraph made of itself plus its top-`K`
//! personalized-PageRank neighbors. A shared one-layer GCN encoder embeds
//! every node three ways: inside its subgraph, as the mean of its subgraph,
//! and inside the full graph. A margin-triplet loss pulls the three views of
//! a node together and pushes them away from another node's views.
//!
//! Modules follow the pipeline:
//!
//! - [`graph`]: CSR graph, text loaders, adjacency normalizations
//! - [`sampler`]: PPR scores, top-K ranking, subgraph extraction and caching
//! - [`encoder`]: GCN encoder, three-view forward pass, analytic backward
//! - [`contrastive`]: negative sampling and the multi-level triplet loss
//! - [`trainer`]: Adam and the training loop, embedding export
//! - [`eval`]: node-classification and link-prediction protocols
//! - [`cli`]: the `lsgcl` command-line driver

pub mod cli;
pub mod contrastive;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use contrastive::{multi_level_loss, sample_negatives, triplet_term, LossConfig, LossMode};
pub use encoder::{backward, encode, encode_views, init_params, EmbeddingViews, EncoderParams, ParamGrads, ViewEncoder, ViewGrads};
pub use error::{Error, Result};
pub use eval::{evaluate_lp, evaluate_lp_with, evaluate_nc, split_edges, split_nodes, train_linear_probe, MetricReport, ProbeConfig};
pub use graph::{column_normalized_adjacency, load_edge_list, normalize_adjacency, Graph, NormalizedAdjacency};
pub use linalg::{CsrMatrix, Dense};
pub use sampler::{extract_subgraph, ppr_scores, precompute_subgraphs, rank_top_k, PprConfig, SamplerKind, SubgraphSet, SubgraphSpec};
pub use trainer::{adam_step, export_embeddings, train, AdamState, EmbeddingView, TrainConfig};

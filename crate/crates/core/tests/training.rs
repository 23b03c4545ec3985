mod common;

use lsgcl::synth::{stochastic_block_model, SbmConfig};
use lsgcl::trainer::{read_embeddings, train_from, write_embeddings};
use lsgcl::{
    adam_step, export_embeddings, init_params, precompute_subgraphs, train, AdamState, Dense, EmbeddingView,
    EncoderParams, Graph, LossConfig, ParamGrads, PprConfig, SamplerKind, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use common::ScalarAdam;

fn scalar_params(values: [f64; 4]) -> EncoderParams {
    EncoderParams {
        gcn_weight: Dense::from_vec(1, 1, vec![values[0]]).unwrap(),
        prelu_slope: values[1],
        mlp_weight: Dense::from_vec(1, 1, vec![values[2]]).unwrap(),
        mlp_bias: vec![values[3]],
    }
}

fn scalar_grads(g: [f64; 4]) -> ParamGrads {
    ParamGrads {
        gcn_weight: Dense::from_vec(1, 1, vec![g[0]]).unwrap(),
        prelu_slope: g[1],
        mlp_weight: Dense::from_vec(1, 1, vec![g[2]]).unwrap(),
        mlp_bias: vec![g[3]],
    }
}

#[test]
fn adam_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seq in 0..1000 {
        let lr = rng.gen_range(1e-4..1e-1);
        let (b1, b2) = (rng.gen_range(0.5..0.99), rng.gen_range(0.9..0.9999));
        let eps = [1e-8, 1e-6, 1e-3][seq % 3];
        let mut x = [0.0; 4].map(|_: f64| rng.gen_range(-1.0..1.0));
        let mut params = scalar_params(x);
        let mut state = AdamState::new(&params, b1, b2, eps);
        let mut refs = [(); 4].map(|_| ScalarAdam::new());
        for _ in 0..rng.gen_range(1..60) {
            let g = [0.0; 4].map(|_: f64| rng.gen_range(-3.0..3.0) * 10f64.powi(rng.gen_range(-3..2)));
            adam_step(&mut params, &scalar_grads(g), &mut state, lr).unwrap();
            for i in 0..4 {
                x[i] = refs[i].step(x[i], g[i], lr, b1, b2, eps);
            }
            let got: Vec<f64> = params.blocks().iter().map(|(_, v)| v[0]).collect();
            for i in 0..4 {
                assert!((got[i] - x[i]).abs() <= 1e-12, "sequence {seq} coordinate {i}");
            }
        }
    }
}

fn sbm() -> Graph {
    stochastic_block_model(&SbmConfig { block_sizes: vec![40, 40], p_in: 0.15, p_out: 0.01, seed: 3, ..Default::default() }).unwrap()
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        embedding_dim: 8,
        patience: None,
        ppr: PprConfig { subgraph_size: 6, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let g = sbm();
    let cfg = TrainConfig { learning_rate: 0.0, seed: 4, ..small_config(5) };
    let subs = precompute_subgraphs(&g, &cfg.ppr, cfg.sampler).unwrap();
    let out = train(&g, &subs, &cfg).unwrap();
    assert_eq!(out.params, init_params(g.num_features(), 8, 4).unwrap());
    assert_eq!(out.loss_trace.len(), 5);
}

#[test]
fn training_is_deterministic_and_thread_count_independent() {
    let g = sbm();
    let cfg = TrainConfig { batch_size: Some(16), seed: 9, ..small_config(6) };
    let subs = precompute_subgraphs(&g, &cfg.ppr, cfg.sampler).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train(&g, &subs, &cfg)).unwrap()
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!(a.params, b.params);
    assert_eq!(a.loss_trace, c.loss_trace);
    assert_eq!(a.params, c.params);
    let other = train(&g, &subs, &TrainConfig { seed: 10, ..cfg.clone() }).unwrap();
    assert_ne!(other.params, a.params);
}

#[test]
fn loss_trace_bounds_and_decrease() {
    let g = sbm();
    for (margin, mode) in [(0.5, lsgcl::LossMode::Full), (0.35, lsgcl::LossMode::NsOnly), (1.0, lsgcl::LossMode::NgOnly)] {
        let cfg = TrainConfig { loss: LossConfig { margin, mode, ..Default::default() }, ..small_config(50) };
        let subs = precompute_subgraphs(&g, &cfg.ppr, cfg.sampler).unwrap();
        let out = train(&g, &subs, &cfg).unwrap();
        let tr = &out.loss_trace;
        assert!(tr.iter().all(|&l| (0.0..1.0 + margin).contains(&l)));
        let first: f64 = tr[..10].iter().sum::<f64>() / 10.0;
        let last: f64 = tr[tr.len() - 10..].iter().sum::<f64>() / 10.0;
        assert!(last < first, "{mode}: {first} -> {last}");
        for view in [EmbeddingView::Global, EmbeddingView::Subgraph] {
            let emb = export_embeddings(&g, &subs, &out.params, view).unwrap();
            assert!(emb.all_finite());
            assert!(emb.iter_rows().all(|r| r.iter().any(|v| v.abs() > 0.0)));
        }
    }
}

/// Replays the stopping rule on a trace: index of the epoch after which a
/// run with this patience stops, if it does.
fn stop_epoch(trace: &[f64], patience: usize) -> Option<usize> {
    let mut best = f64::INFINITY;
    let mut since = 0;
    for (e, &l) in trace.iter().enumerate() {
        if l < best {
            best = l;
            since = 0;
        } else {
            since += 1;
            if since >= patience {
                return Some(e);
            }
        }
    }
    None
}

#[test]
fn patience_stops_after_non_improving_epochs() {
    let g = sbm();
    // Without updates the loss only moves with the resampled negatives, so
    // improvements stall quickly.
    let cfg = TrainConfig { learning_rate: 0.0, ..small_config(200) };
    let subs = precompute_subgraphs(&g, &cfg.ppr, cfg.sampler).unwrap();
    let full = train(&g, &subs, &cfg).unwrap().loss_trace;
    assert_eq!(full.len(), 200);
    let patience = 3;
    let stop = stop_epoch(&full, patience).expect("a flat run stalls");
    let init = init_params(g.num_features(), 8, 0).unwrap();
    let mut seen = Vec::new();
    let cfg = TrainConfig { patience: Some(patience), ..cfg };
    let out = train_from(&g, &subs, &cfg, init, |e, l| seen.push((e, l))).unwrap();
    assert_eq!(out.loss_trace, full[..=stop]);
    assert_eq!(seen.len(), stop + 1);
}

#[test]
fn every_sampler_trains_and_exports() {
    let g = sbm();
    for sampler in [SamplerKind::Rank, SamplerKind::KHop { hops: 1 }, SamplerKind::RandomWalk { walk_len: 20, seed: 2 }] {
        let cfg = TrainConfig { sampler, ..small_config(3) };
        let subs = precompute_subgraphs(&g, &cfg.ppr, sampler).unwrap();
        let out = train(&g, &subs, &cfg).unwrap();
        let emb = export_embeddings(&g, &subs, &out.params, EmbeddingView::Concat).unwrap();
        assert_eq!(emb.shape(), (80, 16));
    }
}

#[test]
fn embedding_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Vec<f64> = (0..35).map(|_| rng.gen_range(-1e3..1e3) * 10f64.powi(rng.gen_range(-20..20))).collect();
    let emb = Dense::from_vec(7, 5, data).unwrap();
    let path = dir.path().join("emb.txt");
    write_embeddings(&path, &emb).unwrap();
    assert_eq!(read_embeddings(&path).unwrap(), emb);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("7 5\n0 "));
}

#[test]
fn tiny_graphs_are_rejected() {
    let g = Graph::from_edges(Dense::zeros(1, 1), []).unwrap();
    let subs = precompute_subgraphs(&g, &PprConfig::default(), SamplerKind::Rank).unwrap();
    assert!(train(&g, &subs, &small_config(1)).is_err());
}

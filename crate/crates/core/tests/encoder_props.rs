mod common;

use lsgcl::sampler::extract_subgraph_around;
use lsgcl::{
    encode, encode_views, export_embeddings, extract_subgraph, init_params, normalize_adjacency,
    precompute_subgraphs, Dense, EmbeddingView, EncoderParams, Graph, PprConfig, SamplerKind, ViewEncoder,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{dense_adjacency, erdos_renyi, naive_encode, to_rows};

fn params_with_bias(f: usize, d: usize, seed: u64) -> EncoderParams {
    let mut p = init_params(f, d, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    p.mlp_bias.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    p.prelu_slope = 0.3;
    p
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn encode_matches_naive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..30 {
        let n = rng.gen_range(1..20);
        let g = erdos_renyi(n, 0.25, 4, &mut rng);
        let p = params_with_bias(4, 3, rng.gen());
        let got = encode(&normalize_adjacency(&g), g.features(), &p).unwrap();
        let want = naive_encode(&dense_adjacency(&g), &to_rows(g.features()), &p);
        for i in 0..n {
            assert!(max_abs_diff(got.h.row(i), &want[i]) <= 1e-12);
        }
        let again = encode(&normalize_adjacency(&g), g.features(), &p).unwrap();
        assert_eq!(again.h, got.h);
    }
}

#[test]
fn relabeling_subgraph_members_leaves_views_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let g = erdos_renyi(12, 0.3, 3, &mut rng);
        let p = params_with_bias(3, 4, rng.gen());
        let mut members: Vec<usize> = (0..12).collect();
        members.shuffle(&mut rng);
        members.truncate(rng.gen_range(1..=12));
        let target = members[0];
        let base = extract_subgraph(&g, &members).unwrap();
        members.shuffle(&mut rng);
        let moved = extract_subgraph_around(&g, &members, target).unwrap();
        let a = encode_views(&g, &[&base], &p).unwrap();
        let b = encode_views(&g, &[&moved], &p).unwrap();
        assert!(max_abs_diff(a.h_sub.row(0), b.h_sub.row(0)) <= 1e-12);
        assert!(max_abs_diff(a.g_sub.row(0), b.g_sub.row(0)) <= 1e-12);
        assert_eq!(a.h_glob, b.h_glob);
    }
}

#[test]
fn whole_graph_as_subgraph_reproduces_global_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(2..15);
        let g = erdos_renyi(n, 0.3, 3, &mut rng);
        let p = params_with_bias(3, 5, rng.gen());
        let global = encode(&normalize_adjacency(&g), g.features(), &p).unwrap().h;
        let all: Vec<usize> = (0..n).collect();
        for t in 0..n {
            let s = extract_subgraph_around(&g, &all, t).unwrap();
            let v = encode_views(&g, &[&s], &p).unwrap();
            assert_eq!(v.h_sub.row(0), v.h_glob.row(0));
            assert_eq!(v.h_glob.row(0), global.row(t));
            let mean: Vec<f64> = (0..5).map(|j| (0..n).map(|i| global.get(i, j)).sum::<f64>() / n as f64).collect();
            assert!(max_abs_diff(v.g_sub.row(0), &mean) <= 1e-12);
        }
    }
}

#[test]
fn singleton_and_symmetric_pair_pool_to_the_target_row() {
    let x = Dense::from_rows(&[vec![0.5, -1.0], vec![0.5, -1.0], vec![2.0, 3.0]]).unwrap();
    let g = Graph::from_edges(x, [(0, 1), (1, 2)]).unwrap();
    let p = params_with_bias(2, 3, 9);
    let single = extract_subgraph(&g, &[2]).unwrap();
    let pair = extract_subgraph(&g, &[0, 1]).unwrap();
    let v = encode_views(&g, &[&single, &pair], &p).unwrap();
    assert_eq!(v.h_sub.row(0), v.g_sub.row(0));
    assert_eq!(v.h_sub.row(1), v.g_sub.row(1));
}

#[test]
fn rows_do_not_depend_on_batch_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = erdos_renyi(70, 0.08, 6, &mut rng);
    let subs = precompute_subgraphs(&g, &PprConfig { subgraph_size: 6, ..Default::default() }, SamplerKind::Rank).unwrap();
    let p = params_with_bias(6, 9, 5);
    let enc = ViewEncoder::new(&g, &subs).unwrap();
    let all: Vec<usize> = (0..70).collect();
    let full = enc.forward(&all, &p).unwrap();
    let glob = enc.global_embeddings(&p).unwrap();
    let mut batch: Vec<usize> = (0..70).collect();
    batch.shuffle(&mut rng);
    batch.truncate(13);
    let part = enc.forward(&batch, &p).unwrap();
    for (row, &t) in batch.iter().enumerate() {
        assert_eq!(part.targets[row], t);
        assert_eq!(part.h_sub.row(row), full.h_sub.row(t));
        assert_eq!(part.g_sub.row(row), full.g_sub.row(t));
        assert_eq!(part.h_glob.row(row), full.h_glob.row(t));
        assert_eq!(part.h_glob.row(row), glob.row(t));
    }
    let specs: Vec<_> = batch.iter().map(|&t| subs.get(t)).collect();
    let direct = encode_views(&g, &specs, &p).unwrap();
    assert_eq!(direct.h_sub, part.h_sub);
    assert_eq!(direct.g_sub, part.g_sub);
    assert_eq!(direct.h_glob, part.h_glob);
}

#[test]
fn isomorphic_components_embed_identically() {
    // Two copies of a 4-node "kite", the second relabeled.
    let base = [(0, 1), (1, 2), (2, 0), (2, 3)];
    let relabel = [6, 4, 7, 5];
    let feats = [vec![1.0, 0.0], vec![0.3, 0.2], vec![-0.5, 1.0], vec![0.0, -2.0]];
    let mut rows = vec![vec![0.0; 2]; 8];
    for i in 0..4 {
        rows[i] = feats[i].clone();
        rows[relabel[i]] = feats[i].clone();
    }
    let mut edges: Vec<(usize, usize)> = base.to_vec();
    edges.extend(base.iter().map(|&(u, v)| (relabel[u], relabel[v])));
    let g = Graph::from_edges(Dense::from_rows(&rows).unwrap(), edges).unwrap();
    let subs = precompute_subgraphs(&g, &PprConfig { subgraph_size: 3, ..Default::default() }, SamplerKind::Rank).unwrap();
    let p = params_with_bias(2, 4, 6);
    for view in [EmbeddingView::Global, EmbeddingView::Subgraph, EmbeddingView::Concat] {
        let emb = export_embeddings(&g, &subs, &p, view).unwrap();
        for i in 0..4 {
            assert!(max_abs_diff(emb.row(i), emb.row(relabel[i])) <= 1e-12, "{view} node {i}");
        }
    }
}

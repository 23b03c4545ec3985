//! Independent reference computations shared by the integration tests.
//! Nothing here calls the library routine it is checking.

#![allow(dead_code)]

use lsgcl::contrastive::LossConfig;
use lsgcl::encoder::BLOCK_NAMES;
use lsgcl::{
    backward, encode_views, init_params, multi_level_loss, precompute_subgraphs, sample_negatives, Dense,
    EncoderParams, Graph, PprConfig, SamplerKind, SubgraphSpec,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// G(n, p) with uniform features in [-1, 1].
pub fn erdos_renyi<R: Rng>(n: usize, p: f64, f: usize, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let data = (0..n * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Graph::from_edges(Dense::from_vec(n, f, data).unwrap(), edges).unwrap()
}

/// Dense 0/1 adjacency built from `has_edge` queries.
pub fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    (0..n)
        .map(|i| (0..n).map(|j| if g.has_edge(i, j) { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// `p (I − (1−p) A D⁻¹)⁻¹ e_target`, zero-degree columns left empty.
pub fn dense_ppr(g: &Graph, target: usize, p: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let adj = dense_adjacency(g);
    let deg: Vec<f64> = (0..n).map(|j| adj.iter().map(|r| r[j]).sum()).collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let a_hat = if deg[j] > 0.0 { adj[i][j] / deg[j] } else { 0.0 };
            m[i][j] = if i == j { 1.0 } else { 0.0 } - (1.0 - p) * a_hat;
        }
    }
    let mut rhs = vec![0.0; n];
    rhs[target] = p;
    gauss_solve(m, rhs)
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` as a dense table.
pub fn dense_sym_norm(adj: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = adj.len();
    let d: Vec<f64> = adj.iter().map(|r| 1.0 + r.iter().sum::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let a = adj[i][j] + if i == j { 1.0 } else { 0.0 };
                    a / (d[i] * d[j]).sqrt()
                })
                .collect()
        })
        .collect()
}

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|r| (0..cols).map(|j| (0..inner).map(|k| r[k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn to_rows(m: &Dense) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

/// Straight-line encoder: `PReLU(Â X W) M + b` with nested loops.
pub fn naive_encode(adj: &[Vec<f64>], x: &[Vec<f64>], p: &EncoderParams) -> Vec<Vec<f64>> {
    let z = dense_matmul(&dense_matmul(&dense_sym_norm(adj), x), &to_rows(&p.gcn_weight));
    let act: Vec<Vec<f64>> = z
        .iter()
        .map(|r| r.iter().map(|&v| if v >= 0.0 { v } else { p.prelu_slope * v }).collect())
        .collect();
    dense_matmul(&act, &to_rows(&p.mlp_weight))
        .into_iter()
        .map(|r| r.iter().zip(&p.mlp_bias).map(|(v, b)| v + b).collect())
        .collect()
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar Adam with bias correction, one coordinate.
pub struct ScalarAdam {
    pub m: f64,
    pub v: f64,
    pub t: i32,
}

impl ScalarAdam {
    pub fn new() -> Self {
        Self { m: 0.0, v: 0.0, t: 0 }
    }

    pub fn step(&mut self, x: f64, g: f64, lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
        self.t += 1;
        self.m = b1 * self.m + (1.0 - b1) * g;
        self.v = b2 * self.v + (1.0 - b2) * g * g;
        let m_hat = self.m / (1.0 - b1.powi(self.t));
        let v_hat = self.v / (1.0 - b2.powi(self.t));
        x - lr * m_hat / (v_hat.sqrt() + eps)
    }
}

/// Pairwise AUC: fraction of (pos, neg) pairs ordered correctly, ties 1/2.
pub fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for &p in pos {
        for &n in neg {
            s += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Full training loss of `params` on a fixed batch of subgraphs and negatives.
pub fn batch_loss(g: &Graph, batch: &[&SubgraphSpec], neg: &[usize], cfg: &LossConfig, params: &EncoderParams) -> f64 {
    let views = encode_views(g, batch, params).unwrap();
    multi_level_loss(&views, neg, cfg).unwrap().loss
}

/// Central difference of `f` along one coordinate of a flat parameter block.
pub fn central_difference<F>(params: &EncoderParams, block: usize, index: usize, step: f64, f: F) -> f64
where
    F: Fn(&EncoderParams) -> f64,
{
    let shifted = |delta: f64| {
        let mut p = params.clone();
        p.blocks_mut()[block].1[index] += delta;
        f(&p)
    };
    (shifted(step) - shifted(-step)) / (2.0 * step)
}

/// Relative agreement with an absolute floor for tiny values.
pub fn close(analytic: f64, numeric: f64, rel: f64, floor: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= floor || diff <= rel * analytic.abs().max(numeric.abs())
}

/// Dense PPR for every target at once: column `t` of `p (I − (1−p) A D⁻¹)⁻¹`,
/// returned as `out[t][v]`.
pub fn dense_ppr_all(g: &Graph, p: f64) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let adj = dense_adjacency(g);
    let deg: Vec<f64> = (0..n).map(|j| adj.iter().map(|r| r[j]).sum()).collect();
    // Gauss-Jordan on [M | p I].
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; 2 * n];
            for j in 0..n {
                let a_hat = if deg[j] > 0.0 { adj[i][j] / deg[j] } else { 0.0 };
                row[j] = if i == j { 1.0 } else { 0.0 } - (1.0 - p) * a_hat;
            }
            row[n + i] = p;
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            }
        }
    }
    (0..n).map(|t| (0..n).map(|v| m[v][n + t]).collect()).collect()
}

/// A small random encoder problem: graph, batch of subgraphs, negatives and
/// parameters with every block moved off its initial value.
pub struct GradInstance {
    pub g: Graph,
    pub specs: Vec<SubgraphSpec>,
    pub neg: Vec<usize>,
    pub params: EncoderParams,
}

/// N in 3..=8, F ≤ 5, D ≤ 4, B in 2..=3.
pub fn grad_instance(seed: u64) -> GradInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=8);
    let f = rng.gen_range(1..=5);
    let d = rng.gen_range(1..=4);
    let b = rng.gen_range(2..=3);
    let g = erdos_renyi(n, 0.4, f, &mut rng);
    let cfg = PprConfig { subgraph_size: rng.gen_range(1..=n), ..Default::default() };
    let set = precompute_subgraphs(&g, &cfg, SamplerKind::Rank).unwrap();
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    let specs = nodes[..b].iter().map(|&t| set.get(t).clone()).collect();
    let neg = sample_negatives(b, &mut rng).unwrap();
    let mut params = init_params(f, d, rng.gen()).unwrap();
    params.prelu_slope = rng.gen_range(0.05..0.6);
    params.mlp_bias.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    GradInstance { g, specs, neg, params }
}

/// Checks every analytic encoder gradient against a central difference with
/// step 1e-5, relative tolerance 1e-4 and absolute floor 1e-8. Returns the
/// number of coordinates checked, or the first mismatch.
pub fn check_encoder_gradients(cfg: &LossConfig, seeds: std::ops::Range<u64>) -> Result<usize, String> {
    let mut checked = 0;
    for seed in seeds {
        let inst = grad_instance(seed);
        let batch: Vec<&SubgraphSpec> = inst.specs.iter().collect();
        let views = encode_views(&inst.g, &batch, &inst.params).unwrap();
        let out = multi_level_loss(&views, &inst.neg, cfg).unwrap();
        let grads = backward(&views, &out.grads, &inst.params).unwrap();
        let loss = |p: &EncoderParams| batch_loss(&inst.g, &batch, &inst.neg, cfg, p);
        for (block, (name, analytic)) in grads.blocks().into_iter().enumerate() {
            assert_eq!(name, BLOCK_NAMES[block]);
            for (i, &a) in analytic.iter().enumerate() {
                let numeric = central_difference(&inst.params, block, i, 1e-5, loss);
                if !close(a, numeric, 1e-4, 1e-8) {
                    return Err(format!("seed {seed} {name}[{i}]: analytic {a:e} numeric {numeric:e}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
